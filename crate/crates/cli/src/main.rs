//! `switchrd`: worst-case rate-distortion for a cheating switcher.
//!
//! Exit codes: 0 success, 2 mathematically infeasible, 3 malformed input,
//! 4 size guard exceeded, 1 anything else (I/O, non-convergence).
//!
//! Default tolerances can be overridden with `SWITCHRD_BA_TOL`,
//! `SWITCHRD_DISTORTION_TOL` and `SWITCHRD_SYNTH_TOL`.

mod problem;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use switchrd::fmt::g12;
use switchrd::game_sim::{build_covering_codebook, simulate_game, SimReport};
use switchrd::optimizer::{
    maximize_over_hull, maximize_over_region, rd_tilde_curve, OptimizerConfig,
};
use switchrd::probcore::Distribution;
use switchrd::rate_distortion::RdSolver;
use switchrd::region::{enumerate_constraints, is_member, SubsetTable, SymbolSubset};
use switchrd::strategy::{synthesize_rule, SwitchRule};
use switchrd::Error;

use problem::{parse_vector, Problem};

const SYNTH_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "switchrd",
    version,
    about = "Rate-distortion against a cheating switcher"
)]
struct Cli {
    /// Write the result here (atomically) instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// R_p(D) for a single source distribution.
    #[command(group(ArgGroup::new("what").required(true).args(["distortion", "curve"])))]
    Rd {
        problem: PathBuf,
        /// Source distribution, e.g. `0.5,0.5` or `1/3,2/3`.
        #[arg(long)]
        p: String,
        #[arg(long)]
        distortion: Option<f64>,
        /// Number of evenly spaced curve points.
        #[arg(long)]
        curve: Option<usize>,
    },
    /// Membership in the attainable region, or the full constraint list.
    #[command(group(ArgGroup::new("what").required(true).args(["check", "list"])))]
    Region {
        problem: PathBuf,
        #[arg(long)]
        check: Option<String>,
        #[arg(long)]
        list: bool,
    },
    /// A switch rule inducing the target distribution.
    Synthesize {
        problem: PathBuf,
        #[arg(long)]
        target: String,
    },
    /// The worst-case rate over the region next to the convex-hull baseline.
    #[command(group(ArgGroup::new("what").required(true).args(["distortion", "curve"])))]
    Optimize {
        problem: PathBuf,
        #[arg(long)]
        distortion: Option<f64>,
        #[arg(long)]
        curve: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long = "grid-step")]
        grid_step: Option<f64>,
    },
    /// Monte Carlo play of the switching game.
    #[command(group(ArgGroup::new("strategy").required(true).args(["target", "rule"])))]
    Simulate {
        problem: PathBuf,
        #[arg(long)]
        target: Option<String>,
        /// Rule file in the `synthesize` output format.
        #[arg(long)]
        rule: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Build a covering codebook at this distortion and score against it.
        #[arg(long = "codebook-D")]
        codebook_d: Option<f64>,
        /// Print a CSV header and row instead of key=value lines.
        #[arg(long)]
        csv: bool,
    },
}

enum Failure {
    Core(Error),
    Input(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::Infeasible(_) | Error::NotAttainable { .. }) => 2,
            Failure::Core(Error::GuardExceeded { .. }) => 4,
            Failure::Core(Error::NonConvergence { .. }) => 1,
            Failure::Core(_) | Failure::Input(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Input(m) | Failure::Io(m) => m.clone(),
        }
    }
}

/// Output text plus the exit code it should be reported with.
struct Outcome {
    text: String,
    code: u8,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, code: 0 }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

fn env_tol(name: &str, default: f64) -> std::result::Result<f64, Failure> {
    match std::env::var(name) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(Failure::Input(format!(
                "{name}={v:?} is not a positive number"
            ))),
        },
        Err(_) => Ok(default),
    }
}

fn solver() -> std::result::Result<RdSolver, Failure> {
    let base = RdSolver::default();
    Ok(RdSolver {
        ba_tol: env_tol("SWITCHRD_BA_TOL", base.ba_tol)?,
        distortion_tol: env_tol("SWITCHRD_DISTORTION_TOL", base.distortion_tol)?,
        ..base
    })
}

fn load(path: &Path) -> std::result::Result<Problem, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(Problem::parse(&text)?)
}

fn distribution(problem: &Problem, text: &str) -> std::result::Result<Distribution, Failure> {
    let p = Distribution::new(parse_vector(text)?)?;
    if p.len() != problem.alphabet_x {
        return Err(Error::Dimension(format!(
            "vector has {} entries, alphabet_x = {}",
            p.len(),
            problem.alphabet_x
        ))
        .into());
    }
    Ok(p)
}

fn subset_label(problem: &Problem, v: SymbolSubset) -> String {
    let names: Vec<String> = v.symbols().map(|i| problem.label(i)).collect();
    format!("{{{}}}", names.join(","))
}

fn violation_line(problem: &Problem, v: SymbolSubset, lhs: f64, rhs: f64) -> String {
    format!(
        "VIOLATION V={} lhs={} rhs={}\n",
        subset_label(problem, v),
        g12(lhs),
        g12(rhs)
    )
}

fn cmd_rd(problem: &Problem, p: &str, distortion: Option<f64>, curve: Option<usize>) -> CmdResult {
    let p = distribution(problem, p)?;
    let solver = solver()?;
    let mut out = String::from("D,R\n");
    if let Some(target) = distortion {
        let pt = solver.rate_at_distortion(&p, &problem.distortion, target)?;
        out.push_str(&format!("{},{}\n", g12(target), g12(pt.rate_at(target))));
    } else if let Some(k) = curve {
        for pt in solver.rd_curve(&p, &problem.distortion, k)?.points {
            out.push_str(&format!("{},{}\n", g12(pt.distortion), g12(pt.rate)));
        }
    }
    Ok(Outcome::ok(out))
}

fn cmd_region(problem: &Problem, check: Option<&str>, list: bool) -> CmdResult {
    let spec = problem.region();
    if list {
        let table = SubsetTable::new(&problem.sources)?;
        let mut out = String::from("mask,subset,Q,beta,rhs\n");
        for (v, rhs) in enumerate_constraints(&spec)? {
            let names: Vec<String> = v.symbols().map(|i| problem.label(i)).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                v.mask(),
                names.join(" "),
                g12(table.q(v)),
                g12(table.beta(v)),
                g12(rhs)
            ));
        }
        return Ok(Outcome::ok(out));
    }
    let p = distribution(problem, check.expect("clap enforces the group"))?;
    let report = is_member(&p, &spec)?;
    if report.satisfied {
        return Ok(Outcome::ok("MEMBER\n".into()));
    }
    let text = report
        .violations
        .iter()
        .map(|v| violation_line(problem, v.subset, v.lhs, v.rhs))
        .collect();
    Ok(Outcome { text, code: 2 })
}

fn cmd_synthesize(problem: &Problem, target: &str) -> CmdResult {
    let target = distribution(problem, target)?;
    match synthesize_rule(
        &target,
        &problem.sources,
        env_tol("SWITCHRD_SYNTH_TOL", SYNTH_TOL)?,
    ) {
        Ok(rule) => Ok(Outcome::ok(rule.to_text())),
        Err(Error::NotAttainable { subset, lhs, rhs }) => Ok(Outcome {
            text: violation_line(problem, subset, lhs, rhs),
            code: 2,
        }),
        Err(e) => Err(e.into()),
    }
}

fn cmd_optimize(
    problem: &Problem,
    distortion: Option<f64>,
    curve: Option<usize>,
    config: &OptimizerConfig,
) -> CmdResult {
    let spec = problem.region();
    let d = &problem.distortion;
    let rows = match (distortion, curve) {
        (Some(target), _) => vec![(target, maximize_over_region(&spec, d, target, config)?)],
        (None, Some(k)) => rd_tilde_curve(&spec, d, k, config)?,
        (None, None) => unreachable!("clap enforces the group"),
    };
    let mut out = String::from("D,R_tilde,R_star");
    for i in 0..problem.alphabet_x {
        out.push_str(&format!(",p_{i}"));
    }
    out.push_str(",method\n");
    let mut prev_star = f64::INFINITY;
    for (target, mut res) in rows {
        let star = maximize_over_hull(&problem.sources, d, target, config)?;
        let star_value = star.value.min(prev_star);
        prev_star = star_value;
        // The hull lies inside the region, so a better hull point is a
        // better region point too.
        if star_value > res.value {
            res.value = star_value;
            res.argmax = star.argmax;
        }
        out.push_str(&format!(
            "{},{},{}",
            g12(target),
            g12(res.value),
            g12(star_value)
        ));
        for &x in res.argmax.probs() {
            out.push_str(&format!(",{}", g12(x)));
        }
        out.push_str(&format!(",{}\n", res.method.as_str()));
    }
    Ok(Outcome::ok(out))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    problem: &Problem,
    target: Option<&str>,
    rule: Option<&Path>,
    n: usize,
    trials: usize,
    seed: u64,
    codebook_d: Option<f64>,
    csv: bool,
) -> CmdResult {
    let rule = match (target, rule) {
        (Some(t), _) => {
            let t = distribution(problem, t)?;
            synthesize_rule(
                &t,
                &problem.sources,
                env_tol("SWITCHRD_SYNTH_TOL", SYNTH_TOL)?,
            )?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            SwitchRule::from_text(&text)?
        }
        (None, None) => unreachable!("clap enforces the group"),
    };
    let spec = problem.region();
    let book = codebook_d
        .map(|target| build_covering_codebook(&spec, &problem.distortion, target, n))
        .transpose()?;
    let report = simulate_game(
        &spec,
        &rule,
        book.as_ref(),
        &problem.distortion,
        n,
        trials,
        seed,
    )?;
    let (size, rate) = book.as_ref().map_or((String::new(), String::new()), |b| {
        (b.len().to_string(), g12(b.rate()))
    });
    let text = if csv {
        format!(
            "{},codebook_size,codebook_rate\n{},{size},{rate}\n",
            SimReport::CSV_HEADER,
            report.to_csv_row()
        )
    } else {
        let mut text = report.to_kv();
        if book.is_some() {
            text.push_str(&format!("codebook_size={size}\ncodebook_rate={rate}\n"));
        }
        text
    };
    Ok(Outcome::ok(text))
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Rd {
            problem,
            p,
            distortion,
            curve,
        } => cmd_rd(&load(problem)?, p, *distortion, *curve),
        Command::Region {
            problem,
            check,
            list,
        } => cmd_region(&load(problem)?, check.as_deref(), *list),
        Command::Synthesize { problem, target } => cmd_synthesize(&load(problem)?, target),
        Command::Optimize {
            problem,
            distortion,
            curve,
            seed,
            starts,
            grid_step,
        } => {
            let config = OptimizerConfig {
                grid_step: *grid_step,
                starts: *starts,
                seed: *seed,
                solver: solver()?,
                ..OptimizerConfig::default()
            };
            cmd_optimize(&load(problem)?, *distortion, *curve, &config)
        }
        Command::Simulate {
            problem,
            target,
            rule,
            n,
            trials,
            seed,
            codebook_d,
            csv,
        } => cmd_simulate(
            &load(problem)?,
            target.as_deref(),
            rule.as_deref(),
            *n,
            *trials,
            *seed,
            *codebook_d,
            *csv,
        ),
    }
}

fn write_atomic(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Failure::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let outcome = run(&cli).and_then(|o| {
        match &cli.out {
            Some(path) => write_atomic(path, &o.text)?,
            None => print!("{}", o.text),
        }
        Ok(o.code)
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
