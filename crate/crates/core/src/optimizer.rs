//! Worst-case rate over the attainable region, and the non-cheating baseline
//! over the convex hull of the sources.
//!
//! `R_p(D)` is not concave in `p`, so the maximization is a plain search:
//! a dense simplex grid (small alphabets) or multistart ascent (larger
//! ones), each polished by a compass search over moves `p + h (e_i - e_j)`.
//! Multistart results are lower bounds and are flagged as heuristic.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probcore::{d_max, d_min, DistortionMatrix, Distribution, SourceList};
use crate::rate_distortion::RdSolver;
use crate::region::{RegionSpec, SubsetTable};
use crate::strategy::{greedy_max_rule, induced_distribution, minimize_linear, repair_into_region};

/// Smallest improvement a local move must make to be accepted.
const IMPROVE_TOL: f64 = 1e-11;
const FD_STEP: f64 = 1e-5;
const MIN_STEP: f64 = 1e-7;
const MAX_ASCENT_ITERS: usize = 60;
const MAX_SEARCH_EVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Grid,
    Multistart,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::Multistart => "multistart",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Simplex grid spacing; `None` picks 0.005 for two coordinates, 0.02 for
    /// three and 0.05 for four.
    pub grid_step: Option<f64>,
    /// Number of ascent starts when searching without a grid.
    pub starts: usize,
    pub seed: u64,
    pub solver: RdSolver,
    /// Force a method; by default the grid is used up to three coordinates.
    pub method: Option<Method>,
    /// Polish the best candidate with a local compass search.
    pub refine: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_step: None,
            starts: 8,
            seed: 0,
            solver: RdSolver::default(),
            method: None,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerResult {
    /// Bits per symbol; `inf` when some feasible `p` has `D_min(p) > D`.
    pub value: f64,
    pub argmax: Distribution,
    /// Mixture weights over the sources (hull search only).
    pub weights: Option<Vec<f64>>,
    pub method: Method,
    pub evaluations: usize,
    pub starts: usize,
    /// True when the value is only a local-search lower bound.
    pub heuristic: bool,
}

fn default_step(dim: usize) -> f64 {
    match dim {
        0..=2 => 0.005,
        3 => 0.02,
        _ => 0.05,
    }
}

/// All points `c / k` of the simplex in `dim` coordinates with `k = round(1/step)`.
pub fn simplex_grid(dim: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let k = (1.0 / step).round().max(1.0) as usize;
    // C(k + dim - 1, dim - 1) points.
    let mut count = 1f64;
    for t in 1..dim {
        count = count * (k + t) as f64 / t as f64;
    }
    if count > 4e6 {
        return Err(Error::GuardExceeded {
            what: "simplex grid points",
            value: count,
            limit: 4e6,
        });
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; dim];
    fn rec(pos: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[pos] = c;
            rec(pos + 1, left - c, k, cur, out);
        }
    }
    if dim > 0 {
        rec(0, k, k, &mut current, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Candidate {
    x: Vec<f64>,
    value: f64,
}

/// Larger value wins; exact ties go to the lexicographically smaller point.
fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            a.x.iter()
                .zip(&b.x)
                .find(|(u, v)| u != v)
                .is_some_and(|(u, v)| u < v)
        }
    }
}

fn best_of(cands: impl IntoIterator<Item = Candidate>) -> Option<Candidate> {
    cands
        .into_iter()
        .fold(None, |acc: Option<Candidate>, c| match acc {
            Some(b) if !better(&c, &b) => Some(b),
            _ => Some(c),
        })
}

/// A search problem over points of a simplex.
struct Search<'a> {
    dim: usize,
    objective: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    feasible: &'a (dyn Fn(&[f64]) -> bool + Sync),
    repair: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    evals: AtomicUsize,
}

impl Search<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.objective)(x)
    }

    fn candidate(&self, x: Vec<f64>) -> Candidate {
        let value = self.eval(&x);
        Candidate { x, value }
    }

    /// Compass search over the moves `x + h (e_i - e_j)`.
    fn compass(&self, start: Candidate, step: f64) -> Candidate {
        let mut cur = start;
        if !cur.value.is_finite() {
            return cur;
        }
        let mut h = step;
        // Local count: the shared counter also sees concurrent starts.
        let mut used = 0;
        while h >= MIN_STEP && used < MAX_SEARCH_EVALS {
            let mut improved = false;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if i == j || cur.x[j] <= 0.0 {
                        continue;
                    }
                    let amount = h.min(cur.x[j]);
                    let mut y = cur.x.clone();
                    y[i] += amount;
                    y[j] -= amount;
                    if !(self.feasible)(&y) {
                        continue;
                    }
                    let v = self.eval(&y);
                    used += 1;
                    if v > cur.value + IMPROVE_TOL {
                        cur = Candidate { x: y, value: v };
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        cur
    }

    /// Projected finite-difference gradient ascent with backtracking; points
    /// leaving the region are repaired back into it.
    fn ascend(&self, start: Candidate) -> Candidate {
        let n = self.dim;
        let mut cur = start;
        let mut eta = 0.05;
        for _ in 0..MAX_ASCENT_ITERS {
            if !cur.value.is_finite() {
                break;
            }
            let mut grad = vec![0.0; n];
            for (i, gi) in grad.iter_mut().enumerate() {
                // Tangent direction e_i - 1/n.
                let dir: Vec<f64> = (0..n)
                    .map(|k| {
                        if k == i {
                            1.0 - 1.0 / n as f64
                        } else {
                            -1.0 / n as f64
                        }
                    })
                    .collect();
                let shift = |sign: f64| -> Option<Vec<f64>> {
                    let y: Vec<f64> = cur
                        .x
                        .iter()
                        .zip(&dir)
                        .map(|(x, d)| x + sign * FD_STEP * d)
                        .collect();
                    (y.iter().all(|&v| v >= 0.0) && (self.feasible)(&y)).then_some(y)
                };
                *gi = match (shift(1.0), shift(-1.0)) {
                    (Some(a), Some(b)) => (self.eval(&a) - self.eval(&b)) / (2.0 * FD_STEP),
                    (Some(a), None) => (self.eval(&a) - cur.value) / FD_STEP,
                    (None, Some(b)) => (cur.value - self.eval(&b)) / FD_STEP,
                    (None, None) => 0.0,
                };
            }
            let mean = grad.iter().sum::<f64>() / n as f64;
            grad.iter_mut().for_each(|g| *g -= mean);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < 1e-9 {
                break;
            }
            let mut accepted = false;
            while eta > 1e-8 {
                let mut y: Vec<f64> = cur
                    .x
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| (x + eta * g / norm).max(0.0))
                    .collect();
                let total: f64 = y.iter().sum();
                y.iter_mut().for_each(|v| *v /= total);
                if !(self.feasible)(&y) {
                    y = (self.repair)(&y);
                }
                let cand = self.candidate(y);
                if cand.value > cur.value + IMPROVE_TOL {
                    cur = cand;
                    eta *= 1.5;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        cur
    }

    fn run_grid(&self, step: f64, extra: Vec<Vec<f64>>, refine: bool) -> Result<Candidate> {
        let mut points: Vec<Vec<f64>> = simplex_grid(self.dim, step)?
            .into_iter()
            .filter(|x| (self.feasible)(x))
            .collect();
        points.extend(extra);
        if points.is_empty() {
            return Err(Error::Infeasible("no feasible grid point".into()));
        }
        let cands: Vec<Candidate> = points.into_par_iter().map(|x| self.candidate(x)).collect();
        let best = best_of(cands).expect("nonempty");
        Ok(if refine {
            self.compass(best, step)
        } else {
            best
        })
    }

    fn run_multistart(&self, starts: Vec<Vec<f64>>, refine: bool) -> Result<Candidate> {
        if starts.is_empty() {
            return Err(Error::Infeasible("no feasible start".into()));
        }
        let results: Vec<Candidate> = starts
            .into_par_iter()
            .map(|x| {
                let c = self.ascend(self.candidate(x));
                if refine {
                    self.compass(c, 0.01)
                } else {
                    c
                }
            })
            .collect();
        Ok(best_of(results).expect("nonempty"))
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn normalized(x: &[f64]) -> Result<Distribution> {
    let total: f64 = x.iter().sum();
    Distribution::new(x.iter().map(|v| (v / total).max(0.0)).collect())
}

/// `R_p(D)` corrected to first order for the bisection's distortion miss;
/// `inf` when `D < D_min(p)`.
fn rate_objective<'a>(
    solver: &'a RdSolver,
    d: &'a DistortionMatrix,
    target: f64,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| {
        let Ok(p) = normalized(x) else {
            return f64::NEG_INFINITY;
        };
        match solver.rate_at_distortion(&p, d, target) {
            Ok(pt) => pt.rate_at(target),
            Err(Error::Infeasible(_)) => f64::INFINITY,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

fn check_target(d: &DistortionMatrix, n: usize, target: f64) -> Result<()> {
    if d.x_size() != n {
        return Err(Error::Dimension(format!(
            "distortion matrix has {} rows, alphabet has {n}",
            d.x_size()
        )));
    }
    if !(target >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distortion must be ≥ 0, got {target}"
        )));
    }
    Ok(())
}

fn finish(
    search: &Search<'_>,
    best: Candidate,
    method: Method,
    starts: usize,
    weights: Option<Vec<f64>>,
    argmax: Option<Vec<f64>>,
) -> Result<MaximizerResult> {
    Ok(MaximizerResult {
        value: best.value,
        argmax: normalized(argmax.as_deref().unwrap_or(&best.x))?,
        weights,
        method,
        evaluations: search.evals.load(Ordering::Relaxed),
        starts,
        heuristic: method == Method::Multistart,
    })
}

/// Ascent starts for a region search: the greedy point (always attainable)
/// followed by Dirichlet draws repaired into the region.
fn region_starts(
    sources: &SourceList,
    feasible: &(dyn Fn(&[f64]) -> bool + Sync),
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = sources.alphabet_size();
    let greedy = induced_distribution(&greedy_max_rule(sources)?, sources)?.into_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![greedy];
    for _ in 1..count.max(1) {
        let raw = dirichlet(&mut rng, n);
        starts.push(if feasible(&raw) {
            raw
        } else {
            repair_into_region(&raw, sources)?.into_vec()
        });
    }
    Ok(starts)
}

/// `max_{p in C_delta} R_p(D)`.
pub fn maximize_over_region(
    spec: &RegionSpec,
    d: &DistortionMatrix,
    target: f64,
    config: &OptimizerConfig,
) -> Result<MaximizerResult> {
    let n = spec.alphabet_size();
    check_target(d, n, target)?;
    let table = SubsetTable::new(&spec.sources)?;
    let delta = spec.delta;
    let feasible = |x: &[f64]| table.check(x, delta).satisfied;
    let repair = |x: &[f64]| {
        repair_into_region(x, &spec.sources)
            .map(Distribution::into_vec)
            .unwrap_or_else(|_| x.to_vec())
    };
    let objective = rate_objective(&config.solver, d, target);
    let search = Search {
        dim: n,
        objective: &objective,
        feasible: &feasible,
        repair: &repair,
        evals: AtomicUsize::new(0),
    };
    let method = config.method.unwrap_or(if n <= 3 {
        Method::Grid
    } else {
        Method::Multistart
    });
    let (best, starts) = match method {
        Method::Grid => {
            let greedy = induced_distribution(&greedy_max_rule(&spec.sources)?, &spec.sources)?;
            let step = config.grid_step.unwrap_or(default_step(n));
            (
                search.run_grid(step, vec![greedy.into_vec()], config.refine)?,
                1,
            )
        }
        Method::Multistart => {
            let starts = region_starts(&spec.sources, &feasible, config.starts, config.seed)?;
            let count = starts.len();
            (search.run_multistart(starts, config.refine)?, count)
        }
    };
    finish(&search, best, method, starts, None, None)
}

/// `max_p R_p(D)` over the whole simplex; the trivial upper bound.
pub fn maximize_over_simplex(
    n: usize,
    d: &DistortionMatrix,
    target: f64,
    config: &OptimizerConfig,
) -> Result<MaximizerResult> {
    check_target(d, n, target)?;
    let feasible = |x: &[f64]| x.iter().all(|&v| v >= 0.0);
    let repair = |x: &[f64]| x.to_vec();
    let objective = rate_objective(&config.solver, d, target);
    let search = Search {
        dim: n,
        objective: &objective,
        feasible: &feasible,
        repair: &repair,
        evals: AtomicUsize::new(0),
    };
    let method = config.method.unwrap_or(if n <= 3 {
        Method::Grid
    } else {
        Method::Multistart
    });
    let uniform = vec![1.0 / n as f64; n];
    let (best, starts) = match method {
        Method::Grid => {
            let step = config.grid_step.unwrap_or(default_step(n));
            (search.run_grid(step, vec![uniform], config.refine)?, 1)
        }
        Method::Multistart => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut starts = vec![uniform];
            starts.extend((1..config.starts.max(1)).map(|_| dirichlet(&mut rng, n)));
            let count = starts.len();
            (search.run_multistart(starts, config.refine)?, count)
        }
    };
    finish(&search, best, method, starts, None, None)
}

/// `max R_p(D)` over mixtures `p = sum_l lambda_l p_l` of the sources.
pub fn maximize_over_hull(
    sources: &SourceList,
    d: &DistortionMatrix,
    target: f64,
    config: &OptimizerConfig,
) -> Result<MaximizerResult> {
    let srcs = sources.marginals();
    let n = sources.alphabet_size();
    check_target(d, n, target)?;
    let m = srcs.len();
    let mix = |lambda: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for (l, &w) in lambda.iter().enumerate() {
            for (pi, &s) in p.iter_mut().zip(srcs[l].probs()) {
                *pi += w * s;
            }
        }
        p
    };
    let rate = rate_objective(&config.solver, d, target);
    let objective = |lambda: &[f64]| rate(&mix(lambda));
    let feasible = |x: &[f64]| x.iter().all(|&v| v >= 0.0);
    let repair = |x: &[f64]| x.to_vec();
    let search = Search {
        dim: m,
        objective: &objective,
        feasible: &feasible,
        repair: &repair,
        evals: AtomicUsize::new(0),
    };
    if m == 1 {
        let best = search.candidate(vec![1.0]);
        let p = mix(&best.x);
        return finish(&search, best, Method::Grid, 1, Some(vec![1.0]), Some(p));
    }
    let method = config.method.unwrap_or(if m <= 4 {
        Method::Grid
    } else {
        Method::Multistart
    });
    let (best, starts) = match method {
        Method::Grid => {
            let step = config.grid_step.unwrap_or(default_step(m));
            (search.run_grid(step, Vec::new(), config.refine)?, 1)
        }
        Method::Multistart => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut starts: Vec<Vec<f64>> = (0..m)
                .map(|l| (0..m).map(|k| if k == l { 1.0 } else { 0.0 }).collect())
                .collect();
            starts.extend((0..config.starts).map(|_| dirichlet(&mut rng, m)));
            let count = starts.len();
            (search.run_multistart(starts, config.refine)?, count)
        }
    };
    let p = mix(&best.x);
    let weights = best.x.clone();
    finish(&search, best, method, starts, Some(weights), Some(p))
}

/// Distortion span `[lo, hi]` of the worst-case curve: `lo` is the largest
/// `D_min` over the region (below it some attainable source has infinite
/// rate) and `hi` the largest `D_max`.
pub fn distortion_span(
    spec: &RegionSpec,
    d: &DistortionMatrix,
    config: &OptimizerConfig,
) -> Result<(f64, f64)> {
    let n = spec.alphabet_size();
    check_target(d, n, 0.0)?;
    let floors: Vec<f64> = (0..n)
        .map(|i| d.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let neg: Vec<f64> = floors.iter().map(|c| -c).collect();
    let worst_floor = minimize_linear(&spec.sources, &neg)?;
    let lo = d_min(&worst_floor, d)?;

    let table = SubsetTable::new(&spec.sources)?;
    let delta = spec.delta;
    let feasible = |x: &[f64]| table.check(x, delta).satisfied;
    let repair = |x: &[f64]| {
        repair_into_region(x, &spec.sources)
            .map(Distribution::into_vec)
            .unwrap_or_else(|_| x.to_vec())
    };
    let objective = |x: &[f64]| {
        normalized(x)
            .and_then(|p| d_max(&p, d))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let search = Search {
        dim: n,
        objective: &objective,
        feasible: &feasible,
        repair: &repair,
        evals: AtomicUsize::new(0),
    };
    let best = if n <= 3 {
        let greedy = induced_distribution(&greedy_max_rule(&spec.sources)?, &spec.sources)?;
        let step = config.grid_step.unwrap_or(default_step(n));
        search.run_grid(step, vec![greedy.into_vec()], true)?
    } else {
        let starts = region_starts(&spec.sources, &feasible, config.starts, config.seed)?;
        search.run_multistart(starts, true)?
    };
    Ok((lo, best.value.max(lo)))
}

/// The worst-case rate on `num_points` distortions evenly spread over
/// [`distortion_span`].
pub fn rd_tilde_curve(
    spec: &RegionSpec,
    d: &DistortionMatrix,
    num_points: usize,
    config: &OptimizerConfig,
) -> Result<Vec<(f64, MaximizerResult)>> {
    if num_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 curve points, got {num_points}"
        )));
    }
    let (lo, hi) = distortion_span(spec, d, config)?;
    let mut out: Vec<(f64, MaximizerResult)> = Vec::with_capacity(num_points);
    for k in 0..num_points {
        let target = if k + 1 == num_points {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (num_points - 1) as f64
        };
        let mut res = maximize_over_region(spec, d, target, config)?;
        if let Some((_, prev)) = out.last() {
            // Independent searches; keep the reported curve nonincreasing.
            res.value = res.value.min(prev.value);
        }
        out.push((target, res));
    }
    Ok(out)
}
