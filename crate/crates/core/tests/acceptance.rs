//! One PASS/FAIL line per acceptance criterion.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use common::{binary_example, random_dist, random_rule, random_sources};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchrd::game_sim::{
    best_response_distortion, build_covering_codebook, distortion_to_codebook, sample_sources,
    simulate_game, strings_in_region, Codebook,
};
use switchrd::optimizer::{maximize_over_hull, maximize_over_region, OptimizerConfig};
use switchrd::probcore::{
    d_max, d_min, expected_distortion, h2, DistortionMatrix, Distribution, SourceList,
};
use switchrd::rate_distortion::RdSolver;
use switchrd::region::exact::{parse_rational, ExactSources};
use switchrd::region::{
    all_nonempty_subsets, hull_member, is_member, RegionSpec, SubsetTable, SymbolSubset,
};
use switchrd::strategy::{apply_rule, induced_distribution, synthesize_rule};

type Outcome = Result<(), String>;

fn check(ok: bool, what: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn run(n: usize, limit: Duration, body: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = body();
    let took = start.elapsed();
    let verdict = match result {
        Ok(()) if took <= limit => Ok(()),
        Ok(()) => Err(format!("took {took:.2?}, limit {limit:?}")),
        Err(e) => Err(e),
    };
    match &verdict {
        Ok(()) => println!("criterion {n}: PASS ({took:.2?})"),
        Err(e) => println!("criterion {n}: FAIL ({took:.2?}) {e}"),
    }
    verdict.is_ok()
}

fn region_reproduction() -> Outcome {
    let s = ExactSources::parse(&[vec!["2/3", "1/3"], vec!["3/4", "1/4"]])
        .map_err(|e| e.to_string())?;
    let r = |t: &str| parse_rational(t).unwrap();
    let (lo, hi) = s.attainable_interval(1);
    check(lo == r("1/12") && hi == r("1/2"), || {
        format!("interval [{lo}, {hi}]")
    })?;
    let betas = [
        s.beta(SymbolSubset::singleton(0)),
        s.beta(SymbolSubset::singleton(1)),
        s.beta(SymbolSubset::full(2)),
    ];
    check(betas == [r("1/2"), r("1/12"), r("5/12")], || {
        format!("beta {betas:?}")
    })?;
    check(s.beta(SymbolSubset::from_mask(0)).is_zero(), || {
        "beta(empty) != 0".into()
    })
}

fn binary_worst_case_instance() -> Outcome {
    let spec = RegionSpec::exact(binary_example());
    let d = DistortionMatrix::hamming(2);
    let cfg = OptimizerConfig::default();
    let half = Distribution::new(vec![0.5, 0.5]).unwrap();
    for target in [0.05, 0.1, 0.2, 0.3] {
        let tilde = maximize_over_region(&spec, &d, target, &cfg).map_err(|e| e.to_string())?;
        let star =
            maximize_over_hull(&spec.sources, &d, target, &cfg).map_err(|e| e.to_string())?;
        let l1 = tilde.argmax.l1_distance(&half);
        check(l1 <= 1e-3, || {
            format!("D={target}: argmax {:?}", tilde.argmax.probs())
        })?;
        let want = 1.0 - h2(target);
        check((tilde.value - want).abs() <= 1e-3, || {
            format!("D={target}: R_tilde {} vs {want}", tilde.value)
        })?;
        let want = h2(1.0 / 3.0) - h2(target);
        check((star.value - want).abs() <= 1e-3, || {
            format!("D={target}: R_star {} vs {want}", star.value)
        })?;
        check(star.value <= tilde.value, || {
            format!("D={target}: R_star > R_tilde")
        })?;
    }
    Ok(())
}

fn blahut_arimoto_oracle() -> Outcome {
    let mut r = rng(3);
    let d = DistortionMatrix::hamming(2);
    let solver = RdSolver::default();
    for _ in 0..20 {
        let q: f64 = r.gen_range(0.02..0.98);
        let p = Distribution::new(vec![1.0 - q, q]).unwrap();
        for k in 0..10 {
            let target = q.min(1.0 - q) * k as f64 / 10.0;
            let pt = solver
                .rate_at_distortion(&p, &d, target)
                .map_err(|e| e.to_string())?;
            let rate = pt.rate_at(target);
            let want = h2(q) - h2(target);
            check((rate - want).abs() <= 1e-4, || {
                format!("q={q} D={target}: {rate} vs {want}")
            })?;
        }
    }
    Ok(())
}

fn synthesis_constructivity() -> Outcome {
    let mut r = rng(4);
    let mut members = 0;
    for trial in 0..200 {
        let n = r.gen_range(2..=5);
        let m = r.gen_range(1..=3);
        let sources = random_sources(&mut r, n, m);
        // Half the targets come from rules, so members are well represented.
        let p = if trial % 2 == 0 {
            induced_distribution(&random_rule(&mut r, n), &sources).unwrap()
        } else {
            Distribution::new(random_dist(&mut r, n, 0.2)).unwrap()
        };
        let spec = RegionSpec::exact(sources.clone());
        let member = is_member(&p, &spec).map_err(|e| e.to_string())?.satisfied;
        match synthesize_rule(&p, &sources, 1e-9) {
            Ok(rule) => {
                check(member, || {
                    format!("instance {trial}: synthesized a non-member")
                })?;
                members += 1;
                let back = induced_distribution(&rule, &sources).map_err(|e| e.to_string())?;
                let l1 = back.l1_distance(&p);
                check(l1 <= 1e-8, || {
                    format!("instance {trial}: round trip L1 {l1}")
                })?;
            }
            Err(e) => check(!member, || {
                format!("instance {trial}: member rejected: {e}")
            })?,
        }
    }
    check(members >= 50, || {
        format!("only {members} members among 200 instances")
    })
}

fn achievability_by_simulation() -> Outcome {
    let mut r = rng(5);
    let ternary = SourceList::from_vecs(vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.6, 0.2]]).unwrap();
    let (n, trials) = (100, 10_000);
    for (sources, k) in [(binary_example(), 2), (ternary, 3)] {
        let spec = RegionSpec::exact(sources.clone());
        let d = DistortionMatrix::hamming(k);
        for t in 0..10 {
            let target = if k == 2 {
                let p1 = r.gen_range(1.0 / 12.0..=0.5);
                Distribution::new(vec![1.0 - p1, p1]).unwrap()
            } else {
                induced_distribution(&random_rule(&mut r, k), &sources).unwrap()
            };
            let rule = synthesize_rule(&target, &sources, 1e-9).map_err(|e| e.to_string())?;
            let rep =
                simulate_game(&spec, &rule, None, &d, n, trials, t).map_err(|e| e.to_string())?;
            let l1 = rep.empirical_type.l1_distance(&target);
            check(l1 <= 0.01, || {
                format!("|X|={k} target {:?}: empirical L1 {l1}", target.probs())
            })?;
        }
    }
    Ok(())
}

fn desk_scale_covering() -> Outcome {
    let sources = binary_example();
    let spec = RegionSpec::new(sources.clone(), 0.05).unwrap();
    let d = DistortionMatrix::hamming(2);
    let (n, target) = (10, 0.1);
    let book = build_covering_codebook(&spec, &d, target, n).map_err(|e| e.to_string())?;
    for x in strings_in_region(&spec, n).map_err(|e| e.to_string())? {
        let dist = distortion_to_codebook(&x, &book, &d).map_err(|e| e.to_string())?;
        check(dist <= target + 1e-12, || {
            format!("{x:?} is {dist} from the codebook")
        })?;
    }
    let tilde = maximize_over_region(
        &RegionSpec::exact(sources.clone()),
        &d,
        target,
        &OptimizerConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    check(book.rate() <= tilde.value + 0.25, || {
        format!("codebook rate {} vs R_tilde {}", book.rate(), tilde.value)
    })?;
    let rule = synthesize_rule(&tilde.argmax, &sources, 1e-9).map_err(|e| e.to_string())?;
    let rep =
        simulate_game(&spec, &rule, Some(&book), &d, n, 20_000, 6).map_err(|e| e.to_string())?;
    let mean = rep.mean_distortion.unwrap();
    let bound = target + d.max_entry() * rep.out_of_region + 4.0 * rep.distortion_stderr.unwrap();
    check(mean <= bound, || {
        format!("mean distortion {mean} above {bound}")
    })
}

fn best_response_dominance() -> Outcome {
    let mut r = rng(7);
    for block in 0..50u64 {
        let k = r.gen_range(2..=3);
        let n = r.gen_range(1..=10);
        let sources = random_sources(&mut r, k, 2);
        let d = DistortionMatrix::hamming(k);
        let real = sample_sources(&sources, n, block).unwrap();
        let mut words: Vec<Vec<usize>> = (0..r.gen_range(1..=4))
            .map(|_| (0..n).map(|_| r.gen_range(0..k)).collect())
            .collect();
        words.sort();
        words.dedup();
        let book = Codebook::new(n, words).unwrap();
        let (best, _) = best_response_distortion(&real, &book, &d).map_err(|e| e.to_string())?;
        for s in 0..5 {
            let x = apply_rule(&random_rule(&mut r, k), &real, s).map_err(|e| e.to_string())?;
            let got = distortion_to_codebook(&x, &book, &d).unwrap();
            check(got <= best + 1e-12, || {
                format!("block {block}: rule {s} scores {got} > {best}")
            })?;
        }
    }
    Ok(())
}

fn property_battery() -> Outcome {
    let mut r = rng(8);
    let solver = RdSolver::default();
    for case in 0..100 {
        let n = r.gen_range(2..=5);
        let m = r.gen_range(1..=3);
        let sources = random_sources(&mut r, n, m);
        let table = SubsetTable::new(&sources).unwrap();

        let total: f64 = all_nonempty_subsets(n)
            .unwrap()
            .map(|v| table.beta(v))
            .sum();
        check((total - 1.0).abs() <= 1e-12, || {
            format!("case {case}: sum beta = {total}")
        })?;
        for v in all_nonempty_subsets(n).unwrap() {
            let partial: f64 = v.nonempty_subsets().map(|u| table.beta(u)).sum();
            check((partial - table.q(v)).abs() <= 1e-12, || {
                format!("case {case}: partial beta sum on {v}")
            })?;
        }

        let w = random_dist(&mut r, m, 0.0);
        let marg = sources.marginals();
        let mix: Vec<f64> = (0..n)
            .map(|i| (0..m).map(|l| w[l] * marg[l][i]).sum())
            .collect();
        let mix = Distribution::new(mix).unwrap();
        check(hull_member(&mix, &sources, 1e-9).unwrap(), || {
            format!("case {case}: mixture not in hull")
        })?;
        check(table.check(mix.probs(), 1e-12).satisfied, || {
            format!("case {case}: hull point outside C")
        })?;

        let p = Distribution::new(random_dist(&mut r, n, 0.2)).unwrap();
        let (a, b): (f64, f64) = (r.gen_range(0.0..0.2), r.gen_range(0.0..0.2));
        let (small, big) = (a.min(b), a.max(b));
        if table.check(p.probs(), small).satisfied {
            check(table.check(p.probs(), big).satisfied, || {
                format!("case {case}: C_delta not monotone")
            })?;
        }

        let d = DistortionMatrix::new(
            (0..n)
                .map(|_| (0..n).map(|_| r.gen_range(0.0..2.0)).collect())
                .collect(),
        )
        .unwrap();
        let (lo, hi) = (d_min(&p, &d).unwrap(), d_max(&p, &d).unwrap());
        if hi - lo > 1e-3 {
            let mut xs = [r.gen_range(lo..hi), r.gen_range(lo..hi)];
            xs.sort_by(f64::total_cmp);
            let xm = 0.5 * (xs[0] + xs[1]);
            let at = |x: f64| {
                solver
                    .rate_at_distortion(&p, &d, x)
                    .map_err(|e| format!("case {case}: {e}"))
            };
            let (pa, pb, pm) = (at(xs[0])?, at(xs[1])?, at(xm)?);
            let (ra, rb, rm) = (pa.rate_at(xs[0]), pb.rate_at(xs[1]), pm.rate_at(xm));
            check(ra >= rb - 1e-9, || format!("case {case}: R(D) increases"))?;
            check(rm <= 0.5 * (ra + rb) + 1e-9, || {
                format!("case {case}: R(D) not convex")
            })?;
            let achieved = expected_distortion(&p, &pm.channel, &d).unwrap();
            check(achieved <= xm + solver.distortion_tol, || {
                format!("case {case}: channel misses D")
            })?;
        }

        let spec = RegionSpec::exact(sources.clone());
        let rule = random_rule(&mut r, n);
        let hd = DistortionMatrix::hamming(n);
        let one = simulate_game(&spec, &rule, None, &hd, 12, 300, case).unwrap();
        let two = simulate_game(&spec, &rule, None, &hd, 12, 300, case).unwrap();
        check(one == two, || {
            format!("case {case}: simulation not seed deterministic")
        })?;
        check(
            sample_sources(&sources, 9, case).unwrap()
                == sample_sources(&sources, 9, case).unwrap(),
            || format!("case {case}: sampling not seed deterministic"),
        )?;
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    let s = Duration::from_secs;
    let results = [
        run(1, s(1), region_reproduction),
        run(2, s(30), binary_worst_case_instance),
        run(3, s(10), blahut_arimoto_oracle),
        run(4, s(30), synthesis_constructivity),
        run(5, s(60), achievability_by_simulation),
        run(6, s(120), desk_scale_covering),
        run(7, s(30), best_response_dominance),
        run(8, s(120), property_battery),
    ];
    let failed: Vec<usize> = (1..=8).filter(|&k| !results[k - 1]).collect();
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
