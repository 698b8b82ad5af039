mod common;

use common::{binary_example, random_dist, random_rule, random_sources};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchrd::game_sim::{
    best_response_distortion, build_covering_codebook, converse_bound, distortion_to_codebook,
    sample_sources, simulate_game, strings_in_region, type_counts, Codebook,
};
use switchrd::optimizer::{
    maximize_over_hull, maximize_over_region, maximize_over_simplex, Method, OptimizerConfig,
};
use switchrd::probcore::{h2, DistortionMatrix, Distribution};
use switchrd::region::{is_member, q_of_subset, RegionSpec, SubsetTable, SymbolSubset};
use switchrd::strategy::{apply_rule, induced_distribution, synthesize_rule};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn worst_case_rate_is_sandwiched() {
    let spec = RegionSpec::exact(binary_example());
    let d = DistortionMatrix::hamming(2);
    let cfg = OptimizerConfig::default();
    for target in [0.05, 0.15, 0.25] {
        let tilde = maximize_over_region(&spec, &d, target, &cfg).unwrap();
        let star = maximize_over_hull(&spec.sources, &d, target, &cfg).unwrap();
        let all = maximize_over_simplex(2, &d, target, &cfg).unwrap();
        assert!(star.value <= tilde.value + 1e-9);
        assert!(tilde.value <= all.value + 1e-9);
        assert!((all.value - (1.0 - h2(target))).abs() < 1e-4);
        assert!(is_member(&tilde.argmax, &spec).unwrap().satisfied);
    }
}

#[test]
fn ternary_argmax_is_feasible_and_methods_agree() {
    let spec = RegionSpec::new(
        switchrd::probcore::SourceList::from_vecs(vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.6, 0.2]])
            .unwrap(),
        0.0,
    )
    .unwrap();
    let d = DistortionMatrix::hamming(3);
    let grid = maximize_over_region(&spec, &d, 0.2, &OptimizerConfig::default()).unwrap();
    let multi = maximize_over_region(
        &spec,
        &d,
        0.2,
        &OptimizerConfig {
            method: Some(Method::Multistart),
            starts: 12,
            ..OptimizerConfig::default()
        },
    )
    .unwrap();
    assert_eq!(grid.method, Method::Grid);
    assert_eq!(multi.method, Method::Multistart);
    for r in [&grid, &multi] {
        assert!(is_member(&r.argmax, &spec).unwrap().satisfied);
    }
    assert!(
        (grid.value - multi.value).abs() < 1e-3,
        "{} vs {}",
        grid.value,
        multi.value
    );
}

#[test]
fn optimizer_is_seed_deterministic() {
    let spec = RegionSpec::exact(random_sources(&mut rng(5), 4, 2));
    let d = DistortionMatrix::hamming(4);
    let cfg = OptimizerConfig {
        seed: 11,
        ..OptimizerConfig::default()
    };
    let a = maximize_over_region(&spec, &d, 0.3, &cfg).unwrap();
    let b = maximize_over_region(&spec, &d, 0.3, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sampled_subset_frequencies_match_q() {
    let sources = random_sources(&mut rng(2), 3, 2);
    let trials = 100_000;
    let real = sample_sources(&sources, trials, 9).unwrap();
    let table = SubsetTable::new(&sources).unwrap();
    for mask in 1..8u32 {
        let v = SymbolSubset::from_mask(mask);
        let hits = (0..trials)
            .filter(|&k| real.iter().all(|row| v.contains(row[k])))
            .count() as f64
            / trials as f64;
        let q = q_of_subset(&sources, v).unwrap();
        assert!((q - table.q(v)).abs() < 1e-12);
        let se = (q * (1.0 - q) / trials as f64).sqrt().max(1e-6);
        assert!((hits - q).abs() <= 4.0 * se, "V={v}: {hits} vs {q}");
    }
}

#[test]
fn simulated_type_tracks_the_rule() {
    let sources = binary_example();
    let spec = RegionSpec::exact(sources.clone());
    let target = Distribution::new(vec![0.6, 0.4]).unwrap();
    let rule = synthesize_rule(&target, &sources, 1e-9).unwrap();
    let rep = simulate_game(
        &spec,
        &rule,
        None,
        &DistortionMatrix::hamming(2),
        100,
        2000,
        4,
    )
    .unwrap();
    assert!(rep.empirical_type.l1_distance(&target) < 0.02);
    let again = simulate_game(
        &spec,
        &rule,
        None,
        &DistortionMatrix::hamming(2),
        100,
        2000,
        4,
    )
    .unwrap();
    assert_eq!(rep, again);
    let other = simulate_game(
        &spec,
        &rule,
        None,
        &DistortionMatrix::hamming(2),
        100,
        2000,
        5,
    )
    .unwrap();
    assert_ne!(rep.empirical_type, other.empirical_type);
}

#[test]
fn covering_codebook_covers_and_bounds_the_payoff() {
    let sources = binary_example();
    let spec = RegionSpec::new(sources.clone(), 0.05).unwrap();
    let d = DistortionMatrix::hamming(2);
    let n = 8;
    let book = build_covering_codebook(&spec, &d, 0.15, n).unwrap();
    for x in strings_in_region(&spec, n).unwrap() {
        assert!(distortion_to_codebook(&x, &book, &d).unwrap() <= 0.15 + 1e-12);
    }
    assert_eq!(Codebook::from_text(&book.to_text()).unwrap(), book);

    let rule =
        synthesize_rule(&Distribution::new(vec![0.5, 0.5]).unwrap(), &sources, 1e-9).unwrap();
    let rep = simulate_game(&spec, &rule, Some(&book), &d, n, 4000, 1).unwrap();
    let mean = rep.mean_distortion.unwrap();
    let se = rep.distortion_stderr.unwrap();
    assert!(mean <= 0.15 + d.max_entry() * rep.out_of_region + 4.0 * se);
}

#[test]
fn out_of_region_rate_respects_the_converse_bound() {
    let sources = binary_example();
    let delta = 0.25;
    let spec = RegionSpec::new(sources.clone(), delta).unwrap();
    let rule = synthesize_rule(
        &Distribution::new(vec![0.55, 0.45]).unwrap(),
        &sources,
        1e-9,
    )
    .unwrap();
    let d = DistortionMatrix::hamming(2);
    for n in [20, 200] {
        let rep = simulate_game(&spec, &rule, None, &d, n, 5000, 3).unwrap();
        let bound = converse_bound(n, delta, 2).unwrap();
        assert!(rep.out_of_region <= bound + 4.0 * rep.out_of_region_stderr + 1e-12);
    }
    assert!(converse_bound(2000, delta, 2).unwrap() < 1e-30);
    assert!(converse_bound(5, delta, 2).unwrap() >= 1.0);
}

#[test]
fn best_response_dominates_memoryless_rules() {
    let mut r = rng(21);
    let d = DistortionMatrix::hamming(3);
    for trial in 0..20 {
        let sources = random_sources(&mut r, 3, 2);
        let n = r.gen_range(2..=7);
        let real = sample_sources(&sources, n, trial).unwrap();
        let words: Vec<Vec<usize>> = {
            let mut w: Vec<Vec<usize>> = (0..3)
                .map(|_| (0..n).map(|_| r.gen_range(0..3)).collect())
                .collect();
            w.sort();
            w.dedup();
            w
        };
        let book = Codebook::new(n, words).unwrap();
        let (best, choice) = best_response_distortion(&real, &book, &d).unwrap();
        for (k, &x) in choice.iter().enumerate() {
            assert!(real.iter().any(|row| row[k] == x));
        }
        assert!((distortion_to_codebook(&choice, &book, &d).unwrap() - best).abs() < 1e-12);
        for s in 0..5 {
            let rule = random_rule(&mut r, 3);
            let x = apply_rule(&rule, &real, s).unwrap();
            assert!(distortion_to_codebook(&x, &book, &d).unwrap() <= best + 1e-12);
        }
    }
}

#[test]
fn induced_type_of_synthesized_rules() {
    let mut r = rng(8);
    for _ in 0..30 {
        let sources = random_sources(&mut r, 3, 2);
        let p = Distribution::new(random_dist(&mut r, 3, 0.0)).unwrap();
        let spec = RegionSpec::exact(sources.clone());
        if !is_member(&p, &spec).unwrap().satisfied {
            continue;
        }
        let rule = synthesize_rule(&p, &sources, 1e-9).unwrap();
        let back = induced_distribution(&rule, &sources).unwrap();
        assert!(back.l1_distance(&p) < 1e-8);
        let real = sample_sources(&sources, 50, 1).unwrap();
        let x = apply_rule(&rule, &real, 2).unwrap();
        assert_eq!(type_counts(&x, 3).iter().sum::<usize>(), 50);
    }
}
