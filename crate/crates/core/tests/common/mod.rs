#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use switchrd::probcore::{Distribution, SourceList};
use switchrd::region::all_nonempty_subsets;
use switchrd::strategy::SwitchRule;

pub fn binary_example() -> SourceList {
    SourceList::from_vecs(vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.75, 0.25]]).unwrap()
}

/// Random point of the simplex; each coordinate is zeroed with probability
/// `zero_prob` (at least one stays positive).
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    let keep = rng.gen_range(0..n);
    let w: Vec<f64> = (0..n)
        .map(|i| {
            if i != keep && rng.gen_bool(zero_prob) {
                0.0
            } else {
                -(1.0 - rng.gen::<f64>()).ln()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_sources(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SourceList {
    SourceList::from_vecs((0..m).map(|_| random_dist(rng, n, 0.15)).collect()).unwrap()
}

/// A rule with a random `f(.|V)` on every nonempty subset of the alphabet.
pub fn random_rule(rng: &mut ChaCha8Rng, n: usize) -> SwitchRule {
    let mut rules = BTreeMap::new();
    for v in all_nonempty_subsets(n).unwrap() {
        let members: Vec<usize> = v.symbols().collect();
        let local = random_dist(rng, members.len(), 0.3);
        let mut f = vec![0.0; n];
        for (&i, &x) in members.iter().zip(&local) {
            f[i] = x;
        }
        rules.insert(v, Distribution::new(f).unwrap());
    }
    SwitchRule::new(n, rules).unwrap()
}
