//! Finite-blocklength experiments for the switcher-versus-coder game.
//!
//! Sources are sampled with a counter-style stream per trial, so a run is a
//! pure function of its seed no matter how trials are scheduled.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::probcore::{DistortionMatrix, Distribution, SourceList};
use crate::region::{RegionSpec, SubsetTable};
use crate::strategy::{apply_rule_with, SwitchRule};

/// Largest string space enumerated when building a covering codebook.
pub const MAX_ENUM_STRINGS: usize = 1 << 20;
/// Largest choice product searched by [`best_response_distortion`].
pub const MAX_BEST_RESPONSE: f64 = (1u64 << 22) as f64;
/// Largest codebook for which the best-response search memoizes states.
pub const MEMO_CODEBOOK_LIMIT: usize = 8;
const MAX_COVER_PAIRS: f64 = 4e9;
const TRIAL_CHUNK: usize = 256;

/// An `m x n` block of source outputs, one row per source.
pub type Realizations = Vec<Vec<usize>>;

/// Per-source inverse-CDF tables.
#[derive(Debug, Clone)]
struct Sampler {
    alphabet: usize,
    sources: usize,
    /// One cumulative table per source, or a single table over `X^m`.
    cdfs: Vec<Vec<f64>>,
    joint: bool,
}

impl Sampler {
    fn new(sources: &SourceList) -> Self {
        let cdf = |p: &[f64]| {
            let mut acc = 0.0;
            p.iter()
                .map(|&x| {
                    acc += x;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        match sources {
            SourceList::Independent(srcs) => Self {
                alphabet: sources.alphabet_size(),
                sources: srcs.len(),
                cdfs: srcs.iter().map(|p| cdf(p.probs())).collect(),
                joint: false,
            },
            SourceList::Joint { joint, .. } => Self {
                alphabet: sources.alphabet_size(),
                sources: sources.num_sources(),
                cdfs: vec![cdf(joint)],
                joint: true,
            },
        }
    }

    fn pick(cdf: &[f64], u: f64) -> usize {
        let total = *cdf.last().expect("nonempty");
        let idx = cdf.partition_point(|&c| c <= u * total);
        // Never return a zero-probability tail symbol on rounding.
        let mut idx = idx.min(cdf.len() - 1);
        while idx > 0 && cdf[idx] == cdf[idx - 1] {
            idx -= 1;
        }
        idx
    }

    fn sample(&self, n: usize, rng: &mut impl Rng) -> Realizations {
        if self.joint {
            let mut rows = vec![Vec::with_capacity(n); self.sources];
            for _ in 0..n {
                let idx = Self::pick(&self.cdfs[0], rng.gen());
                for (row, x) in
                    rows.iter_mut()
                        .zip(SourceList::decode_tuple(self.alphabet, self.sources, idx))
                {
                    row.push(x);
                }
            }
            rows
        } else {
            self.cdfs
                .iter()
                .map(|cdf| (0..n).map(|_| Self::pick(cdf, rng.gen())).collect())
                .collect()
        }
    }
}

/// Draws `n` IID columns of source outputs.
pub fn sample_sources(sources: &SourceList, n: usize, seed: u64) -> Result<Realizations> {
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be ≥ 1".into()));
    }
    Ok(Sampler::new(sources).sample(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Symbol counts of a string.
pub fn type_counts(x: &[usize], alphabet: usize) -> Vec<usize> {
    let mut counts = vec![0; alphabet];
    for &s in x {
        counts[s] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    words: Vec<Vec<usize>>,
}

impl Codebook {
    pub fn new(n: usize, words: Vec<Vec<usize>>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidArgument("codebook must not be empty".into()));
        }
        let mut seen = HashSet::with_capacity(words.len());
        for (k, w) in words.iter().enumerate() {
            if w.len() != n {
                return Err(Error::Dimension(format!(
                    "codeword {k} has length {}, expected {n}",
                    w.len()
                )));
            }
            if !seen.insert(w.as_slice()) {
                return Err(Error::InvalidArgument(format!(
                    "codeword {k} is a duplicate"
                )));
            }
        }
        Ok(Self { n, words })
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// `log2 |B| / n`.
    pub fn rate(&self) -> f64 {
        (self.words.len() as f64).log2() / self.n as f64
    }

    /// One codeword per line; digits run together when every symbol is a
    /// single digit, otherwise symbols are space separated.
    pub fn to_text(&self) -> String {
        let compact = self.words.iter().flatten().all(|&s| s < 10);
        let mut out = String::new();
        for w in &self.words {
            let line: Vec<String> = w.iter().map(usize::to_string).collect();
            out.push_str(&line.join(if compact { "" } else { " " }));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut words = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("codebook line {}: bad symbol", lineno + 1));
            let word: Vec<usize> = if line.contains(char::is_whitespace) {
                line.split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            } else {
                line.chars()
                    .map(|c| c.to_digit(10).map(|v| v as usize).ok_or_else(bad))
                    .collect::<Result<_>>()?
            };
            words.push(word);
        }
        let n = words
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Parse("empty codebook".into()))?;
        Self::new(n, words)
    }
}

fn block_distortion(x: &[usize], y: &[usize], d: &DistortionMatrix) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| d.get(a, b)).sum()
}

/// `min_{y in B} (1/n) sum_k d(x_k, y_k)`.
pub fn distortion_to_codebook(x: &[usize], book: &Codebook, d: &DistortionMatrix) -> Result<f64> {
    if x.len() != book.blocklength() {
        return Err(Error::Dimension(format!(
            "string has length {}, codebook blocklength is {}",
            x.len(),
            book.blocklength()
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let best = book
        .words()
        .iter()
        .map(|y| block_distortion(x, y, d))
        .fold(f64::INFINITY, f64::min);
    Ok(best / x.len() as f64)
}

/// Every string of `X^n` in lexicographic order.
fn all_strings(alphabet: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    let total = (alphabet as f64).powi(n as i32);
    if total > MAX_ENUM_STRINGS as f64 {
        return Err(Error::GuardExceeded {
            what: "|alphabet|^n",
            value: total,
            limit: MAX_ENUM_STRINGS as f64,
        });
    }
    let total = total as usize;
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut s = vec![0; n];
        for slot in s.iter_mut().rev() {
            *slot = idx % alphabet;
            idx /= alphabet;
        }
        out.push(s);
    }
    Ok(out)
}

/// Strings of length `n` whose type lies in the region.
pub fn strings_in_region(spec: &RegionSpec, n: usize) -> Result<Vec<Vec<usize>>> {
    let k = spec.alphabet_size();
    let table = SubsetTable::new(&spec.sources)?;
    let mut verdicts: HashMap<Vec<usize>, bool> = HashMap::new();
    Ok(all_strings(k, n)?
        .into_iter()
        .filter(|x| {
            let counts = type_counts(x, k);
            *verdicts.entry(counts).or_insert_with_key(|c| {
                let t: Vec<f64> = c.iter().map(|&v| v as f64 / n as f64).collect();
                table.check(&t, spec.delta).satisfied
            })
        })
        .collect())
}

/// Greedy set cover of every string with type in the region by distortion
/// balls of radius `target`.
///
/// Candidate codewords are all of `Y^n` when that space is enumerable, and
/// otherwise the letter-by-letter nearest reproductions of the strings to be
/// covered. Codewords are kept in insertion order; ties go to the smallest
/// candidate index.
pub fn build_covering_codebook(
    spec: &RegionSpec,
    d: &DistortionMatrix,
    target: f64,
    n: usize,
) -> Result<Codebook> {
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be ≥ 1".into()));
    }
    if d.x_size() != spec.alphabet_size() {
        return Err(Error::Dimension(format!(
            "distortion matrix has {} rows, alphabet has {}",
            d.x_size(),
            spec.alphabet_size()
        )));
    }
    let strings = strings_in_region(spec, n)?;
    let ny = d.y_size();
    let candidates = if (ny as f64).powi(n as i32) <= MAX_ENUM_STRINGS as f64 {
        all_strings(ny, n)?
    } else {
        let mut seen = HashSet::new();
        strings
            .iter()
            .map(|x| {
                x.iter()
                    .map(|&a| {
                        (0..ny)
                            .min_by(|&u, &v| d.get(a, u).total_cmp(&d.get(a, v)))
                            .expect("nonempty")
                    })
                    .collect::<Vec<usize>>()
            })
            .filter(|y| seen.insert(y.clone()))
            .collect()
    };
    if strings.is_empty() {
        return Codebook::new(n, vec![candidates[0].clone()]);
    }
    let pairs = strings.len() as f64 * candidates.len() as f64;
    if pairs > MAX_COVER_PAIRS {
        return Err(Error::GuardExceeded {
            what: "covering pairs",
            value: pairs,
            limit: MAX_COVER_PAIRS,
        });
    }
    let budget = target * n as f64 + 1e-9;
    let covers: Vec<Vec<u32>> = candidates
        .par_iter()
        .map(|y| {
            strings
                .iter()
                .enumerate()
                .filter(|(_, x)| block_distortion(x, y, d) <= budget)
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect();

    let mut coverable = vec![false; strings.len()];
    for c in &covers {
        for &i in c {
            coverable[i as usize] = true;
        }
    }
    if let Some(i) = coverable.iter().position(|&c| !c) {
        return Err(Error::Infeasible(format!(
            "string {:?} is farther than {target} from every candidate codeword",
            strings[i]
        )));
    }

    let mut covered = vec![false; strings.len()];
    let mut remaining = strings.len();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = covers
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(k, c)| (c.len(), Reverse(k)))
        .collect();
    let mut words = Vec::new();
    while remaining > 0 {
        let (stale, Reverse(k)) = heap.pop().expect("every string is coverable");
        let fresh = covers[k].iter().filter(|&&i| !covered[i as usize]).count();
        if fresh == 0 {
            continue;
        }
        if fresh < stale {
            heap.push((fresh, Reverse(k)));
            continue;
        }
        for &i in &covers[k] {
            if !covered[i as usize] {
                covered[i as usize] = true;
                remaining -= 1;
            }
        }
        words.push(candidates[k].clone());
    }
    Codebook::new(n, words)
}

/// The switcher's best non-causal reply to a fixed codebook: the selection
/// from the available sets that maximizes `d_n(x; B)`, lexicographically
/// smallest among ties.
pub fn best_response_distortion(
    realizations: &[Vec<usize>],
    book: &Codebook,
    d: &DistortionMatrix,
) -> Result<(f64, Vec<usize>)> {
    let n = book.blocklength();
    if realizations.is_empty() || realizations.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!(
            "realizations must be a nonempty m x {n} block"
        )));
    }
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|k| {
            let mut v: Vec<usize> = realizations.iter().map(|r| r[k]).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let product: f64 = sets.iter().map(|s| s.len() as f64).product();
    if product > MAX_BEST_RESPONSE {
        return Err(Error::GuardExceeded {
            what: "choice product",
            value: product,
            limit: MAX_BEST_RESPONSE,
        });
    }
    let mut search = BestResponse {
        n,
        sets: &sets,
        words: book.words(),
        d,
        memo: (book.len() <= MEMO_CODEBOOK_LIMIT).then(HashMap::new),
    };
    let partial = vec![0.0; book.len()];
    let (value, mut choice) = search.run(0, &partial);
    choice.reverse();
    Ok((value, choice))
}

/// Time index and the per-codeword partial sums, bitwise.
type MemoKey = (usize, Vec<u64>);

struct BestResponse<'a> {
    n: usize,
    sets: &'a [Vec<usize>],
    words: &'a [Vec<usize>],
    d: &'a DistortionMatrix,
    memo: Option<HashMap<MemoKey, (f64, Vec<usize>)>>,
}

impl BestResponse<'_> {
    /// Best value over completions from time `k`; the suffix is returned
    /// reversed so it can be extended by pushing.
    fn run(&mut self, k: usize, partial: &[f64]) -> (f64, Vec<usize>) {
        if k == self.n {
            let best = partial.iter().copied().fold(f64::INFINITY, f64::min);
            return (best / self.n as f64, Vec::with_capacity(self.n));
        }
        let key = self
            .memo
            .as_ref()
            .map(|_| (k, partial.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()));
        if let (Some(memo), Some(key)) = (&self.memo, &key) {
            if let Some(hit) = memo.get(key) {
                return hit.clone();
            }
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut next = partial.to_vec();
        for &x in &self.sets[k] {
            for (b, w) in self.words.iter().enumerate() {
                next[b] = partial[b] + self.d.get(x, w[k]);
            }
            let (v, mut suffix) = self.run(k + 1, &next);
            if best.as_ref().is_none_or(|(bv, _)| v > bv + 1e-12) {
                suffix.push(x);
                best = Some((v, suffix));
            }
        }
        let best = best.expect("available sets are nonempty");
        if let (Some(memo), Some(key)) = (&mut self.memo, key) {
            memo.insert(key, best.clone());
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub empirical_type: Distribution,
    /// Mean of `d_n(x; B)`; absent when no codebook was supplied.
    pub mean_distortion: Option<f64>,
    pub distortion_stderr: Option<f64>,
    /// Fraction of blocks whose type falls outside the region.
    pub out_of_region: f64,
    pub out_of_region_stderr: f64,
    pub trials: usize,
    pub n: usize,
    pub seed: u64,
}

impl SimReport {
    pub const CSV_HEADER: &'static str =
        "n,trials,seed,mean_distortion,distortion_stderr,out_of_region,out_of_region_stderr,empirical_type";

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), g12);
        let ty: Vec<String> = self
            .empirical_type
            .probs()
            .iter()
            .map(|&x| g12(x))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "trials={}", self.trials);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "mean_distortion={}", opt(self.mean_distortion));
        let _ = writeln!(out, "distortion_stderr={}", opt(self.distortion_stderr));
        let _ = writeln!(out, "out_of_region={}", g12(self.out_of_region));
        let _ = writeln!(
            out,
            "out_of_region_stderr={}",
            g12(self.out_of_region_stderr)
        );
        let _ = writeln!(out, "empirical_type={}", ty.join(" "));
        out
    }

    /// One CSV row matching [`SimReport::CSV_HEADER`]; the type is space separated.
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), g12);
        let ty: Vec<String> = self
            .empirical_type
            .probs()
            .iter()
            .map(|&x| g12(x))
            .collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.trials,
            self.seed,
            opt(self.mean_distortion),
            opt(self.distortion_stderr),
            g12(self.out_of_region),
            g12(self.out_of_region_stderr),
            ty.join(" ")
        )
    }
}

#[derive(Default)]
struct Tally {
    counts: Vec<u64>,
    outside: u64,
    dist: Vec<f64>,
}

/// Plays `trials` independent blocks: sample the sources, let `rule` pick the
/// output, and score it against `book` when one is given.
#[allow(clippy::too_many_arguments)]
pub fn simulate_game(
    spec: &RegionSpec,
    rule: &SwitchRule,
    book: Option<&Codebook>,
    d: &DistortionMatrix,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SimReport> {
    let k = spec.alphabet_size();
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n and trials must be ≥ 1".into()));
    }
    if rule.alphabet_size() != k || d.x_size() != k {
        return Err(Error::Dimension(format!(
            "rule ({}) and distortion matrix ({}) must match the alphabet ({k})",
            rule.alphabet_size(),
            d.x_size()
        )));
    }
    if let Some(b) = book {
        if b.blocklength() != n {
            return Err(Error::Dimension(format!(
                "codebook blocklength {} differs from n = {n}",
                b.blocklength()
            )));
        }
    }
    let table = SubsetTable::new(&spec.sources)?;
    rule.check_covers(&table)?;
    let sampler = Sampler::new(&spec.sources);

    let chunks: Vec<Result<Tally>> = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut t = Tally {
                counts: vec![0; k],
                ..Tally::default()
            };
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let mut rng = trial_rng(seed, trial as u64);
                let real = sampler.sample(n, &mut rng);
                let x = apply_rule_with(rule, &real, &mut rng)?;
                let counts = type_counts(&x, k);
                for (acc, &c) in t.counts.iter_mut().zip(&counts) {
                    *acc += c as u64;
                }
                let ty: Vec<f64> = counts.iter().map(|&v| v as f64 / n as f64).collect();
                if !table.check(&ty, spec.delta).satisfied {
                    t.outside += 1;
                }
                if let Some(b) = book {
                    t.dist.push(distortion_to_codebook(&x, b, d)?);
                }
            }
            Ok(t)
        })
        .collect();

    let mut counts = vec![0u64; k];
    let mut outside = 0u64;
    let mut dists = Vec::with_capacity(if book.is_some() { trials } else { 0 });
    for chunk in chunks {
        let t = chunk?;
        counts.iter_mut().zip(&t.counts).for_each(|(a, b)| *a += b);
        outside += t.outside;
        dists.extend(t.dist);
    }
    let total = (n * trials) as f64;
    let empirical_type = Distribution::new(counts.iter().map(|&c| c as f64 / total).collect())?;
    let tf = trials as f64;
    let (mean_distortion, distortion_stderr) = if book.is_some() {
        let mean = dists.iter().sum::<f64>() / tf;
        let var = if trials > 1 {
            dists.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (tf - 1.0)
        } else {
            0.0
        };
        (Some(mean), Some((var / tf).sqrt()))
    } else {
        (None, None)
    };
    let frac = outside as f64 / tf;
    Ok(SimReport {
        empirical_type,
        mean_distortion,
        distortion_stderr,
        out_of_region: frac,
        out_of_region_stderr: (frac * (1.0 - frac) / tf).sqrt(),
        trials,
        n,
        seed,
    })
}

/// Upper bound on the probability that a block's type leaves `C_delta`:
/// `(n+1)^|X| 2^(-n delta / ln 2)`. Values of 1 or more are vacuous.
pub fn converse_bound(n: usize, delta: f64, alphabet: usize) -> Result<f64> {
    if n == 0 || !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "converse bound needs n ≥ 1 and delta > 0".into(),
        ));
    }
    let nf = n as f64;
    let exponent = delta / std::f64::consts::LN_2 - alphabet as f64 * (nf + 1.0).log2() / nf;
    Ok((-nf * exponent).exp2())
}
