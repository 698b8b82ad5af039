//! Memoryless conditional switch rules `f(.|V)`.
//!
//! When the available set at a time step is `V`, the switcher draws its
//! output from `f(.|V)`, a distribution supported on `V`. A rule induces the
//! IID output distribution `sum_V beta(V) f(.|V)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::fmt::g12;
use crate::probcore::{Distribution, SourceList, SIMPLEX_TOL};
use crate::region::{SubsetTable, SymbolSubset};

/// Residual capacity below which a flow edge counts as saturated.
pub const FLOW_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRule {
    alphabet: usize,
    rules: BTreeMap<SymbolSubset, Distribution>,
}

impl SwitchRule {
    /// Checks that every `f(.|V)` lives on the alphabet and vanishes off `V`.
    pub fn new(alphabet: usize, rules: BTreeMap<SymbolSubset, Distribution>) -> Result<Self> {
        let full = SymbolSubset::full(alphabet);
        for (v, f) in &rules {
            if v.is_empty() || !v.is_subset_of(full) {
                return Err(Error::InvalidArgument(format!(
                    "rule subset {v} is not a nonempty subset of the alphabet"
                )));
            }
            if f.len() != alphabet {
                return Err(Error::Dimension(format!(
                    "rule for {v} has {} entries, alphabet has {alphabet}",
                    f.len()
                )));
            }
            let off_support: f64 = (0..alphabet)
                .filter(|&i| !v.contains(i))
                .map(|i| f[i])
                .sum();
            if off_support > SIMPLEX_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "rule for {v} puts mass {off_support} outside the subset"
                )));
            }
        }
        Ok(Self { alphabet, rules })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn get(&self, v: SymbolSubset) -> Option<&Distribution> {
        self.rules.get(&v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (SymbolSubset, &Distribution)> {
        self.rules.iter().map(|(v, f)| (*v, f))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Whether the rule draws no randomness.
    pub fn is_deterministic(&self) -> bool {
        self.rules
            .values()
            .all(|f| f.probs().iter().all(|&x| x == 0.0 || x == 1.0))
    }

    /// Errors on the first subset with positive `beta` that has no entry.
    pub fn check_covers(&self, table: &SubsetTable) -> Result<()> {
        match table.support().find(|(v, _)| !self.rules.contains_key(v)) {
            Some((v, _)) => Err(Error::MissingRule(v)),
            None => Ok(()),
        }
    }

    /// One line per subset: `mask = [f(0|V), .., f(n-1|V)]  # {members}`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# switch rule over {} symbols\n", self.alphabet);
        for (v, f) in &self.rules {
            let vals: Vec<String> = f.probs().iter().map(|&x| g12(x)).collect();
            let _ = writeln!(out, "{} = [{}]  # {}", v.mask(), vals.join(", "), v);
        }
        out
    }

    /// Parses [`SwitchRule::to_text`] output. Probabilities may be fractions.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rules = BTreeMap::new();
        let mut alphabet = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse(format!("rule line {}: {msg}", lineno + 1));
            let (mask, vals) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `mask = [..]`"))?;
            let mask: u32 = mask.trim().parse().map_err(|_| bad("bad subset mask"))?;
            let vals = vals
                .trim()
                .strip_prefix('[')
                .and_then(|v| v.strip_suffix(']'))
                .ok_or_else(|| bad("expected a bracketed vector"))?;
            let probs = vals
                .split(',')
                .map(|x| {
                    crate::region::exact::parse_rational(x)
                        .map(|r| crate::region::exact::to_f64(&r))
                })
                .collect::<Result<Vec<f64>>>()?;
            if *alphabet.get_or_insert(probs.len()) != probs.len() {
                return Err(bad("vector length differs from previous lines"));
            }
            let v = SymbolSubset::from_mask(mask);
            if rules.insert(v, Distribution::new(probs)?).is_some() {
                return Err(bad("duplicate subset"));
            }
        }
        let alphabet = alphabet.ok_or_else(|| Error::Parse("empty rule file".into()))?;
        Self::new(alphabet, rules)
    }
}

/// `sum_V beta(V) f(.|V)`.
pub fn induced_distribution(rule: &SwitchRule, sources: &SourceList) -> Result<Distribution> {
    if rule.alphabet_size() != sources.alphabet_size() {
        return Err(Error::Dimension(format!(
            "rule is over {} symbols, sources over {}",
            rule.alphabet_size(),
            sources.alphabet_size()
        )));
    }
    let table = SubsetTable::new(sources)?;
    induced_from_table(rule, &table)
}

pub(crate) fn induced_from_table(rule: &SwitchRule, table: &SubsetTable) -> Result<Distribution> {
    let mut p = vec![0.0; table.alphabet_size()];
    for (v, beta) in table.support() {
        let f = rule.get(v).ok_or(Error::MissingRule(v))?;
        for (pi, &fi) in p.iter_mut().zip(f.probs()) {
            *pi += beta * fi;
        }
    }
    Distribution::new(p)
}

/// Rule that always emits the available symbol ranked highest by `rank`.
pub fn greedy_rule_by_rank(sources: &SourceList, rank: &[f64]) -> Result<SwitchRule> {
    let n = sources.alphabet_size();
    if rank.len() != n {
        return Err(Error::Dimension(format!(
            "rank has {} entries, alphabet has {n}",
            rank.len()
        )));
    }
    let table = SubsetTable::new(sources)?;
    let mut rules = BTreeMap::new();
    for (v, _) in table.support() {
        // Ties go to the larger symbol.
        let pick = v
            .symbols()
            .max_by(|&a, &b| rank[a].total_cmp(&rank[b]).then(a.cmp(&b)))
            .expect("support subsets are nonempty");
        rules.insert(v, Distribution::point(n, pick)?);
    }
    SwitchRule::new(n, rules)
}

/// Always emit the largest available symbol.
pub fn greedy_max_rule(sources: &SourceList) -> Result<SwitchRule> {
    let n = sources.alphabet_size();
    let rank: Vec<f64> = (0..n).map(|i| i as f64).collect();
    greedy_rule_by_rank(sources, &rank)
}

/// The attainable distribution minimizing `sum_i weights(i) p(i)`.
///
/// Emitting the cheapest available symbol is optimal, so the minimizer is
/// induced by a greedy rule.
pub fn minimize_linear(sources: &SourceList, weights: &[f64]) -> Result<Distribution> {
    let rank: Vec<f64> = weights.iter().map(|w| -w).collect();
    induced_distribution(&greedy_rule_by_rank(sources, &rank)?, sources)
}

/// An available set, its mass and where that mass goes.
type Outflow = (SymbolSubset, f64, Vec<f64>);
/// A violated subset with both sides of its constraint.
type Cut = (SymbolSubset, f64, f64);

/// Solves the transportation problem from available sets (supply `beta(V)`)
/// to symbols (demand `target(i)`). Returns per-subset outflows, or the
/// violated cut.
fn transport(target: &[f64], table: &SubsetTable) -> std::result::Result<Vec<Outflow>, Cut> {
    let n = table.alphabet_size();
    let support: Vec<(SymbolSubset, f64)> = table.support().collect();
    let source = 0;
    let sink = 1;
    let first_set = 2;
    let first_symbol = first_set + support.len();
    let mut g = FlowNetwork::new(first_symbol + n + 1, FLOW_TOL * 1e-3);
    let mut set_edges = Vec::with_capacity(support.len());
    for (k, &(v, beta)) in support.iter().enumerate() {
        g.add_edge(source, first_set + k, beta);
        let edges: Vec<(usize, usize)> = v
            .symbols()
            .map(|i| (i, g.add_edge(first_set + k, first_symbol + i, 2.0)))
            .collect();
        set_edges.push(edges);
    }
    for (i, &t) in target.iter().enumerate() {
        g.add_edge(first_symbol + i, sink, t);
    }
    let supply: f64 = support.iter().map(|(_, b)| b).sum();
    let flow = g.max_flow(source, sink);
    if flow < supply - FLOW_TOL {
        let side = g.reachable(source);
        let cut = SymbolSubset::from_symbols((0..n).filter(|&i| side[first_symbol + i]));
        return Err((cut, cut.sum_of(target), table.q(cut)));
    }
    Ok(support
        .iter()
        .zip(set_edges)
        .map(|(&(v, beta), edges)| {
            let mut out = vec![0.0; n];
            for (i, e) in edges {
                out[i] = g.flow_on(e).max(0.0);
            }
            (v, beta, out)
        })
        .collect())
}

/// Builds a rule whose induced distribution is `target`, or reports a subset
/// whose constraint `target` violates.
pub fn synthesize_rule(
    target: &Distribution,
    sources: &SourceList,
    tol: f64,
) -> Result<SwitchRule> {
    let n = sources.alphabet_size();
    if target.len() != n {
        return Err(Error::Dimension(format!(
            "target has {} symbols, sources have {n}",
            target.len()
        )));
    }
    let table = SubsetTable::new(sources)?;
    let flows = transport(target.probs(), &table)
        .map_err(|(subset, lhs, rhs)| Error::NotAttainable { subset, lhs, rhs })?;
    let mut rules = BTreeMap::new();
    for (v, _beta, out) in flows {
        let total: f64 = out.iter().sum();
        let f = if total > 0.0 {
            out.into_iter().map(|x| x / total).collect()
        } else {
            // Supply too small to carry flow; any choice is within tolerance.
            Distribution::point(n, v.max_symbol().expect("nonempty"))?.into_vec()
        };
        rules.insert(v, Distribution::new(f)?);
    }
    let rule = SwitchRule::new(n, rules)?;
    let got = induced_from_table(&rule, &table)?;
    let err = got.l1_distance(target);
    if err > tol {
        return Err(Error::Infeasible(format!(
            "synthesized rule misses the target by {err} in L1 (tolerance {tol})"
        )));
    }
    Ok(rule)
}

/// Moves `p` into the attainable region: route as much of `p` as the
/// transportation problem allows, then send each subset's leftover supply to
/// its member with the largest `p`.
pub fn repair_into_region(p: &[f64], sources: &SourceList) -> Result<Distribution> {
    let table = SubsetTable::new(sources)?;
    let n = table.alphabet_size();
    // Max-flow with the demands capped at p; the leftover is always placeable.
    let support: Vec<(SymbolSubset, f64)> = table.support().collect();
    let mut g = FlowNetwork::new(2 + support.len() + n, FLOW_TOL * 1e-3);
    let first_symbol = 2 + support.len();
    let mut edges = Vec::new();
    for (k, &(v, beta)) in support.iter().enumerate() {
        g.add_edge(0, 2 + k, beta);
        for i in v.symbols() {
            edges.push((k, i, g.add_edge(2 + k, first_symbol + i, 2.0)));
        }
    }
    for (i, &t) in p.iter().enumerate() {
        g.add_edge(first_symbol + i, 1, t.max(0.0));
    }
    g.max_flow(0, 1);
    let mut out = vec![0.0; n];
    let mut sent = vec![0.0; support.len()];
    for (k, i, e) in edges {
        let f = g.flow_on(e).max(0.0);
        out[i] += f;
        sent[k] += f;
    }
    for (k, &(v, beta)) in support.iter().enumerate() {
        let left = (beta - sent[k]).max(0.0);
        if left > 0.0 {
            let pick = v
                .symbols()
                .max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a)))
                .expect("nonempty");
            out[pick] += left;
        }
    }
    let total: f64 = out.iter().sum();
    Distribution::new(out.into_iter().map(|x| x / total).collect())
}

/// Column `k`'s available set.
pub fn available_set(realizations: &[Vec<usize>], k: usize) -> SymbolSubset {
    SymbolSubset::from_symbols(realizations.iter().map(|row| row[k]))
}

pub(crate) fn draw(f: &Distribution, rng: &mut impl Rng) -> usize {
    let probs = f.probs();
    if let Some(i) = probs.iter().position(|&x| x == 1.0) {
        return i;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in probs.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub(crate) fn apply_rule_with(
    rule: &SwitchRule,
    realizations: &[Vec<usize>],
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let n = realizations.first().map_or(0, Vec::len);
    if realizations.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("realization rows differ in length".into()));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = available_set(realizations, k);
        let x = if v.len() == 1 {
            v.max_symbol().expect("nonempty")
        } else {
            let f = rule.get(v).ok_or(Error::MissingRule(v))?;
            draw(f, rng)
        };
        out.push(x);
    }
    Ok(out)
}

/// Runs the rule over an `m x n` block of source outputs. Every emitted
/// symbol was produced by some source at that time.
pub fn apply_rule(rule: &SwitchRule, realizations: &[Vec<usize>], seed: u64) -> Result<Vec<usize>> {
    apply_rule_with(rule, realizations, &mut ChaCha8Rng::seed_from_u64(seed))
}
