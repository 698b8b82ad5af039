//! The region of IID distributions a cheating switcher can mimic.
//!
//! For every nonempty subset `V` of the source alphabet, the switcher is
//! forced to emit a symbol of `V` whenever every source lands in `V`, which
//! happens with probability `Q(V)`. A distribution is attainable iff
//! `sum_{i in V} p(i) >= Q(V)` for all `V`. The relaxed region `C_delta`
//! subtracts `delta` from every right-hand side.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::Num;

use crate::error::{Error, Result};
use crate::probcore::{Distribution, SourceList};

/// Alphabets larger than this are refused by subset enumeration.
pub const MAX_ENUM_ALPHABET: usize = 20;

/// Slack on constraint comparisons so exact boundary points stay members.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// A set of source symbols stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SymbolSubset(u32);

impl SymbolSubset {
    pub const EMPTY: Self = Self(0);

    pub fn from_mask(mask: u32) -> Self {
        Self(mask)
    }

    pub fn from_symbols<I: IntoIterator<Item = usize>>(symbols: I) -> Self {
        Self(symbols.into_iter().fold(0, |m, s| m | (1 << s)))
    }

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        Self(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn singleton(symbol: usize) -> Self {
        Self(1 << symbol)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn contains(self, symbol: usize) -> bool {
        symbol < 32 && self.0 & (1 << symbol) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, symbol: usize) -> Self {
        Self(self.0 | (1 << symbol))
    }

    /// Largest member, if any.
    pub fn max_symbol(self) -> Option<usize> {
        (self.0 != 0).then(|| 31 - self.0.leading_zeros() as usize)
    }

    /// Members in increasing order.
    pub fn symbols(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |&i| mask & (1 << i) != 0)
    }

    /// Nonempty subsets of `self` in increasing bitmask order.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = SymbolSubset> {
        let v = self.0;
        let mut sub = 0u32;
        std::iter::from_fn(move || {
            // Next submask above `sub`: (sub - v) & v walks submasks upwards.
            sub = sub.wrapping_sub(v) & v;
            (sub != 0).then_some(SymbolSubset(sub))
        })
    }

    /// Sum of `values[i]` over members.
    pub fn sum_of(self, values: &[f64]) -> f64 {
        self.symbols()
            .take_while(|&i| i < values.len())
            .map(|i| values[i])
            .sum()
    }
}

impl fmt::Display for SymbolSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.symbols().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Nonempty subsets of an alphabet of size `n`, in bitmask order.
pub fn all_nonempty_subsets(n: usize) -> Result<impl Iterator<Item = SymbolSubset>> {
    check_alphabet(n)?;
    Ok((1..=SymbolSubset::full(n).mask()).map(SymbolSubset))
}

fn check_alphabet(n: usize) -> Result<()> {
    if n > MAX_ENUM_ALPHABET {
        return Err(Error::GuardExceeded {
            what: "|X|",
            value: n as f64,
            limit: MAX_ENUM_ALPHABET as f64,
        });
    }
    Ok(())
}

fn check_subset(sources: &SourceList, v: SymbolSubset) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("subset must be nonempty".into()));
    }
    if !v.is_subset_of(SymbolSubset::full(sources.alphabet_size())) {
        return Err(Error::InvalidArgument(format!(
            "subset {v} is outside the alphabet of size {}",
            sources.alphabet_size()
        )));
    }
    Ok(())
}

/// `C` (delta = 0) or its relaxation `C_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub sources: SourceList,
    pub delta: f64,
}

impl RegionSpec {
    pub fn new(sources: SourceList, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be finite and ≥ 0, got {delta}"
            )));
        }
        Ok(Self { sources, delta })
    }

    /// The unrelaxed region `C`.
    pub fn exact(sources: SourceList) -> Self {
        Self {
            sources,
            delta: 0.0,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.sources.alphabet_size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subset: SymbolSubset,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

/// `Q(V)` for independent sources given as raw vectors over any numeric field.
pub fn q_independent<T: Num + Clone>(sources: &[Vec<T>], v: SymbolSubset) -> T {
    sources.iter().fold(T::one(), |acc, p| {
        let mass = v
            .symbols()
            .take_while(|&i| i < p.len())
            .fold(T::zero(), |s, i| s + p[i].clone());
        acc * mass
    })
}

/// Inclusion–exclusion `sum_{U ⊆ V, U ≠ ∅} (-1)^{|V|-|U|} q(U)`.
pub fn inclusion_exclusion<T, F>(v: SymbolSubset, mut q: F) -> T
where
    T: Num + Clone,
    F: FnMut(SymbolSubset) -> T,
{
    let mut pos = T::zero();
    let mut neg = T::zero();
    for u in v.nonempty_subsets() {
        if (v.len() - u.len()).is_multiple_of(2) {
            pos = pos + q(u);
        } else {
            neg = neg + q(u);
        }
    }
    pos - neg
}

/// Probability that every source emits a symbol of `V` at one time step.
pub fn q_of_subset(sources: &SourceList, v: SymbolSubset) -> Result<f64> {
    check_subset(sources, v)?;
    Ok(match sources {
        SourceList::Independent(srcs) => srcs.iter().map(|p| v.sum_of(p.probs())).product(),
        SourceList::Joint {
            alphabet,
            sources: m,
            joint,
        } => joint
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .filter(|(idx, _)| {
                SourceList::decode_tuple(*alphabet, *m, *idx)
                    .into_iter()
                    .all(|x| v.contains(x))
            })
            .map(|(_, &w)| w)
            .sum(),
    })
}

/// Probability that the set of symbols available to the switcher is exactly `V`.
pub fn beta_of_subset(sources: &SourceList, v: SymbolSubset) -> Result<f64> {
    check_subset(sources, v)?;
    if v.len() > sources.num_sources() {
        return Ok(0.0);
    }
    let beta = inclusion_exclusion(v, |u| {
        q_of_subset(sources, u).expect("nonempty submask of a valid subset")
    });
    Ok(beta.max(0.0))
}

/// `Q` and `beta` for every subset of the alphabet, indexed by bitmask
/// (index 0, the empty set, holds 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable {
    alphabet: usize,
    q: Vec<f64>,
    beta: Vec<f64>,
}

impl SubsetTable {
    pub fn new(sources: &SourceList) -> Result<Self> {
        let n = sources.alphabet_size();
        check_alphabet(n)?;
        let size = 1usize << n;
        let m = sources.num_sources();
        let mut q = vec![0.0; size];
        match sources {
            SourceList::Independent(srcs) => {
                q.iter_mut().for_each(|v| *v = 1.0);
                let mut sums = vec![0.0; size];
                for p in srcs {
                    for mask in 1..size {
                        let low = mask.trailing_zeros() as usize;
                        sums[mask] = sums[mask & (mask - 1)] + p[low];
                    }
                    for mask in 0..size {
                        q[mask] *= sums[mask];
                    }
                }
                q[0] = 0.0;
            }
            SourceList::Joint {
                alphabet, joint, ..
            } => {
                // Mass of each exact available set, then a subset-sum pass.
                for (idx, &w) in joint.iter().enumerate() {
                    let avail = SourceList::decode_tuple(*alphabet, m, idx)
                        .into_iter()
                        .fold(0usize, |acc, x| acc | (1 << x));
                    q[avail] += w;
                }
                for bit in 0..n {
                    for mask in 0..size {
                        if mask & (1 << bit) != 0 {
                            q[mask] += q[mask ^ (1 << bit)];
                        }
                    }
                }
            }
        }
        let mut beta = vec![0.0; size];
        for (mask, b) in beta.iter_mut().enumerate().skip(1) {
            let v = SymbolSubset(mask as u32);
            if v.len() <= m {
                *b = inclusion_exclusion(v, |u| q[u.mask() as usize]).max(0.0);
            }
        }
        Ok(Self {
            alphabet: n,
            q,
            beta,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn q(&self, v: SymbolSubset) -> f64 {
        self.q[v.mask() as usize]
    }

    pub fn beta(&self, v: SymbolSubset) -> f64 {
        self.beta[v.mask() as usize]
    }

    /// Subsets with positive `beta`, in bitmask order.
    pub fn support(&self) -> impl Iterator<Item = (SymbolSubset, f64)> + '_ {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(mask, &b)| (SymbolSubset(mask as u32), b))
    }

    /// Membership check against the table's `Q` values with slack `delta`.
    pub fn check(&self, p: &[f64], delta: f64) -> ConstraintReport {
        let mut violations = Vec::new();
        for mask in 1..self.q.len() {
            let v = SymbolSubset(mask as u32);
            let lhs = v.sum_of(p);
            let rhs = self.q[mask] - delta;
            if lhs < rhs - CONSTRAINT_TOL {
                violations.push(Violation {
                    subset: v,
                    lhs,
                    rhs,
                });
            }
        }
        ConstraintReport {
            satisfied: violations.is_empty(),
            violations,
        }
    }
}

/// Checks `sum_{i in V} p(i) >= Q(V) - delta` for every nonempty `V`.
pub fn is_member(p: &Distribution, spec: &RegionSpec) -> Result<ConstraintReport> {
    if p.len() != spec.alphabet_size() {
        return Err(Error::Dimension(format!(
            "distribution has {} symbols, sources have {}",
            p.len(),
            spec.alphabet_size()
        )));
    }
    Ok(SubsetTable::new(&spec.sources)?.check(p.probs(), spec.delta))
}

/// Every nonempty subset with its right-hand side `Q(V) - delta`.
pub fn enumerate_constraints(spec: &RegionSpec) -> Result<Vec<(SymbolSubset, f64)>> {
    let table = SubsetTable::new(&spec.sources)?;
    Ok(all_nonempty_subsets(spec.alphabet_size())?
        .map(|v| (v, table.q(v) - spec.delta))
        .collect())
}

/// Range of `p(symbol)` over `C`: `[Q({i}), 1 - Q(X \ {i})]`.
pub fn attainable_interval(sources: &SourceList, symbol: usize) -> Result<(f64, f64)> {
    let n = sources.alphabet_size();
    if symbol >= n {
        return Err(Error::InvalidArgument(format!(
            "symbol {symbol} outside alphabet of size {n}"
        )));
    }
    let lo = q_of_subset(sources, SymbolSubset::singleton(symbol))?;
    let rest = SymbolSubset(SymbolSubset::full(n).mask() & !(1 << symbol));
    let hi = if rest.is_empty() {
        1.0
    } else {
        1.0 - q_of_subset(sources, rest)?
    };
    Ok((lo, hi))
}

/// Mixture weights `lambda` with `sum_l lambda_l p_l = p`, if any exist
/// within residual `tol` (Euclidean norm).
///
/// Searches affinely independent subsets of the sources, which suffices by
/// Carathéodory's theorem.
pub fn hull_weights(p: &Distribution, sources: &SourceList, tol: f64) -> Result<Option<Vec<f64>>> {
    let srcs = sources.marginals();
    if p.len() != sources.alphabet_size() {
        return Err(Error::Dimension(format!(
            "distribution has {} symbols, sources have {}",
            p.len(),
            sources.alphabet_size()
        )));
    }
    let m = srcs.len();
    if m > 16 {
        return Err(Error::GuardExceeded {
            what: "m (hull search)",
            value: m as f64,
            limit: 16.0,
        });
    }
    let n = p.len();
    let target = DVector::from_column_slice(p.probs());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in 1u32..(1 << m) {
        let members: Vec<usize> = (0..m).filter(|l| subset & (1 << l) != 0).collect();
        if members.len() > n {
            continue;
        }
        let base = DVector::from_column_slice(srcs[members[0]].probs());
        let k = members.len() - 1;
        let mut lambda = vec![0.0; m];
        let residual;
        if k == 0 {
            lambda[members[0]] = 1.0;
            residual = (&target - &base).norm();
        } else {
            let mut a = DMatrix::zeros(n, k);
            for (c, &l) in members[1..].iter().enumerate() {
                for i in 0..n {
                    a[(i, c)] = srcs[l][i] - base[i];
                }
            }
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-12 * smax.max(1e-300) {
                continue;
            }
            let rhs = &target - &base;
            let Ok(mu) = svd.solve(&rhs, 1e-14) else {
                continue;
            };
            residual = (&a * &mu - rhs).norm();
            let mut first = 1.0;
            for (c, &l) in members[1..].iter().enumerate() {
                lambda[l] = mu[c];
                first -= mu[c];
            }
            lambda[members[0]] = first;
            if lambda.iter().any(|&x| x < -tol) {
                continue;
            }
        }
        if residual <= tol && best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, lambda.iter().map(|x| x.max(0.0)).collect()));
        }
    }
    Ok(best.map(|(_, w)| w))
}

/// Whether `p` lies in the convex hull of the source distributions.
pub fn hull_member(p: &Distribution, sources: &SourceList, tol: f64) -> Result<bool> {
    Ok(hull_weights(p, sources, tol)?.is_some())
}

/// Exact rational evaluation of `Q`, `beta` and the attainable intervals.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, Zero};

    use super::{inclusion_exclusion, q_independent, SymbolSubset};
    use crate::error::{Error, Result};

    pub type Rational = BigRational;

    /// Parses `"a/b"`, an integer, or a finite decimal like `"0.25"`.
    pub fn parse_rational(text: &str) -> Result<Rational> {
        let t = text.trim();
        let bad = || Error::Parse(format!("not a rational number: {text:?}"));
        if let Some((num, den)) = t.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Ok(Rational::new(num, den));
        }
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (t, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let digits = if digits == "-" || digits == "+" || digits.is_empty() {
            return Err(bad());
        } else {
            digits
        };
        let num: BigInt = digits.parse().map_err(|_| bad())?;
        let scale = exp - frac_part.len() as i32;
        let ten = BigInt::from(10);
        Ok(if scale >= 0 {
            Rational::from_integer(num * num_traits::pow(ten, scale as usize))
        } else {
            Rational::new(num, num_traits::pow(ten, (-scale) as usize))
        })
    }

    pub fn to_f64(r: &Rational) -> f64 {
        use num_traits::ToPrimitive;
        r.to_f64().unwrap_or(f64::NAN)
    }

    /// Independent sources with rational probabilities.
    #[derive(Debug, Clone, PartialEq)]
    pub struct ExactSources {
        sources: Vec<Vec<Rational>>,
    }

    impl ExactSources {
        pub fn new(sources: Vec<Vec<Rational>>) -> Result<Self> {
            let Some(first) = sources.first() else {
                return Err(Error::InvalidArgument(
                    "at least one source is required".into(),
                ));
            };
            let n = first.len();
            if n < 2 {
                return Err(Error::InvalidDistribution(
                    "alphabet must have ≥ 2 symbols".into(),
                ));
            }
            for (l, s) in sources.iter().enumerate() {
                if s.len() != n {
                    return Err(Error::Dimension(format!(
                        "source {l} has {} symbols, expected {n}",
                        s.len()
                    )));
                }
                if s.iter().any(|x| x.is_negative()) {
                    return Err(Error::InvalidDistribution(format!(
                        "source {l} has a negative entry"
                    )));
                }
                let total = s.iter().fold(Rational::zero(), |a, x| a + x);
                if !total.is_one() {
                    return Err(Error::InvalidDistribution(format!(
                        "source {l} sums to {total}, expected exactly 1"
                    )));
                }
            }
            Ok(Self { sources })
        }

        pub fn parse(sources: &[Vec<&str>]) -> Result<Self> {
            Self::new(
                sources
                    .iter()
                    .map(|s| s.iter().map(|x| parse_rational(x)).collect())
                    .collect::<Result<_>>()?,
            )
        }

        pub fn alphabet_size(&self) -> usize {
            self.sources[0].len()
        }

        pub fn num_sources(&self) -> usize {
            self.sources.len()
        }

        pub fn q(&self, v: SymbolSubset) -> Rational {
            q_independent(&self.sources, v)
        }

        pub fn beta(&self, v: SymbolSubset) -> Rational {
            if v.is_empty() || v.len() > self.num_sources() {
                return Rational::zero();
            }
            inclusion_exclusion(v, |u| self.q(u))
        }

        /// `[Q({i}), 1 - Q(X \ {i})]`.
        pub fn attainable_interval(&self, symbol: usize) -> (Rational, Rational) {
            let full = SymbolSubset::full(self.alphabet_size());
            let rest = SymbolSubset::from_mask(full.mask() & !(1 << symbol));
            (
                self.q(SymbolSubset::singleton(symbol)),
                Rational::one() - self.q(rest),
            )
        }

        pub fn to_f64_vecs(&self) -> Vec<Vec<f64>> {
            self.sources
                .iter()
                .map(|s| s.iter().map(to_f64).collect())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::exact::{parse_rational, ExactSources, Rational};
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_sources() -> SourceList {
        SourceList::from_vecs(vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.75, 0.25]]).unwrap()
    }

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn subset_iteration_and_display() {
        let v = SymbolSubset::from_symbols([1, 5, 6, 9]);
        assert_eq!(v.max_symbol(), Some(9));
        assert_eq!(v.len(), 4);
        assert_eq!(v.to_string(), "{1,5,6,9}");
        assert_eq!(v.nonempty_subsets().count(), 15);
        let subs: Vec<u32> = SymbolSubset::from_mask(0b101)
            .nonempty_subsets()
            .map(|s| s.mask())
            .collect();
        assert_eq!(subs, vec![0b001, 0b100, 0b101]);
        assert_eq!(SymbolSubset::EMPTY.max_symbol(), None);
    }

    #[test]
    fn q_examples() {
        let s = example_sources();
        assert_abs_diff_eq!(
            q_of_subset(&s, SymbolSubset::full(2)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            q_of_subset(&s, SymbolSubset::singleton(0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            q_of_subset(&s, SymbolSubset::singleton(1)).unwrap(),
            1.0 / 12.0,
            epsilon = 1e-15
        );
        assert!(q_of_subset(&s, SymbolSubset::EMPTY).is_err());
        assert!(beta_of_subset(&s, SymbolSubset::EMPTY).is_err());
    }

    #[test]
    fn beta_examples() {
        let s = example_sources();
        assert_abs_diff_eq!(
            beta_of_subset(&s, SymbolSubset::full(2)).unwrap(),
            5.0 / 12.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            beta_of_subset(&s, SymbolSubset::singleton(0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            beta_of_subset(&s, SymbolSubset::singleton(1)).unwrap(),
            1.0 / 12.0,
            epsilon = 1e-15
        );

        let one = SourceList::from_vecs(vec![vec![0.2, 0.5, 0.3]]).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(
                beta_of_subset(&one, SymbolSubset::singleton(i)).unwrap(),
                one.joint_pmf()[i],
                epsilon = 1e-15
            );
        }
        assert_eq!(
            beta_of_subset(&one, SymbolSubset::from_mask(0b011)).unwrap(),
            0.0
        );
        assert_eq!(beta_of_subset(&one, SymbolSubset::full(3)).unwrap(), 0.0);
    }

    #[test]
    fn membership_examples() {
        let spec = RegionSpec::exact(example_sources());
        assert!(is_member(&dist(&[0.5, 0.5]), &spec).unwrap().satisfied);
        let r = is_member(&dist(&[0.4, 0.6]), &spec).unwrap();
        assert!(!r.satisfied);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].subset, SymbolSubset::singleton(0));
        assert_abs_diff_eq!(r.violations[0].lhs, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(r.violations[0].rhs, 0.5, epsilon = 1e-15);
        // Both interval endpoints are members.
        assert!(
            is_member(&dist(&[11.0 / 12.0, 1.0 / 12.0]), &spec)
                .unwrap()
                .satisfied
        );
        assert!(is_member(&dist(&[0.5, 0.5]), &spec).unwrap().satisfied);
        assert!(!is_member(&dist(&[0.95, 0.05]), &spec).unwrap().satisfied);
        assert!(matches!(
            is_member(&dist(&[0.2, 0.3, 0.5]), &spec),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_source_region_is_a_point() {
        let p1 = vec![0.2, 0.5, 0.3];
        let spec = RegionSpec::exact(SourceList::from_vecs(vec![p1.clone()]).unwrap());
        assert!(is_member(&dist(&p1), &spec).unwrap().satisfied);
        // Brute force over every subset: any other point breaks some constraint.
        for other in [[0.25, 0.45, 0.3], [0.2, 0.3, 0.5], [0.0, 0.7, 0.3]] {
            let r = is_member(&dist(&other), &spec).unwrap();
            assert!(!r.satisfied);
            for viol in &r.violations {
                let lhs: f64 = viol.subset.sum_of(&other);
                let rhs: f64 = viol.subset.sum_of(&p1);
                assert!(lhs < rhs);
            }
        }
    }

    #[test]
    fn constraint_listing() {
        let spec = RegionSpec::exact(example_sources());
        let cons = enumerate_constraints(&spec).unwrap();
        assert_eq!(cons.len(), 3);
        let rhs: Vec<f64> = cons.iter().map(|c| c.1).collect();
        assert_abs_diff_eq!(rhs[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs[1], 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs[2], 1.0, epsilon = 1e-15);
        let three = SourceList::from_vecs(vec![vec![0.2, 0.5, 0.3]]).unwrap();
        assert_eq!(
            enumerate_constraints(&RegionSpec::exact(three))
                .unwrap()
                .len(),
            7
        );
        let big = SourceList::from_vecs(vec![vec![1.0 / 21.0; 21]]).unwrap();
        assert!(matches!(
            enumerate_constraints(&RegionSpec::exact(big)),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn hull_membership_examples() {
        let s = example_sources();
        assert!(hull_member(&dist(&[2.0 / 3.0, 1.0 / 3.0]), &s, 1e-8).unwrap());
        assert!(hull_member(&dist(&[0.7, 0.3]), &s, 1e-8).unwrap());
        assert!(!hull_member(&dist(&[0.5, 0.5]), &s, 1e-8).unwrap());
        let w = hull_weights(&dist(&[0.7, 0.3]), &s, 1e-8).unwrap().unwrap();
        // 0.3 = l/3 + (1-l)/4  =>  l = 0.6
        assert_abs_diff_eq!(w[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.4, epsilon = 1e-12);

        let tri = SourceList::from_vecs(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(hull_member(&dist(&[0.2, 0.3, 0.5]), &tri, 1e-8).unwrap());
        let line = SourceList::from_vecs(vec![vec![0.6, 0.4, 0.0], vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(!hull_member(&dist(&[0.2, 0.3, 0.5]), &line, 1e-8).unwrap());
    }

    #[test]
    fn joint_mode_agrees_with_product_form() {
        let s = SourceList::from_vecs(vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]]).unwrap();
        let j = SourceList::joint(3, 2, s.joint_pmf()).unwrap();
        let ti = SubsetTable::new(&s).unwrap();
        let tj = SubsetTable::new(&j).unwrap();
        for v in all_nonempty_subsets(3).unwrap() {
            let qi = q_of_subset(&s, v).unwrap();
            assert_abs_diff_eq!(qi, q_of_subset(&j, v).unwrap(), epsilon = 1e-14);
            assert_abs_diff_eq!(qi, ti.q(v), epsilon = 1e-14);
            assert_abs_diff_eq!(qi, tj.q(v), epsilon = 1e-14);
            let bi = beta_of_subset(&s, v).unwrap();
            assert_abs_diff_eq!(bi, beta_of_subset(&j, v).unwrap(), epsilon = 1e-14);
            assert_abs_diff_eq!(bi, tj.beta(v), epsilon = 1e-14);
        }
    }

    #[test]
    fn dependent_sources_change_the_region() {
        // Two perfectly correlated fair bits: the switcher never has a choice.
        let j = SourceList::joint(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let spec = RegionSpec::exact(j);
        assert!(is_member(&dist(&[0.5, 0.5]), &spec).unwrap().satisfied);
        assert!(!is_member(&dist(&[0.4, 0.6]), &spec).unwrap().satisfied);
        assert_eq!(
            beta_of_subset(&spec.sources, SymbolSubset::full(2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_rationals() {
        assert_eq!(
            parse_rational("1/3").unwrap(),
            Rational::new(1.into(), 3.into())
        );
        assert_eq!(
            parse_rational("0.25").unwrap(),
            Rational::new(1.into(), 4.into())
        );
        assert_eq!(
            parse_rational("2").unwrap(),
            Rational::from_integer(2.into())
        );
        assert_eq!(
            parse_rational("2.5e-1").unwrap(),
            Rational::new(1.into(), 4.into())
        );
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());

        let s = ExactSources::parse(&[vec!["2/3", "1/3"], vec!["3/4", "1/4"]]).unwrap();
        let (lo, hi) = s.attainable_interval(1);
        assert_eq!(lo, Rational::new(1.into(), 12.into()));
        assert_eq!(hi, Rational::new(1.into(), 2.into()));
        assert_eq!(
            s.beta(SymbolSubset::full(2)),
            Rational::new(5.into(), 12.into())
        );
        assert!(ExactSources::parse(&[vec!["1/3", "1/3"]]).is_err());
    }

    #[test]
    fn float_interval_matches_exact() {
        let (lo, hi) = attainable_interval(&example_sources(), 1).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-15);
    }
}
