//! Finite-alphabet probability primitives: distributions, channels,
//! distortion measures and the information quantities built on them.
//!
//! All logarithms are base 2. Terms of the form `0 * log(..)` are zero.

use crate::error::{Error, Result};

/// Absolute tolerance on simplex constraints.
pub const SIMPLEX_TOL: f64 = 1e-9;

fn check_simplex(probs: &[f64], what: &str) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidDistribution(format!(
            "{what}: length {} < 2",
            probs.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what}: entry {i} = {p} is not a nonnegative finite number"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// A point of the probability simplex over `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs` without renormalizing.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, "distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::new(vec![1.0 / len as f64; len])
    }

    /// Point mass on `symbol`.
    pub fn point(len: usize, symbol: usize) -> Result<Self> {
        if symbol >= len {
            return Err(Error::InvalidArgument(format!(
                "symbol {symbol} outside alphabet of size {len}"
            )));
        }
        let mut probs = vec![0.0; len];
        probs[symbol] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Entropy in bits of a nonnegative vector summing to one.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy function in bits.
pub fn h2(q: f64) -> f64 {
    entropy(&[q, 1.0 - q])
}

/// Nonnegative finite distortion measure `d(i, j)` on `X x Y`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistortionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::InvalidDistortion("no rows".into()));
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return Err(Error::InvalidDistortion("no columns".into()));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::InvalidDistortion(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDistortion(format!(
                        "d({i},{j}) = {v} must be finite and nonnegative"
                    )));
                }
            }
            data.extend(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    /// Hamming distortion on a common alphabet of size `n`.
    pub fn hamming(n: usize) -> Self {
        let data = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn x_size(&self) -> usize {
        self.rows
    }

    pub fn y_size(&self) -> usize {
        self.cols
    }

    /// Largest entry, `d*`.
    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Channel `w(j|i)` from `X` to `Y`; every row is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::InvalidDistribution("channel has no rows".into()));
        }
        let ncols = rows[0].len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Dimension(format!(
                    "channel row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            check_simplex(&row, &format!("channel row {i}"))?;
            data.extend(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    /// Caller guarantees every row is on the simplex.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let data = (0..n * n)
            .map(|k| if k / n == k % n { 1.0 } else { 0.0 })
            .collect();
        Self::from_raw(n, n, data)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn x_size(&self) -> usize {
        self.rows
    }

    pub fn y_size(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// How the `m` switchable sources relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    Independent,
    Joint,
}

/// The list of sources available to the switcher.
///
/// In joint mode the PMF over `X^m` is stored flattened with source 1 as the
/// most significant digit: tuple `(x_1, .., x_m)` lives at
/// `sum_l x_l * |X|^(m-l)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceList {
    Independent(Vec<Distribution>),
    Joint {
        alphabet: usize,
        sources: usize,
        joint: Vec<f64>,
    },
}

impl SourceList {
    pub fn independent(sources: Vec<Distribution>) -> Result<Self> {
        let first = sources
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one source is required".into()))?;
        let k = first.len();
        if let Some(bad) = sources.iter().position(|s| s.len() != k) {
            return Err(Error::Dimension(format!(
                "source {bad} has alphabet {}, expected {k}",
                sources[bad].len()
            )));
        }
        Ok(Self::Independent(sources))
    }

    /// Convenience constructor from raw probability vectors.
    pub fn from_vecs(sources: Vec<Vec<f64>>) -> Result<Self> {
        Self::independent(
            sources
                .into_iter()
                .map(Distribution::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn joint(alphabet: usize, sources: usize, joint: Vec<f64>) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidArgument(
                "alphabet must have ≥ 2 symbols".into(),
            ));
        }
        if sources == 0 {
            return Err(Error::InvalidArgument(
                "at least one source is required".into(),
            ));
        }
        let expected = (alphabet as u64)
            .checked_pow(sources as u32)
            .filter(|&v| v <= 1 << 24)
            .ok_or(Error::GuardExceeded {
                what: "|X|^m",
                value: (alphabet as f64).powi(sources as i32),
                limit: (1u64 << 24) as f64,
            })? as usize;
        if joint.len() != expected {
            return Err(Error::Dimension(format!(
                "joint PMF has {} entries, expected |X|^m = {expected}",
                joint.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &joint {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "joint PMF entry {p} is not a nonnegative finite number"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "joint PMF sums to {sum}, expected 1"
            )));
        }
        Ok(Self::Joint {
            alphabet,
            sources,
            joint,
        })
    }

    pub fn mode(&self) -> SourceMode {
        match self {
            Self::Independent(_) => SourceMode::Independent,
            Self::Joint { .. } => SourceMode::Joint,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            Self::Independent(s) => s[0].len(),
            Self::Joint { alphabet, .. } => *alphabet,
        }
    }

    /// Number of switchable sources, `m`.
    pub fn num_sources(&self) -> usize {
        match self {
            Self::Independent(s) => s.len(),
            Self::Joint { sources, .. } => *sources,
        }
    }

    /// Per-source marginal distributions.
    pub fn marginals(&self) -> Vec<Distribution> {
        match self {
            Self::Independent(srcs) => srcs.clone(),
            Self::Joint {
                alphabet,
                sources,
                joint,
            } => {
                let mut out = vec![vec![0.0; *alphabet]; *sources];
                for (idx, &w) in joint.iter().enumerate() {
                    for (l, x) in Self::decode_tuple(*alphabet, *sources, idx)
                        .into_iter()
                        .enumerate()
                    {
                        out[l][x] += w;
                    }
                }
                out.into_iter()
                    .map(|v| {
                        let total: f64 = v.iter().sum();
                        Distribution::new(v.into_iter().map(|x| x / total).collect())
                            .expect("marginal of a valid joint PMF")
                    })
                    .collect()
            }
        }
    }

    /// Decodes a flattened joint index into the per-source symbols.
    pub fn decode_tuple(alphabet: usize, sources: usize, mut index: usize) -> Vec<usize> {
        let mut tuple = vec![0; sources];
        for slot in tuple.iter_mut().rev() {
            *slot = index % alphabet;
            index /= alphabet;
        }
        tuple
    }

    /// Joint PMF over `X^m` (product form in independent mode).
    pub fn joint_pmf(&self) -> Vec<f64> {
        match self {
            Self::Joint { joint, .. } => joint.clone(),
            Self::Independent(srcs) => {
                let k = srcs[0].len();
                let mut pmf = vec![1.0];
                for s in srcs {
                    let mut next = Vec::with_capacity(pmf.len() * k);
                    for &w in &pmf {
                        next.extend(s.probs().iter().map(|&p| w * p));
                    }
                    pmf = next;
                }
                pmf
            }
        }
    }
}

fn check_channel(p: &Distribution, w: &TransitionMatrix) -> Result<()> {
    if p.len() != w.x_size() {
        return Err(Error::Dimension(format!(
            "distribution has {} symbols, channel has {} rows",
            p.len(),
            w.x_size()
        )));
    }
    Ok(())
}

fn check_distortion(p: &Distribution, d: &DistortionMatrix) -> Result<()> {
    if p.len() != d.x_size() {
        return Err(Error::Dimension(format!(
            "distribution has {} symbols, distortion matrix has {} rows",
            p.len(),
            d.x_size()
        )));
    }
    Ok(())
}

/// Output marginal `sum_i p(i) w(j|i)`.
pub fn output_marginal(p: &Distribution, w: &TransitionMatrix) -> Result<Vec<f64>> {
    check_channel(p, w)?;
    let mut q = vec![0.0; w.y_size()];
    for (i, &pi) in p.probs().iter().enumerate() {
        for (qj, &wij) in q.iter_mut().zip(w.row(i)) {
            *qj += pi * wij;
        }
    }
    Ok(q)
}

/// `I(p, w)` in bits.
pub fn mutual_information(p: &Distribution, w: &TransitionMatrix) -> Result<f64> {
    let q = output_marginal(p, w)?;
    let mut info = 0.0;
    for (i, &pi) in p.probs().iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &wij) in w.row(i).iter().enumerate() {
            if wij > 0.0 && q[j] > 0.0 {
                info += pi * wij * (wij / q[j]).log2();
            }
        }
    }
    // Rounding can push an exact zero slightly negative.
    Ok(info.max(0.0))
}

/// `sum_{i,j} p(i) w(j|i) d(i,j)`.
pub fn expected_distortion(
    p: &Distribution,
    w: &TransitionMatrix,
    d: &DistortionMatrix,
) -> Result<f64> {
    check_channel(p, w)?;
    check_distortion(p, d)?;
    if w.y_size() != d.y_size() {
        return Err(Error::Dimension(format!(
            "channel has {} outputs, distortion matrix has {} columns",
            w.y_size(),
            d.y_size()
        )));
    }
    Ok(p.probs()
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            pi * w
                .row(i)
                .iter()
                .zip(d.row(i))
                .map(|(wij, dij)| wij * dij)
                .sum::<f64>()
        })
        .sum())
}

/// `D_min(p) = sum_i p(i) min_j d(i,j)`.
pub fn d_min(p: &Distribution, d: &DistortionMatrix) -> Result<f64> {
    check_distortion(p, d)?;
    Ok(p.probs()
        .iter()
        .enumerate()
        .map(|(i, &pi)| pi * d.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .sum())
}

/// Column distortions `sum_i p(i) d(i,j)` for every reproduction letter.
pub fn column_distortions(p: &Distribution, d: &DistortionMatrix) -> Result<Vec<f64>> {
    check_distortion(p, d)?;
    let mut cols = vec![0.0; d.y_size()];
    for (i, &pi) in p.probs().iter().enumerate() {
        for (c, &dij) in cols.iter_mut().zip(d.row(i)) {
            *c += pi * dij;
        }
    }
    Ok(cols)
}

/// `D_max(p) = min_j sum_i p(i) d(i,j)`.
pub fn d_max(p: &Distribution, d: &DistortionMatrix) -> Result<f64> {
    Ok(column_distortions(p, d)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
