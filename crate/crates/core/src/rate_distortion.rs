//! Rate-distortion function of a fixed discrete memoryless source.
//!
//! The parametric curve is traced with Blahut–Arimoto iterations at a fixed
//! Lagrange slope `s <= 0` (bits per unit distortion); a target distortion is
//! hit by bisecting on the slope.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::probcore::{
    column_distortions, d_max, d_min, expected_distortion, mutual_information, DistortionMatrix,
    Distribution, TransitionMatrix,
};

/// Initial slope bracket lower end.
pub const INITIAL_SLOPE_FLOOR: f64 = -64.0;
const SLOPE_FLOOR_LIMIT: f64 = -1_048_576.0;
const MAX_BISECTIONS: usize = 200;
const POLISH_EVERY: usize = 200;
const SUPPORT_FLOOR: f64 = 1e-10;
const NEWTON_ITERS: usize = 40;
const MAX_NEWTON_SOLVES: usize = 64;
const CHEAP_NEWTON_SOLVES: usize = 4;
const REVIVE_MASS: f64 = 1e-9;

/// One point of a rate-distortion curve together with the channel achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub distortion: f64,
    /// Bits per source symbol.
    pub rate: f64,
    pub channel: TransitionMatrix,
    /// Lagrange slope; `-inf` is never stored, very negative values stand in for it.
    pub slope: f64,
}

impl RdPoint {
    /// Rate at a distortion close to this point's, read off the tangent line.
    /// Removes the first-order error left by the bisection tolerance.
    pub fn rate_at(&self, distortion: f64) -> f64 {
        (self.rate + self.slope * (distortion - self.distortion)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub source: Distribution,
    pub points: Vec<RdPoint>,
}

/// Tolerances for the rate-distortion solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdSolver {
    /// Stop Blahut–Arimoto once the gap between the upper and lower rate
    /// bounds at the current slope falls below this.
    pub ba_tol: f64,
    /// Accept a slope once the achieved distortion is this close to the target.
    pub distortion_tol: f64,
    pub max_iters: usize,
}

impl Default for RdSolver {
    fn default() -> Self {
        Self {
            ba_tol: 1e-9,
            distortion_tol: 1e-6,
            max_iters: 200_000,
        }
    }
}

fn check_dims(p: &Distribution, d: &DistortionMatrix) -> Result<()> {
    if p.len() != d.x_size() {
        return Err(Error::Dimension(format!(
            "source has {} symbols, distortion matrix has {} rows",
            p.len(),
            d.x_size()
        )));
    }
    Ok(())
}

/// Deterministic channel to the reproduction letter with least average
/// distortion; it achieves `(D_max, 0)`.
fn zero_rate_point(p: &Distribution, d: &DistortionMatrix) -> Result<RdPoint> {
    let cols = column_distortions(p, d)?;
    let (best, &dist) = cols
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("distortion matrix has columns");
    let ny = d.y_size();
    let mut data = vec![0.0; p.len() * ny];
    for i in 0..p.len() {
        data[i * ny + best] = 1.0;
    }
    Ok(RdPoint {
        distortion: dist,
        rate: 0.0,
        channel: TransitionMatrix::from_raw(p.len(), ny, data),
        slope: 0.0,
    })
}

/// `c_j(q) = sum_i p_i A_ij / sum_k q_k A_ik`, and the bound gap.
fn multipliers(p: &[f64], kernel: &[f64], ny: usize, q: &[f64]) -> (Vec<f64>, f64) {
    let mut c = vec![0.0; ny];
    for (i, &pi) in p.iter().enumerate() {
        let kr = &kernel[i * ny..(i + 1) * ny];
        let z: f64 = q.iter().zip(kr).map(|(a, b)| a * b).sum();
        if pi == 0.0 || z == 0.0 {
            continue;
        }
        for (cj, &k) in c.iter_mut().zip(kr) {
            *cj += pi * k / z;
        }
    }
    let max_log = c.iter().map(|v| v.log2()).fold(f64::NEG_INFINITY, f64::max);
    let mean_log: f64 = q
        .iter()
        .zip(&c)
        .filter(|(&qj, _)| qj > 0.0)
        .map(|(&qj, &cj)| qj * cj.log2())
        .sum();
    (c, max_log - mean_log)
}

enum Newton {
    Solved(Vec<f64>),
    Drop(usize),
    /// Out of iterations; the last positive iterate.
    Stalled(Vec<f64>),
    Stuck,
}

/// Newton's method on `c_j(q) = 1` over the letters `q` currently uses.
/// When the system has no positive solution on a support (a letter leaves,
/// or a straight piece of the curve makes several supports optimal) the
/// supports one letter smaller are tried, level by level.
fn polish(
    p: &[f64],
    kernel: &[f64],
    ny: usize,
    q: &[f64],
    tol: f64,
    mut budget: usize,
) -> Option<(Vec<f64>, f64)> {
    let peak = q.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..ny).filter(|&j| q[j] > SUPPORT_FLOOR * peak).collect();
    let mut seen = HashSet::new();
    let mut level = vec![support];
    let mut best: Option<(Vec<f64>, f64)> = None;
    while !level.is_empty() {
        let mut next = Vec::new();
        for support in level {
            if budget == 0 {
                return best;
            }
            budget -= 1;
            let mut children = |first: Option<usize>| {
                let mut order: Vec<usize> = (0..support.len()).collect();
                order.sort_by(|&a, &b| q[support[a]].total_cmp(&q[support[b]]));
                if let Some(k) = first {
                    order.retain(|&o| o != k);
                    order.insert(0, k);
                }
                for k in order {
                    let mut smaller = support.clone();
                    smaller.remove(k);
                    if !smaller.is_empty() && seen.insert(smaller.clone()) {
                        next.push(smaller);
                    }
                }
            };
            match newton(p, kernel, ny, q, &support) {
                Newton::Solved(x) => best = better(best, embed(p, kernel, ny, &support, &x)),
                Newton::Stalled(x) => {
                    best = better(best, embed(p, kernel, ny, &support, &x));
                    children(None);
                }
                Newton::Drop(k) => children(Some(k)),
                Newton::Stuck => children(None),
            }
            if best.as_ref().is_some_and(|b| b.1 < tol) {
                return best;
            }
        }
        level = next;
    }
    best
}

fn better(a: Option<(Vec<f64>, f64)>, b: Option<(Vec<f64>, f64)>) -> Option<(Vec<f64>, f64)> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.1 < a.1 { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn embed(
    p: &[f64],
    kernel: &[f64],
    ny: usize,
    support: &[usize],
    x: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let mut full = vec![0.0; ny];
    let total: f64 = x.iter().sum();
    for (&j, &v) in support.iter().zip(x) {
        full[j] = v / total;
    }
    let (_, gap) = multipliers(p, kernel, ny, &full);
    gap.is_finite().then_some((full, gap))
}

fn newton(p: &[f64], kernel: &[f64], ny: usize, q: &[f64], support: &[usize]) -> Newton {
    let k = support.len();
    let mut x: Vec<f64> = support.iter().map(|&j| q[j].max(SUPPORT_FLOOR)).collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    for _ in 0..NEWTON_ITERS {
        let mut resid = DVector::<f64>::zeros(k);
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let a: Vec<f64> = support.iter().map(|&j| kernel[i * ny + j]).collect();
            let z: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum();
            if z <= 0.0 {
                return Newton::Stuck;
            }
            for r in 0..k {
                resid[r] += pi * a[r] / z;
                for c in 0..k {
                    jac[(r, c)] -= pi * a[r] * a[c] / (z * z);
                }
            }
        }
        resid.iter_mut().for_each(|v| *v -= 1.0);
        if resid.amax() < 1e-15 {
            return Newton::Solved(x);
        }
        // Directions along a (near) flat family of optima are left alone.
        let svd = jac.svd(true, true);
        let cutoff = 1e-9 * svd.singular_values.max();
        let Ok(step) = svd.solve(&(-&resid), cutoff) else {
            return Newton::Stuck;
        };
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if cand.iter().all(|&v| v > 0.0) {
                x = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                // The letter that hits zero first along the step.
                let ratio = |a: usize| {
                    if step[a] < 0.0 {
                        -x[a] / step[a]
                    } else {
                        f64::INFINITY
                    }
                };
                let first = (0..k)
                    .min_by(|&a, &b| ratio(a).total_cmp(&ratio(b)))
                    .expect("nonempty support");
                return Newton::Drop(first);
            }
        }
    }
    Newton::Stalled(x)
}

impl RdSolver {
    /// Blahut–Arimoto at a fixed slope.
    pub fn fixed_slope(
        &self,
        p: &Distribution,
        d: &DistortionMatrix,
        slope: f64,
    ) -> Result<RdPoint> {
        check_dims(p, d)?;
        if !(self.ba_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.ba_tol
            )));
        }
        if !(slope <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "slope must be ≤ 0, got {slope}"
            )));
        }
        if slope == 0.0 {
            return zero_rate_point(p, d);
        }

        let nx = p.len();
        let ny = d.y_size();
        // exp2(s * (d(i,j) - min_j d(i,j))): the row offset cancels after
        // normalization and keeps at least one weight equal to 1 per row.
        let mut kernel = vec![0.0; nx * ny];
        for i in 0..nx {
            let row = d.row(i);
            let floor = row.iter().copied().fold(f64::INFINITY, f64::min);
            for j in 0..ny {
                kernel[i * ny + j] = (slope * (row[j] - floor)).exp2();
            }
        }

        // Iterate q <- q * c. The bound gap max_j log2 c_j - sum_j q_j log2 c_j
        // bounds how far the current channel's rate is above the curve.
        let mut q = vec![1.0 / ny as f64; ny];
        let mut z = vec![0.0; nx];
        let mut c = vec![0.0; ny];
        let mut gap = f64::INFINITY;
        let mut iters = 0;
        while iters < self.max_iters {
            iters += 1;
            for (i, zi) in z.iter_mut().enumerate() {
                let kr = &kernel[i * ny..(i + 1) * ny];
                *zi = q.iter().zip(kr).map(|(a, b)| a * b).sum();
            }
            c.iter_mut().for_each(|v| *v = 0.0);
            for (i, &pi) in p.probs().iter().enumerate() {
                if pi == 0.0 || z[i] == 0.0 {
                    continue;
                }
                let scale = pi / z[i];
                for (cj, &k) in c.iter_mut().zip(&kernel[i * ny..(i + 1) * ny]) {
                    *cj += scale * k;
                }
            }
            let max_log = c
                .iter()
                .map(|&v| if v > 0.0 { v.log2() } else { f64::NEG_INFINITY })
                .fold(f64::NEG_INFINITY, f64::max);
            let mean_log: f64 = q
                .iter()
                .zip(&c)
                .filter(|(&qj, _)| qj > 0.0)
                .map(|(&qj, &cj)| qj * cj.log2())
                .sum();
            gap = max_log - mean_log;
            if gap < self.ba_tol {
                break;
            }
            if iters % POLISH_EVERY == 0 {
                // Plain iterations crawl near slopes where the support of q
                // changes; solve the stationarity conditions directly.
                // A wide support search only now and then.
                let budget = if (iters / POLISH_EVERY).is_power_of_two() {
                    MAX_NEWTON_SOLVES
                } else {
                    CHEAP_NEWTON_SOLVES
                };
                if let Some((polished, g)) = polish(p.probs(), &kernel, ny, &q, self.ba_tol, budget)
                {
                    if g < self.ba_tol {
                        q = polished;
                        gap = g;
                        break;
                    }
                }
                if budget == MAX_NEWTON_SOLVES {
                    // Letters that underflowed cannot come back through
                    // multiplicative updates; give the wanted ones some mass.
                    for (qj, &cj) in q.iter_mut().zip(&c) {
                        if cj > 1.0 && *qj < REVIVE_MASS {
                            *qj = REVIVE_MASS;
                        }
                    }
                }
            }
            for (qj, &cj) in q.iter_mut().zip(&c) {
                *qj *= cj;
            }
            let total: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= total);
        }

        let mut w = vec![0.0; nx * ny];
        for i in 0..nx {
            let wr = &mut w[i * ny..(i + 1) * ny];
            let kr = &kernel[i * ny..(i + 1) * ny];
            let mut zi = 0.0;
            for j in 0..ny {
                wr[j] = q[j] * kr[j];
                zi += wr[j];
            }
            if zi > 0.0 {
                wr.iter_mut().for_each(|v| *v /= zi);
            } else {
                // Underflow: fall back to the nearest reproduction letters.
                let cnt = kr.iter().filter(|&&k| k == 1.0).count() as f64;
                for j in 0..ny {
                    wr[j] = if kr[j] == 1.0 { 1.0 / cnt } else { 0.0 };
                }
            }
        }
        let channel = TransitionMatrix::from_raw(nx, ny, w);
        let distortion = expected_distortion(p, &channel, d)?;
        if gap >= self.ba_tol {
            return Err(Error::NonConvergence {
                iters,
                last_rate: mutual_information(p, &channel)?,
                last_distortion: distortion,
            });
        }
        Ok(RdPoint {
            distortion,
            rate: mutual_information(p, &channel)?.max(0.0),
            channel,
            slope,
        })
    }

    /// `R_p(D)` with its achieving channel.
    pub fn rate_at_distortion(
        &self,
        p: &Distribution,
        d: &DistortionMatrix,
        target: f64,
    ) -> Result<RdPoint> {
        check_dims(p, d)?;
        if !(target >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "distortion must be ≥ 0, got {target}"
            )));
        }
        let dmin = d_min(p, d)?;
        let dmax = d_max(p, d)?;
        if target >= dmax {
            return zero_rate_point(p, d);
        }
        if target < dmin - 1e-12 {
            return Err(Error::Infeasible(format!(
                "distortion {target} is below D_min = {dmin}"
            )));
        }

        let tol = self.distortion_tol;
        let mut lo = INITIAL_SLOPE_FLOOR;
        let mut lo_pt = self.fixed_slope(p, d, lo)?;
        while lo_pt.distortion > target + tol {
            if lo <= SLOPE_FLOOR_LIMIT {
                // Target sits within rounding of D_min.
                return Ok(lo_pt);
            }
            lo *= 2.0;
            lo_pt = self.fixed_slope(p, d, lo)?;
        }
        if (lo_pt.distortion - target).abs() < tol {
            return Ok(lo_pt);
        }

        let mut hi = 0.0;
        let mut hi_pt = zero_rate_point(p, d)?;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            // Any slope inside the bracket will do, so step off the rare
            // slope where the iteration stalls.
            let mut mid = mid;
            let mut attempt = self.fixed_slope(p, d, mid);
            for frac in [0.47, 0.53, 0.4, 0.6] {
                if !matches!(attempt, Err(Error::NonConvergence { .. })) {
                    break;
                }
                let nudged = lo + frac * (hi - lo);
                if nudged > lo && nudged < hi {
                    if let Ok(pt) = self.fixed_slope(p, d, nudged) {
                        mid = nudged;
                        attempt = Ok(pt);
                    }
                }
            }
            let pt = match attempt {
                // Stalling this deep into the bisection means the bracket
                // already sits on a kink; finish by time-sharing.
                Err(Error::NonConvergence { .. }) if hi - lo < 1e-6 * lo.abs() => break,
                other => other?,
            };
            if (pt.distortion - target).abs() < tol {
                return Ok(pt);
            }
            if pt.distortion > target {
                hi = mid;
                hi_pt = pt;
            } else {
                lo = mid;
                lo_pt = pt;
            }
        }
        // The bracket collapsed onto a slope where the curve has a straight
        // segment; time-share the two end channels to land on the target.
        time_share(p, d, &lo_pt, &hi_pt, target)
    }

    pub fn rd_curve(
        &self,
        p: &Distribution,
        d: &DistortionMatrix,
        num_points: usize,
    ) -> Result<RdCurve> {
        if num_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 curve points, got {num_points}"
            )));
        }
        let dmin = d_min(p, d)?;
        let dmax = d_max(p, d)?;
        let mut points = Vec::with_capacity(num_points);
        for k in 0..num_points {
            let t = k as f64 / (num_points - 1) as f64;
            let target = if k + 1 == num_points {
                dmax
            } else {
                dmin + t * (dmax - dmin)
            };
            points.push(self.rate_at_distortion(p, d, target)?);
        }
        // Each point is solved independently; clamp solver noise so the list
        // stays nonincreasing.
        for k in 1..points.len() {
            if points[k].rate > points[k - 1].rate {
                points[k].rate = points[k - 1].rate;
            }
        }
        Ok(RdCurve {
            source: p.clone(),
            points,
        })
    }
}

fn time_share(
    p: &Distribution,
    d: &DistortionMatrix,
    lo: &RdPoint,
    hi: &RdPoint,
    target: f64,
) -> Result<RdPoint> {
    let span = hi.distortion - lo.distortion;
    let lambda = if span > 0.0 {
        ((hi.distortion - target) / span).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let (nx, ny) = (lo.channel.x_size(), lo.channel.y_size());
    let mut data = vec![0.0; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            data[i * ny + j] =
                lambda * lo.channel.get(i, j) + (1.0 - lambda) * hi.channel.get(i, j);
        }
    }
    let channel = TransitionMatrix::from_raw(nx, ny, data);
    Ok(RdPoint {
        distortion: expected_distortion(p, &channel, d)?,
        rate: mutual_information(p, &channel)?,
        channel,
        slope: 0.5 * (lo.slope + hi.slope),
    })
}

/// Blahut–Arimoto at a fixed slope with the given tolerance and iteration cap.
pub fn ba_fixed_slope(
    p: &Distribution,
    d: &DistortionMatrix,
    slope: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RdPoint> {
    RdSolver {
        ba_tol: tol,
        max_iters,
        ..RdSolver::default()
    }
    .fixed_slope(p, d, slope)
}

/// `R_p(D)`, bisecting the slope until the achieved distortion is within `tol`.
pub fn rate_at_distortion(
    p: &Distribution,
    d: &DistortionMatrix,
    target: f64,
    tol: f64,
) -> Result<RdPoint> {
    RdSolver {
        distortion_tol: tol,
        ..RdSolver::default()
    }
    .rate_at_distortion(p, d, target)
}

/// `num_points` points at distortions evenly spaced over `[D_min, D_max]`.
pub fn rd_curve(p: &Distribution, d: &DistortionMatrix, num_points: usize) -> Result<RdCurve> {
    RdSolver::default().rd_curve(p, d, num_points)
}
