//! Improved Sheather-Jones bandwidth selection.
//!
//! The binned sample is rescaled to the unit interval and cosine transformed.
//! The plug-in equation `t = xi * gamma^[l](t)` is then solved for the squared
//! bandwidth `t` by bracketing and bisection, using the usual `l = 7` stages of
//! functional estimation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{silverman_from_binned, BinnedSample, KdeError, DEGENERATE_VARIANCE};

const STAGES: i32 = 7;
/// Upper end of the root bracket, in squared units of the grid range.
const MAX_T: f64 = 0.1;
const MIN_T: f64 = 1e-12;
/// `exp(-x)` underflows to zero beyond this.
const EXP_CUTOFF: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMethod {
    Isj,
    /// The fixed-point equation had no root in the search interval.
    SilvermanFallback,
    /// The selected value was raised to a caller-supplied lower bound.
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub value: f64,
    pub method: BandwidthMethod,
}

impl Bandwidth {
    pub fn is_fallback(&self) -> bool {
        self.method == BandwidthMethod::SilvermanFallback
    }
}

/// Type-II DCT without normalization, `a_k = 2 sum_j x_j cos(pi k (2j + 1) / 2n)`,
/// computed with one complex FFT of length `n`.
pub(crate) fn dct2(data: &[f64]) -> Vec<f64> {
    let n = data.len();
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n);
    buf.extend(data.iter().step_by(2).map(|&x| Complex::new(x, 0.0)));
    let odd_start = if n.is_multiple_of(2) { n - 1 } else { n - 2 };
    buf.extend((0..n / 2).map(|k| Complex::new(data[odd_start - 2 * k], 0.0)));
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    buf.iter()
        .enumerate()
        .map(|(k, v)| {
            let angle = -PI * k as f64 / (2.0 * n as f64);
            2.0 * (Complex::from_polar(1.0, angle) * v).re
        })
        .collect()
}

struct FixedPoint {
    /// Squared frequencies `k^2`, `k = 1..n`.
    freq_sq: Vec<f64>,
    /// Squared half-coefficients `(a_k / 2)^2`.
    coeff_sq: Vec<f64>,
    n: f64,
}

impl FixedPoint {
    /// `2 pi^(2s) sum_k k^(2s) (a_k/2)^2 exp(-k^2 pi^2 t)`: the estimate of the
    /// squared norm of the s-th density derivative at squared bandwidth `t`.
    fn functional(&self, s: i32, t: f64) -> f64 {
        let decay = PI * PI * t;
        let last = if decay > 0.0 {
            ((EXP_CUTOFF / decay).sqrt() as usize).min(self.freq_sq.len())
        } else {
            self.freq_sq.len()
        };
        let sum: f64 = self.freq_sq[..last]
            .iter()
            .zip(&self.coeff_sq[..last])
            .map(|(&i, &a)| i.powi(s) * a * (-i * decay).exp())
            .sum();
        2.0 * PI.powi(2 * s) * sum
    }

    /// `t - xi * gamma^[l](t)`; positive once `t` exceeds its plug-in estimate.
    fn residual(&self, t: f64) -> f64 {
        let mut f = self.functional(STAGES, t);
        for s in (2..STAGES).rev() {
            let odd_factorial: f64 = (1..2 * s).step_by(2).map(f64::from).product();
            let k0 = odd_factorial / (2.0 * PI).sqrt();
            let c = (1.0 + 0.5f64.powf(f64::from(s) + 0.5)) / 3.0;
            let time = (2.0 * c * k0 / (self.n * f)).powf(2.0 / (3.0 + 2.0 * f64::from(s)));
            f = self.functional(s, time);
        }
        t - (2.0 * self.n * PI.sqrt() * f).powf(-0.4)
    }
}

/// Smallest root of the fixed-point residual in `(0, MAX_T]`, if any.
fn solve(fp: &FixedPoint) -> Option<f64> {
    let mut lo = MIN_T;
    let r_lo = fp.residual(lo);
    if !(r_lo < 0.0) {
        return None;
    }
    let mut hi = lo;
    loop {
        let next = (hi * 2.0).min(MAX_T);
        let r = fp.residual(next);
        if r.is_nan() {
            return None;
        }
        if r >= 0.0 {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
        if next >= MAX_T {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let r = fp.residual(mid);
        if r.is_nan() {
            return None;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A point mass lands on at most two neighbouring grid points.
fn occupies_single_cell(counts: &[f64]) -> bool {
    let first = counts.iter().position(|c| *c > 0.0);
    let last = counts.iter().rposition(|c| *c > 0.0);
    match (first, last) {
        (Some(a), Some(b)) => b - a <= 1,
        _ => true,
    }
}

/// Improved Sheather-Jones bandwidth for a binned sample, in sample units.
///
/// Falls back to Silverman's rule (flagged in the result) when the fixed-point
/// equation has no root in the search interval.
pub fn isj_bandwidth(binned: &BinnedSample) -> Result<Bandwidth, KdeError> {
    let n = binned.sample_count();
    if n < 2 {
        return Err(KdeError::TooFewSamples { needed: 2, got: n });
    }
    let (_, var) = binned.moments();
    if !(var >= DEGENERATE_VARIANCE) || occupies_single_cell(binned.counts()) {
        return Err(KdeError::Degenerate { variance: var });
    }

    let total: f64 = binned.counts().iter().sum();
    let normalized: Vec<f64> = binned.counts().iter().map(|c| c / total).collect();
    let coeffs = dct2(&normalized);
    let fp = FixedPoint {
        freq_sq: (1..coeffs.len()).map(|k| (k * k) as f64).collect(),
        coeff_sq: coeffs[1..].iter().map(|a| (a / 2.0).powi(2)).collect(),
        n: n as f64,
    };

    let range = binned.grid().range();
    match solve(&fp) {
        Some(t) => Ok(Bandwidth {
            value: t.sqrt() * range,
            method: BandwidthMethod::Isj,
        }),
        None => {
            log::debug!("ISJ fixed point has no root; using Silverman's rule");
            Ok(Bandwidth {
                value: silverman_from_binned(binned),
                method: BandwidthMethod::SilvermanFallback,
            })
        }
    }
}
