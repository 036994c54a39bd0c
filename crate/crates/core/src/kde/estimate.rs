use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{BinnedSample, DensityEstimate, GridSpec, KdeError};

#[inline]
fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn check_bandwidth(bandwidth: f64) -> Result<(), KdeError> {
    if bandwidth.is_finite() && bandwidth > 0.0 {
        Ok(())
    } else {
        Err(KdeError::InvalidBandwidth(bandwidth))
    }
}

/// Binned Gaussian KDE on the grid of `binned`, computed as a linear convolution
/// of the counts with kernel weights `k_i = G(i * step / H) / (m H)`.
///
/// The convolution runs through a zero-padded FFT of length at least `2M`, so
/// there is no circular wrap-around. Round-off below zero is clamped away.
pub fn fft_kde(binned: &BinnedSample, bandwidth: f64) -> Result<DensityEstimate, KdeError> {
    check_bandwidth(bandwidth)?;
    let grid = *binned.grid();
    let m = grid.len();
    let n = binned.sample_count();
    if n == 0 {
        return Err(KdeError::TooFewSamples { needed: 1, got: 0 });
    }
    let len = (2 * m).next_power_of_two();
    let step_over_h = grid.step() / bandwidth;
    let scale = 1.0 / (n as f64 * bandwidth);

    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    for i in 0..m {
        let k = scale * std_normal_pdf(i as f64 * step_over_h);
        kernel[i].re = k;
        if i > 0 {
            kernel[len - i].re = k;
        }
    }
    let mut signal = vec![Complex::new(0.0, 0.0); len];
    for (dst, &c) in signal.iter_mut().zip(binned.counts()) {
        dst.re = c;
    }

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    forward.process(&mut kernel);
    forward.process(&mut signal);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        *s *= *k;
    }
    inverse.process(&mut signal);

    let norm = 1.0 / len as f64;
    let densities = signal[..m].iter().map(|c| (c.re * norm).max(0.0)).collect();
    Ok(DensityEstimate::new(grid, densities, bandwidth))
}

/// Plain kernel sum `f(d) = 1/(mH) sum_i G((d - d_i) / H)` at each evaluation point.
pub fn direct_kde(
    samples: &[f64],
    bandwidth: f64,
    eval_points: &[f64],
) -> Result<Vec<f64>, KdeError> {
    check_bandwidth(bandwidth)?;
    if samples.is_empty() {
        return Err(KdeError::TooFewSamples { needed: 1, got: 0 });
    }
    let scale = 1.0 / (samples.len() as f64 * bandwidth);
    Ok(eval_points
        .iter()
        .map(|&x| {
            scale
                * samples
                    .iter()
                    .map(|&s| std_normal_pdf((x - s) / bandwidth))
                    .sum::<f64>()
        })
        .collect())
}

/// [`direct_kde`] evaluated at every point of `grid`.
pub fn direct_kde_on_grid(
    samples: &[f64],
    bandwidth: f64,
    grid: &GridSpec,
) -> Result<DensityEstimate, KdeError> {
    let points: Vec<f64> = grid.points().collect();
    let densities = direct_kde(samples, bandwidth, &points)?;
    Ok(DensityEstimate::new(*grid, densities, bandwidth))
}
