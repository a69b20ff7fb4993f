use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::CapFamily;
use crate::error::{Error, Result};
use crate::scale::ScaleParams;
use crate::vecmath;

pub const MAX_PROBE_LAMBDA: f64 = 64.0;
pub const MIN_GRID_FACTOR: f64 = 4.0;
pub const DEFAULT_GRID_FACTOR: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// `‖F‖₆ / (Σ ‖F_Θ‖₆²)^{1/2}`.
    pub ratio: f64,
    pub norm_f: f64,
    pub sum_sq: f64,
    pub grid_per_axis: usize,
    pub grid_points: usize,
    pub active_caps: usize,
    /// `λ^{4/3}`, recorded next to the cap count.
    pub lambda_43: f64,
}

fn midpoints(n: usize, half: f64) -> Vec<f64> {
    let h = 2.0 * half / n as f64;
    (0..n).map(|i| -half + (i as f64 + 0.5) * h).collect()
}

/// `F = Σ a_Θ e^{2πi(x·ξ_Θ − t|ξ_Θ|²)}` on a tensor midpoint grid over `Q_λ`
/// with `⌈grid_factor·λ^{1/2}⌉` nodes per axis.
pub fn decoupling_probe(scale: &ScaleParams, family: &CapFamily, coeffs: &[Complex64], grid_factor: f64) -> Result<ProbeResult> {
    if scale.lambda > MAX_PROBE_LAMBDA {
        return Err(Error::Config(format!("probe is limited to λ ≤ {MAX_PROBE_LAMBDA}, got {}", scale.lambda)));
    }
    if !(grid_factor >= MIN_GRID_FACTOR) {
        return Err(Error::Config(format!("grid factor {grid_factor} is below the sampling limit {MIN_GRID_FACTOR}")));
    }
    if coeffs.len() != family.len() || family.is_empty() {
        return Err(Error::Config("one coefficient per cap required".into()));
    }
    let n = (grid_factor * scale.lambda.sqrt()).ceil() as usize;
    let ts = midpoints(n, scale.t_half);
    let xs = midpoints(n, scale.x_half);
    let xis: Vec<[f64; 3]> = family.caps.iter().map(|c| c.xi_center(scale.lambda)).collect();
    let tau = std::f64::consts::TAU;
    // per-axis phase tables, indexed [node][cap]
    let table = |f: &dyn Fn(f64, &[f64; 3]) -> f64, nodes: &[f64]| -> Vec<Vec<Complex64>> {
        nodes.iter().map(|&v| xis.iter().map(|xi| Complex64::from_polar(1.0, tau * f(v, xi))).collect()).collect()
    };
    let et = table(&|t, xi| -t * vecmath::dot(xi, xi), &ts);
    let e: [Vec<Vec<Complex64>>; 3] = std::array::from_fn(|k| table(&|x, xi| x * xi[k], &xs));
    let r2 = scale.x_half * scale.x_half;

    let slices: Vec<(f64, usize)> = (0..n * n)
        .into_par_iter()
        .map(|s| {
            let (it, i1) = (s / n, s % n);
            let g: Vec<Complex64> = (0..xis.len()).map(|m| coeffs[m] * et[it][m] * e[0][i1][m]).collect();
            let mut acc = 0.0;
            let mut count = 0;
            let mut h = vec![Complex64::new(0.0, 0.0); xis.len()];
            for i2 in 0..n {
                let d12 = xs[i1] * xs[i1] + xs[i2] * xs[i2];
                if d12 > r2 {
                    continue;
                }
                for m in 0..xis.len() {
                    h[m] = g[m] * e[1][i2][m];
                }
                for i3 in 0..n {
                    if d12 + xs[i3] * xs[i3] > r2 {
                        continue;
                    }
                    let row = &e[2][i3];
                    let f: Complex64 = h.iter().zip(row).map(|(a, b)| a * b).sum();
                    acc += f.norm_sqr().powi(3);
                    count += 1;
                }
            }
            (acc, count)
        })
        .collect();
    let (sum6, count) = slices.iter().fold((0.0, 0usize), |(a, c), &(x, y)| (a + x, c + y));
    let cell = (2.0 * scale.t_half / n as f64) * (2.0 * scale.x_half / n as f64).powi(3);
    let volume = cell * count as f64;
    let norm_f = (sum6 * cell).powf(1.0 / 6.0);
    // |F_Θ| = |a_Θ| on the whole grid
    let sum_sq: f64 = coeffs.iter().map(|a| a.norm_sqr() * volume.powf(1.0 / 3.0)).sum();
    Ok(ProbeResult {
        ratio: norm_f / sum_sq.sqrt(),
        norm_f,
        sum_sq,
        grid_per_axis: n,
        grid_points: count,
        active_caps: coeffs.iter().filter(|a| a.norm_sqr() > 0.0).count(),
        lambda_43: scale.lambda.powf(4.0 / 3.0),
    })
}
