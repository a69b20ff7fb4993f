use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln λ, ln value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<LadderFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("a ladder fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(l, v)) = points.iter().find(|(l, v)| !(*l > 0.0 && *v > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive data, got ({l}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all λ values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LadderFit { points: points.to_vec(), slope, intercept, r_squared })
}
