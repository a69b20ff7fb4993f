//! Polynomials on ℝ⁴, the anisotropic rescaling of `Q_λ`, and tubular
//! neighborhoods of zero sets in the rescaled unit box.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Estimate, Key, Rng};
use crate::scale::ScaleParams;
use crate::vecmath::{self, Vec3, Vec4};

/// Points used to normalize random polynomials to unit gradient RMS.
const RMS_POINTS: usize = 512;

/// Sparse polynomial in `z = (τ, ζ₁, ζ₂, ζ₃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly4 {
    pub terms: Vec<([u32; 4], f64)>,
}

fn powu(x: f64, k: u32) -> f64 {
    x.powi(k as i32)
}

impl Poly4 {
    pub fn new(terms: Vec<([u32; 4], f64)>) -> Self {
        Poly4 { terms: terms.into_iter().filter(|(_, c)| *c != 0.0).collect() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![([0; 4], c)])
    }

    /// `a·z + b`.
    pub fn linear(a: Vec4, b: f64) -> Self {
        let mut t: Vec<_> = (0..4)
            .map(|i| {
                let mut e = [0; 4];
                e[i] = 1;
                (e, a[i])
            })
            .collect();
        t.push(([0; 4], b));
        Self::new(t)
    }

    /// `|z|² − c`.
    pub fn sphere(c: f64) -> Self {
        let mut t: Vec<_> = (0..4)
            .map(|i| {
                let mut e = [0; 4];
                e[i] = 2;
                (e, 1.0)
            })
            .collect();
        t.push(([0; 4], -c));
        Self::new(t)
    }

    pub fn product(&self, other: &Poly4) -> Self {
        let mut out: Vec<([u32; 4], f64)> = Vec::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = std::array::from_fn(|i| ea[i] + eb[i]);
                match out.iter_mut().find(|(x, _)| *x == e) {
                    Some((_, c)) => *c += ca * cb,
                    None => out.push((e, ca * cb)),
                }
            }
        }
        Self::new(out)
    }

    /// All monomials of total degree ≤ `d` with standard normal coefficients,
    /// rescaled so that `|∇P|` has unit RMS over the unit box.
    pub fn random(d: u32, rng: &mut Rng) -> Self {
        let mut terms = Vec::new();
        for a in 0..=d {
            for b in 0..=(d - a) {
                for c in 0..=(d - a - b) {
                    for e in 0..=(d - a - b - c) {
                        let coef: f64 = StandardNormal.sample(rng);
                        terms.push(([a, b, c, e], coef));
                    }
                }
            }
        }
        let mut p = Self::new(terms);
        let ms = (0..RMS_POINTS)
            .map(|_| {
                let g = p.grad(&box_point(rng));
                vecmath::dot(&g, &g)
            })
            .sum::<f64>()
            / RMS_POINTS as f64;
        if ms > 0.0 {
            let k = 1.0 / ms.sqrt();
            for (_, c) in &mut p.terms {
                *c *= k;
            }
        }
        p
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &Vec4) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * (0..4).map(|i| powu(z[i], e[i])).product::<f64>())
            .sum()
    }

    pub fn grad(&self, z: &Vec4) -> Vec4 {
        let mut g = [0.0; 4];
        for (e, c) in &self.terms {
            for (k, gk) in g.iter_mut().enumerate() {
                if e[k] == 0 {
                    continue;
                }
                let mut v = c * e[k] as f64;
                for i in 0..4 {
                    v *= if i == k { powu(z[i], e[i] - 1) } else { powu(z[i], e[i]) };
                }
                *gk += v;
            }
        }
        g
    }
}

/// `(t, x) ↦ (λ^{3/2} t, λ^{1/2} x)`.
pub fn anisotropic_map(scale: &ScaleParams, t: f64, x: &Vec3) -> (f64, Vec3) {
    let l = scale.lambda;
    (l.powf(1.5) * t, vecmath::scale(x, l.sqrt()))
}

pub fn anisotropic_inverse(scale: &ScaleParams, tau: f64, zeta: &Vec3) -> (f64, Vec3) {
    let l = scale.lambda;
    (tau / l.powf(1.5), vecmath::scale(zeta, 1.0 / l.sqrt()))
}

/// Jacobian `λ³` of the anisotropic map.
pub fn anisotropic_jacobian(scale: &ScaleParams) -> f64 {
    scale.lambda.powi(3)
}

/// `|P(z)| ≤ β·|∇P(z)|`. A stationary point with `P ≠ 0` is outside.
pub fn band_membership(p: &Poly4, z: &Vec4, beta: f64) -> bool {
    let v = p.eval(z).abs();
    if v == 0.0 {
        return true;
    }
    let g = vecmath::norm(&p.grad(z));
    g > 0.0 && v <= beta * g
}

/// Largest admissible degree `⌈D^{1/4}⌉`.
pub fn max_degree(scale: &ScaleParams) -> u32 {
    scale.d.powf(0.25).ceil() as u32
}

/// `β = c·D^{-1}/d`.
pub fn shell_beta(scale: &ScaleParams, c: f64, d: u32) -> f64 {
    c / (scale.d * d.max(1) as f64)
}

/// Uniform point of the rescaled box `|τ| ≤ 1/2`, `|ζ| ≤ 1/2`.
pub fn box_point(rng: &mut Rng) -> Vec4 {
    let tau = mc::uniform(rng, -0.5, 0.5);
    let z = vecmath::scale(&mc::ball_point(rng), 0.5);
    [tau, z[0], z[1], z[2]]
}

/// Fraction of the unit box inside the β-band of `Z(P)`. The draws depend only
/// on `key`, so fractions are monotone in β for a fixed key.
pub fn shell_fraction(p: &Poly4, scale: &ScaleParams, beta: f64, samples: usize, key: Key) -> Result<Estimate> {
    let dmax = max_degree(scale);
    if p.degree() > dmax {
        return Err(Error::Precondition(format!(
            "degree {} exceeds ⌈D^{{1/4}}⌉ = {dmax}",
            p.degree()
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::Config(format!("band width must be positive, got {beta}")));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let hits = mc::count_hits(key, samples, |rng| band_membership(p, &box_point(rng), beta));
    Ok(Estimate::from_hits(hits, samples, 1.0))
}

/// Comparison of the first-order band proxy with the exact distance to the
/// sphere `|z| = R`, on draws whose exact distance is at most `R/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyCheck {
    pub draws: usize,
    pub compared: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub fn sphere_proxy_check(radius: f64, draws: usize, key: Key) -> ProxyCheck {
    let p = Poly4::sphere(radius * radius);
    let parts = mc::chunked(key, draws, |rng, n| {
        let (mut k, mut lo, mut hi) = (0usize, f64::INFINITY, 0.0f64);
        for _ in 0..n {
            let z = box_point(rng);
            let exact = (vecmath::norm(&z) - radius).abs();
            if exact > radius / 2.0 || exact == 0.0 {
                continue;
            }
            let proxy = p.eval(&z).abs() / vecmath::norm(&p.grad(&z));
            let r = proxy / exact;
            k += 1;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (k, lo, hi)
    });
    parts.into_iter().fold(
        ProxyCheck { draws, compared: 0, min_ratio: f64::INFINITY, max_ratio: 0.0 },
        |acc, (k, lo, hi)| ProxyCheck {
            compared: acc.compared + k,
            min_ratio: acc.min_ratio.min(lo),
            max_ratio: acc.max_ratio.max(hi),
            ..acc
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub degree: u32,
    pub beta: f64,
    pub fractions: Vec<Estimate>,
    /// `max fraction · D`, the empirical constant.
    pub max_fraction_d: f64,
    pub mean_fraction_d: f64,
}

/// Random polynomials of degree `⌈D^{1/4}⌉` with `β = c·D^{-1}/d`.
pub fn ensemble_sweep(scale: &ScaleParams, members: usize, samples: usize, c: f64, key: Key) -> Result<EnsembleStats> {
    if members == 0 {
        return Err(Error::Config("ensemble must be nonempty".into()));
    }
    let degree = max_degree(scale);
    let beta = shell_beta(scale, c, degree);
    let fractions = (0..members)
        .map(|i| {
            let mut rng = key.with("poly").with_u64(i as u64).rng();
            let p = Poly4::random(degree, &mut rng);
            shell_fraction(&p, scale, beta, samples, key.with("draws").with_u64(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_fraction_d = fractions.iter().map(|e| e.value).fold(0.0, f64::max) * scale.d;
    let mean_fraction_d = fractions.iter().map(|e| e.value).sum::<f64>() / members as f64 * scale.d;
    Ok(EnsembleStats { degree, beta, fractions, max_fraction_d, mean_fraction_d })
}
