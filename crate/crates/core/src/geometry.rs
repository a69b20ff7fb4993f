//! Paraboloid normals, angular metrics, and the wedge / Gram / minor
//! computations behind the broad rank-3 geometry.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::ScaleParams;
use crate::vecmath::{self, Vec3, Vec4};

/// A frequency point ξ ∈ ℝ³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency(pub Vec3);

impl Frequency {
    pub fn norm(&self) -> f64 {
        vecmath::norm(&self.0)
    }

    /// `|ξ| ∈ [λ/2, 2λ]`.
    pub fn is_on_shell(&self, scale: &ScaleParams) -> bool {
        let n = self.norm();
        n >= 0.5 * scale.lambda && n <= 2.0 * scale.lambda
    }

    pub fn direction(&self) -> Option<Vec3> {
        vecmath::normalize(&self.0)
    }
}

/// Unit normal to the paraboloid `τ = |ξ|²` in ℝ⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal4(pub Vec4);

/// `n(ξ) = (−2ξ, 1) / √(1 + 4|ξ|²)`.
pub fn normal(xi: &Frequency) -> Normal4 {
    let s2 = vecmath::dot(&xi.0, &xi.0);
    let w = (1.0 + 4.0 * s2).sqrt();
    Normal4([-2.0 * xi.0[0] / w, -2.0 * xi.0[1] / w, -2.0 * xi.0[2] / w, 1.0 / w])
}

/// Leading-order normal `a(ξ) = (−ξ, 1/2) / |ξ|`.
pub fn leading_normal(xi: &Frequency) -> Result<Vec4> {
    let s = xi.norm();
    if s == 0.0 {
        return Err(Error::Domain("leading normal undefined at xi = 0".into()));
    }
    Ok([-xi.0[0] / s, -xi.0[1] / s, -xi.0[2] / s, 0.5 / s])
}

/// The correction `n(ξ) − a(ξ)`, evaluated without cancellation.
///
/// With `s = |ξ|`, `w = √(1+4s²)` and `k = 1 / (s·w·(2s + w))`, the spatial part
/// is `ξ·k` and the last component is `−k/2`.
pub fn normal_residual_vector(xi: &Frequency) -> Result<Vec4> {
    let s = xi.norm();
    if s == 0.0 {
        return Err(Error::Domain("normal residual undefined at xi = 0".into()));
    }
    let w = (1.0 + 4.0 * s * s).sqrt();
    let k = 1.0 / (s * w * (2.0 * s + w));
    Ok([xi.0[0] * k, xi.0[1] * k, xi.0[2] * k, -0.5 * k])
}

/// `|n(ξ) − (−ξ, 1/2)/|ξ||`, which decays like `|ξ|^{-2}/8`.
pub fn normal_residual(xi: &Frequency) -> Result<f64> {
    normal_residual_vector(xi).map(|v| vecmath::norm(&v))
}

/// `angle(n(ξ), n(η)) / angle(ξ, η)`; 1 when the directions coincide.
///
/// The ratio is not bounded near coincident directions when `|ξ| ≠ |η|`:
/// the last normal component differs by about `|1/(2|ξ|) − 1/(2|η|)|` even at
/// zero angular separation.
pub fn bilipschitz_ratio(xi: &Frequency, eta: &Frequency) -> Result<f64> {
    if xi.norm() == 0.0 || eta.norm() == 0.0 {
        return Err(Error::Domain("bilipschitz ratio needs nonzero frequencies".into()));
    }
    let theta = vecmath::angle(&xi.0, &eta.0);
    if theta == 0.0 {
        return Ok(1.0);
    }
    Ok(vecmath::angle(&normal(xi).0, &normal(eta).0) / theta)
}

/// `‖a ∧ b ∧ c‖` in Λ³ℝ⁴, from the four 3×3 minors (Cauchy–Binet).
pub fn wedge3_norm(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    let mut s = 0.0;
    for skip in 0..4 {
        let pick = |v: &Vec4| -> Vec3 {
            let mut out = [0.0; 3];
            let mut k = 0;
            for (i, x) in v.iter().enumerate() {
                if i != skip {
                    out[k] = *x;
                    k += 1;
                }
            }
            out
        };
        let m = vecmath::det3(&[pick(a), pick(b), pick(c)]);
        s += m * m;
    }
    s.sqrt()
}

/// Determinant of the Gram matrix of three vectors of any dimension.
pub fn gram_det<const N: usize>(a: &[f64; N], b: &[f64; N], c: &[f64; N]) -> f64 {
    let v = [a, b, c];
    let g: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| vecmath::dot(v[i], v[j])));
    vecmath::det3(&g)
}

/// Gram determinant of three unit 3-vectors from pairwise cosines:
/// `1 − cos²θ_ab − cos²θ_ac − cos²θ_bc + 2 cosθ_ab cosθ_ac cosθ_bc`.
pub fn gram_det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = vecmath::dot(a, b);
    let ac = vecmath::dot(a, c);
    let bc = vecmath::dot(b, c);
    1.0 - ab * ab - ac * ac - bc * bc + 2.0 * ab * ac * bc
}

/// Brute-force 3×3 determinant of the Gram matrix; the independent route for
/// [`gram_det3`].
pub fn gram_det3_direct(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    gram_det(a, b, c)
}

/// The crowding lower bound `1 − m·α²` for a triple with `m` angles ≤ α.
pub fn gram_crowding_bound(a: &Vec3, b: &Vec3, c: &Vec3, alpha: f64) -> (usize, f64) {
    let m = [(a, b), (a, c), (b, c)]
        .iter()
        .filter(|(u, v)| vecmath::angle(u, v) <= alpha)
        .count();
    (m, 1.0 - m as f64 * alpha * alpha)
}

/// `|det[a₁ a₂ a₃ ρ]|`.
pub fn mixed_minor4(a1: &Vec4, a2: &Vec4, a3: &Vec4, rho: &Vec4) -> f64 {
    // det of the column matrix equals det of its transpose
    vecmath::det4(&[*a1, *a2, *a3, *rho]).abs()
}

/// All 20 index triples `i < j < k` of `0..6`.
pub fn triples6() -> impl Iterator<Item = [usize; 3]> {
    (0..6).flat_map(|i| ((i + 1)..6).flat_map(move |j| ((j + 1)..6).map(move |k| [i, j, k])))
}

/// Result of evaluating the `Broad₃` functional at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Broad3 {
    /// `min |F_iF_jF_k|^{1/3} / ‖n_i∧n_j∧n_k‖^{1/3}` over triples with a nonzero wedge.
    pub value: f64,
    /// The minimizing triple for `value`.
    pub argmin: [usize; 3],
    /// `min_{i<j<k} |F_iF_jF_k|^{1/3}`.
    pub min_triple: f64,
    /// `Q^{1/3} = (Π_m |F_m|^{1/2})^{1/3}`.
    pub q_cube_root: f64,
    /// Number of triples skipped for a vanishing wedge norm.
    pub skipped: usize,
}

impl Broad3 {
    /// `min_triple ≤ Q^{1/3}` up to a few ulps of rounding.
    pub fn min_triple_bound_holds(&self) -> bool {
        self.min_triple <= self.q_cube_root * (1.0 + 16.0 * f64::EPSILON)
    }
}

pub fn broad3(values: &[Complex64; 6], normals: &[Normal4; 6]) -> Result<Broad3> {
    let mags: [f64; 6] = std::array::from_fn(|m| values[m].norm());
    let mut best = f64::INFINITY;
    let mut argmin = [0, 1, 2];
    let mut min_triple = f64::INFINITY;
    let mut skipped = 0;
    for t in triples6() {
        let prod = (mags[t[0]] * mags[t[1]] * mags[t[2]]).cbrt();
        min_triple = min_triple.min(prod);
        let w = wedge3_norm(&normals[t[0]].0, &normals[t[1]].0, &normals[t[2]].0);
        if w > 0.0 {
            let v = prod / w.cbrt();
            if v < best {
                best = v;
                argmin = t;
            }
        } else {
            skipped += 1;
        }
    }
    if skipped == 20 {
        return Err(Error::Degenerate("all 20 wedge norms vanish".into()));
    }
    let q_cube_root = mags.iter().map(|m| m.sqrt()).product::<f64>().cbrt();
    Ok(Broad3 { value: best, argmin, min_triple, q_cube_root, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{unit_vector, Key};
    use crate::vecmath::norm;
    use proptest::prelude::*;

    #[test]
    fn normal_at_origin_and_on_axis() {
        assert_eq!(normal(&Frequency([0.0; 3])).0, [0.0, 0.0, 0.0, 1.0]);
        let lam = 1024.0;
        let n = normal(&Frequency([lam, 0.0, 0.0])).0;
        let w = (1.0 + 4.0 * lam * lam).sqrt();
        let want = [-2.0 * lam / w, 0.0, 0.0, 1.0 / w];
        for i in 0..4 {
            assert!((n[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_matches_naive_difference_and_decays() {
        let xi = Frequency([3.0, -4.0, 12.0]);
        let n = normal(&xi).0;
        let a = leading_normal(&xi).unwrap();
        let naive = norm(&vecmath::sub(&n, &a));
        let stable = normal_residual(&xi).unwrap();
        assert!((naive - stable).abs() < 1e-12);
        assert!(normal_residual(&Frequency([0.0; 3])).is_err());
        let lam = 1024.0;
        let r = normal_residual(&Frequency([lam, 0.0, 0.0])).unwrap();
        assert!(r > 0.0 && r <= 0.2 / (lam * lam));
    }

    #[test]
    fn bilipschitz_conventions() {
        let xi = Frequency([100.0, 20.0, -3.0]);
        assert_eq!(bilipschitz_ratio(&xi, &xi).unwrap(), 1.0);
        assert!(bilipschitz_ratio(&xi, &Frequency([0.0; 3])).is_err());
        let far = Frequency([-20.0, 100.0, 7.0]);
        let r = bilipschitz_ratio(&xi, &far).unwrap();
        assert!((0.5..=2.0).contains(&r));
    }

    #[test]
    fn bilipschitz_ratio_blows_up_for_nearby_directions_at_different_radii() {
        let lam = 256.0;
        let theta: f64 = 1e-7;
        let xi = Frequency([lam, 0.0, 0.0]);
        let eta = Frequency([1.5 * lam * theta.cos(), 1.5 * lam * theta.sin(), 0.0]);
        assert!(bilipschitz_ratio(&xi, &eta).unwrap() > 2.0);
    }

    #[test]
    fn wedge_of_orthonormal_and_degenerate_triples() {
        let e = |i: usize| -> Vec4 { std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }) };
        assert!((wedge3_norm(&e(0), &e(1), &e(3)) - 1.0).abs() < 1e-15);
        assert_eq!(wedge3_norm(&e(0), &e(0), &e(2)), 0.0);
    }

    #[test]
    fn gram_examples() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let z = [0.0, 0.0, 1.0];
        assert_eq!(gram_det3(&x, &y, &z), 1.0);
        assert_eq!(gram_det3(&x, &x, &z), 0.0);
        assert_eq!(gram_det3_direct(&x, &y, &z), 1.0);
    }

    #[test]
    fn gram_closed_form_matches_direct_determinant() {
        let mut rng = Key::new(5).with("gram-unit").rng();
        for _ in 0..100_000 {
            let (a, b, c) = (unit_vector(&mut rng), unit_vector(&mut rng), unit_vector(&mut rng));
            assert!((gram_det3(&a, &b, &c) - gram_det3_direct(&a, &b, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_minor_examples() {
        let e = |i: usize| -> Vec4 { std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }) };
        assert_eq!(mixed_minor4(&e(0), &e(1), &e(2), &e(3)), 1.0);
        let in_span = vecmath::add(&vecmath::scale(&e(0), 2.0), &e(2));
        assert_eq!(mixed_minor4(&e(0), &e(1), &e(2), &in_span), 0.0);
    }

    #[test]
    fn broad3_symmetric_case_zero_factor_and_degenerate() {
        // six unit normals built from an orthonormal frame of ℝ⁴ and its negatives
        let e = |i: usize, s: f64| -> Normal4 { Normal4(std::array::from_fn(|j| if i == j { s } else { 0.0 })) };
        let normals = [e(0, 1.0), e(1, 1.0), e(2, 1.0), e(3, 1.0), e(0, -1.0), e(1, -1.0)];
        let ones = [Complex64::new(1.0, 0.0); 6];
        let b = broad3(&ones, &normals).unwrap();
        assert!((b.value - 1.0).abs() < 1e-15);
        assert_eq!(b.min_triple, 1.0);
        assert!(b.min_triple_bound_holds());

        let mut vals = ones;
        vals[2] = Complex64::new(0.0, 0.0);
        assert_eq!(broad3(&vals, &normals).unwrap().min_triple, 0.0);

        let same = [e(0, 1.0); 6];
        assert!(matches!(broad3(&ones, &same), Err(Error::Degenerate(_))));
    }

    #[test]
    fn there_are_twenty_triples() {
        assert_eq!(triples6().count(), 20);
    }

    fn vec4() -> impl Strategy<Value = Vec4> {
        prop::array::uniform4(-1.0f64..1.0)
    }

    fn unit3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-1.0f64..1.0)
            .prop_filter("nonzero", |v| norm(v) > 1e-3)
            .prop_map(|v| vecmath::normalize(&v).unwrap())
    }

    proptest! {
        #[test]
        fn normals_are_unit(x in -1e6f64..1e6, y in -1e6f64..1e6, z in -1e6f64..1e6) {
            prop_assert!((norm(&normal(&Frequency([x, y, z])).0) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn wedge_squared_is_gram_determinant(a in vec4(), b in vec4(), c in vec4()) {
            let w = wedge3_norm(&a, &b, &c);
            prop_assert!((w * w - gram_det(&a, &b, &c)).abs() < 1e-12);
        }

        #[test]
        fn sphere_angle_is_a_metric(a in unit3(), b in unit3(), c in unit3()) {
            let ab = vecmath::angle(&a, &b);
            prop_assert_eq!(ab, vecmath::angle(&b, &a));
            prop_assert_eq!(vecmath::angle(&a, &a), 0.0);
            prop_assert!(ab <= vecmath::angle(&a, &c) + vecmath::angle(&c, &b) + 1e-12);
        }
    }
}
