//! Fixed-size vector helpers for 3- and 4-vectors.

pub type Vec3 = [f64; 3];
pub type Vec4 = [f64; 4];

#[inline]
pub fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm<const N: usize>(a: &[f64; N]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn add<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn scale<const N: usize>(a: &[f64; N], s: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] * s)
}

/// Unit vector in the direction of `a`, or `None` for the zero vector.
pub fn normalize<const N: usize>(a: &[f64; N]) -> Option<[f64; N]> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Norm of the bivector `a ∧ b`, summed over all 2x2 minors.
pub fn wedge2_norm<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        for j in (i + 1)..N {
            let m = a[i] * b[j] - a[j] * b[i];
            s += m * m;
        }
    }
    s.sqrt()
}

/// Unsigned angle between two nonzero vectors, via `atan2(|a∧b|, a·b)`.
pub fn angle<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    wedge2_norm(a, b).atan2(dot(a, b))
}

/// Chord length on the unit sphere subtending the angle `theta`.
#[inline]
pub fn chord(theta: f64) -> f64 {
    2.0 * (0.5 * theta.min(std::f64::consts::PI)).sin()
}

/// Two unit vectors completing `u` (unit) to an orthonormal frame.
pub fn orthonormal_complement(u: &Vec3) -> (Vec3, Vec3) {
    let helper = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(&cross(u, &helper)).expect("helper is not parallel to u");
    let e2 = cross(u, &e1);
    (e1, e2)
}

/// The unit vector at angle `polar` from `center` (unit), rotated by `azimuth`
/// around it.
pub fn offset_direction(center: &Vec3, polar: f64, azimuth: f64) -> Vec3 {
    let (e1, e2) = orthonormal_complement(center);
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    std::array::from_fn(|i| cp * center[i] + sp * (ca * e1[i] + sa * e2[i]))
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// 4x4 determinant by cofactor expansion along the first row.
pub fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut total = 0.0;
    for col in 0..4 {
        let minor: [[f64; 3]; 3] = std::array::from_fn(|i| {
            let row = &m[i + 1];
            let mut out = [0.0; 3];
            let mut k = 0;
            for (j, v) in row.iter().enumerate() {
                if j != col {
                    out[k] = *v;
                    k += 1;
                }
            }
            out
        });
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][col] * det3(&minor);
    }
    total
}
