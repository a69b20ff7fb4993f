//! Six-frequency phase quantities: the resonance `μ₆`, the basket split, the
//! transverse gradient and the two dichotomies, plus samplers over cap lattices.

use serde::{Deserialize, Serialize};

use crate::caps::CapFamily;
use crate::error::{Error, Result};
use crate::mc::{self, Key, Rng};
use crate::scale::ScaleParams;
use crate::vecmath::{self, Vec3};

/// The six permutations of `{0, 1, 2}` in lexicographic order.
pub const PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Six frequencies; `xi[0..3]` carry `+`, `xi[3..6]` carry `−`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sextuple {
    pub xi: [Vec3; 6],
}

impl Sextuple {
    /// Checks `|ξ_m| ∈ [λ/2, 2λ]` for all six.
    pub fn new(xi: [Vec3; 6], scale: &ScaleParams) -> Result<Self> {
        for (m, v) in xi.iter().enumerate() {
            let n = vecmath::norm(v);
            if !(n >= scale.lambda / 2.0 && n <= 2.0 * scale.lambda) {
                return Err(Error::Domain(format!("|ξ_{}| = {n} is off-shell", m + 1)));
            }
        }
        Ok(Sextuple { xi })
    }

    /// `ξ_{3+π(m)} = ξ_m`.
    pub fn paired(first: [Vec3; 3], perm: [usize; 3]) -> Self {
        let mut xi = [[0.0; 3]; 6];
        xi[..3].copy_from_slice(&first);
        for m in 0..3 {
            xi[3 + perm[m]] = first[m];
        }
        Sextuple { xi }
    }
}

/// Order-independent sum of three terms: equal multisets give equal bits.
fn sum3(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[0] + v[1] + v[2]
}

/// `|Σ_{m≤3}|ξ_m|² − Σ_{m>3}|ξ_m|²|`, which is also `|∂_t Φ₆|`.
pub fn mu6(s: &Sextuple) -> f64 {
    let sq = |m: usize| vecmath::dot(&s.xi[m], &s.xi[m]);
    (sum3([sq(0), sq(1), sq(2)]) - sum3([sq(3), sq(4), sq(5)])).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basket {
    Ge,
    Lt,
}

/// `B_≥` iff `μ₆ ≥ c·λ^{1/2}` (ties go up).
pub fn classify_basket(s: &Sextuple, c: f64, scale: &ScaleParams) -> Basket {
    if mu6(s) >= c * scale.lambda.sqrt() {
        Basket::Ge
    } else {
        Basket::Lt
    }
}

/// `Σ_{m≤3} ξ′_m − Σ_{m>3} ξ′_m` with `ξ′ = (ξ₂, ξ₃)`.
pub fn grad_xprime(s: &Sextuple) -> [f64; 2] {
    std::array::from_fn(|k| {
        let c = |m: usize| s.xi[m][k + 1];
        sum3([c(0), c(1), c(2)]) - sum3([c(3), c(4), c(5)])
    })
}

/// Constants of the dichotomies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyParams {
    /// Basket constant `c` in `μ₆ ≥ c λ^{1/2}`.
    pub c: f64,
    /// Transversality constant `c₁` in `|∇_{x′}Φ| ≥ c₁ λα`.
    pub c1: f64,
    /// Pairing constant `C`.
    pub big_c: f64,
}

impl DichotomyParams {
    pub fn defaults(scale: &ScaleParams) -> Self {
        DichotomyParams { c: 1.0, c1: scale.c0 / 2.0, big_c: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dichotomy {
    Transversal,
    /// Witness `π`: `ξ_m` pairs with `ξ_{3+π(m)}`.
    Paired([usize; 3]),
    Neither,
}

fn pairs_under(s: &Sextuple, perm: &[usize; 3], angle_tol: f64, radial_tol: f64) -> bool {
    (0..3).all(|m| {
        let (a, b) = (&s.xi[m], &s.xi[3 + perm[m]]);
        vecmath::angle(a, b) <= angle_tol
            && (vecmath::norm(a) - vecmath::norm(b)).abs() <= radial_tol
    })
}

/// First permutation (lexicographic) pairing the blocks within `Cα` in angle and
/// `C·μ₆/λ` in radius; otherwise transversal if `|grad| ≥ c₁λα`.
pub fn tp_dichotomy(s: &Sextuple, scale: &ScaleParams, p: &DichotomyParams) -> Dichotomy {
    let angle_tol = p.big_c * scale.alpha;
    let radial_tol = p.big_c * mu6(s) / scale.lambda;
    if let Some(perm) = PERMUTATIONS.iter().find(|perm| pairs_under(s, perm, angle_tol, radial_tol)) {
        return Dichotomy::Paired(*perm);
    }
    let g = grad_xprime(s);
    if vecmath::norm(&g) >= p.c1 * scale.lambda_alpha() {
        Dichotomy::Transversal
    } else {
        Dichotomy::Neither
    }
}

/// Independent re-check of a pairing witness: chord lengths of unit vectors and
/// squared-norm differences instead of atan2 angles and norm differences.
pub fn verify_witness(s: &Sextuple, perm: [usize; 3], scale: &ScaleParams, big_c: f64) -> bool {
    let tol = big_c * scale.alpha;
    let chord_tol = if tol >= std::f64::consts::PI { 2.0 } else { 2.0 * (tol / 2.0).sin() };
    let radial_tol = big_c * mu6(s) / scale.lambda;
    let mut seen = [false; 3];
    for m in 0..3 {
        if perm[m] > 2 || seen[perm[m]] {
            return false;
        }
        seen[perm[m]] = true;
        let (a, b) = (s.xi[m], s.xi[3 + perm[m]]);
        let (na, nb) = (vecmath::dot(&a, &a).sqrt(), vecmath::dot(&b, &b).sqrt());
        let chord = vecmath::norm(&vecmath::sub(&vecmath::scale(&a, 1.0 / na), &vecmath::scale(&b, 1.0 / nb)));
        // generous ulp slack: the two routes round differently at the boundary
        if chord > chord_tol * (1.0 + 1e-9) + 1e-15 {
            return false;
        }
        if (na * na - nb * nb).abs() / (na + nb) > radial_tol * (1.0 + 1e-9) + 1e-12 {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RnLabel {
    Robust,
    Narrow,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnResult {
    pub label: RnLabel,
    /// Size of the largest single-linkage cluster of the six directions at α.
    pub max_cluster: usize,
    /// Largest number of other family centers within α of a family center.
    pub max_alpha_count: usize,
}

/// Sizes of the single-linkage clusters at threshold `alpha`, largest first.
pub fn clusters(dirs: &[Vec3], alpha: f64) -> Vec<usize> {
    let n = dirs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if vecmath::angle(&dirs[i], &dirs[j]) <= alpha {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut sizes = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        sizes[r] += 1;
    }
    let mut out: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn max_alpha_count(family: &CapFamily) -> usize {
    family.neighbor_counts(family.scale.alpha, true).into_iter().max().unwrap_or(0)
}

/// Robust when some α-cap around a family center holds more than `c*·D` other
/// centers; otherwise Narrow when five of the six directions form one cluster.
pub fn rn_classify(s: &Sextuple, family: &CapFamily, c_star: f64) -> RnResult {
    rn_with_count(s, family.scale.alpha, family.scale.d, c_star, max_alpha_count(family))
}

fn rn_with_count(s: &Sextuple, alpha: f64, d: f64, c_star: f64, count: usize) -> RnResult {
    let max_cluster = clusters(&s.xi, alpha)[0];
    let label = if count as f64 > c_star * d {
        RnLabel::Robust
    } else if max_cluster >= 5 {
        RnLabel::Narrow
    } else {
        RnLabel::Neither
    };
    RnResult { label, max_cluster, max_alpha_count: count }
}

/// How sextuples are drawn from a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Six independent caps.
    Random,
    /// Three caps, each used twice, second block randomly permuted.
    Paired,
}

impl std::str::FromStr for SampleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SampleMode::Random),
            "paired" => Ok(SampleMode::Paired),
            _ => Err(Error::Parse(format!("unknown sample mode `{s}`"))),
        }
    }
}

/// A frequency in cap `idx`: direction within `r` of the center, radius within
/// `λ^{-1/2}` of `λ`.
fn jittered(family: &CapFamily, idx: usize, rng: &mut Rng) -> Vec3 {
    let s = &family.scale;
    let polar = s.r * mc::uniform(rng, 0.0, 1.0).sqrt();
    let dir = vecmath::offset_direction(&family.caps[idx].center_dir, polar, mc::uniform(rng, 0.0, std::f64::consts::TAU));
    let radius = s.lambda + mc::uniform(rng, -1.0, 1.0) / s.lambda.sqrt();
    vecmath::scale(&dir, radius)
}

pub fn sample_sextuple(family: &CapFamily, mode: SampleMode, rng: &mut Rng) -> Sextuple {
    use rand::Rng as _;
    let n = family.len();
    let mut xi = [[0.0; 3]; 6];
    match mode {
        SampleMode::Random => {
            for v in xi.iter_mut() {
                *v = jittered(family, rng.random_range(0..n), rng);
            }
        }
        SampleMode::Paired => {
            let perm = PERMUTATIONS[rng.random_range(0..6)];
            for m in 0..3 {
                let idx = rng.random_range(0..n);
                xi[m] = jittered(family, idx, rng);
                xi[3 + perm[m]] = jittered(family, idx, rng);
            }
        }
    }
    Sextuple { xi }
}

/// Coverage rates of the dichotomies over sampled sextuples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub samples: usize,
    pub b_ge: u64,
    pub b_lt: u64,
    /// T/P labels among `B_<` draws.
    pub transversal: u64,
    pub paired: u64,
    pub neither: u64,
    /// Draws with `|grad| ≥ c₁λα`, over all draws.
    pub grad_large: u64,
    /// R/N labels among `B_<` draws.
    pub robust: u64,
    pub narrow: u64,
    pub rn_neither: u64,
    /// Witnesses that failed the independent re-check.
    pub witness_failures: u64,
    /// `min μ₆ / (λ^{1/2} α²)` over `B_≥` draws.
    pub min_dt_ratio: f64,
}

impl PhaseSweep {
    fn merge(mut self, o: PhaseSweep) -> Self {
        self.samples += o.samples;
        self.b_ge += o.b_ge;
        self.b_lt += o.b_lt;
        self.transversal += o.transversal;
        self.paired += o.paired;
        self.neither += o.neither;
        self.grad_large += o.grad_large;
        self.robust += o.robust;
        self.narrow += o.narrow;
        self.rn_neither += o.rn_neither;
        self.witness_failures += o.witness_failures;
        self.min_dt_ratio = self.min_dt_ratio.min(o.min_dt_ratio);
        self
    }

    pub fn neither_rate(&self) -> f64 {
        if self.b_lt == 0 {
            0.0
        } else {
            self.neither as f64 / self.b_lt as f64
        }
    }
}

pub fn phase_sweep(
    family: &CapFamily,
    mode: SampleMode,
    samples: usize,
    p: &DichotomyParams,
    c_star: f64,
    key: Key,
) -> Result<PhaseSweep> {
    if family.is_empty() {
        return Err(Error::Degenerate("cannot sample from an empty family".into()));
    }
    let scale = family.scale;
    let count = max_alpha_count(family);
    let dt_unit = scale.lambda.sqrt() * scale.alpha * scale.alpha;
    let parts = mc::chunked(key, samples, |rng, n| {
        let mut acc = PhaseSweep { samples: n, min_dt_ratio: f64::INFINITY, ..Default::default() };
        for _ in 0..n {
            let s = sample_sextuple(family, mode, rng);
            if vecmath::norm(&grad_xprime(&s)) >= p.c1 * scale.lambda_alpha() {
                acc.grad_large += 1;
            }
            match classify_basket(&s, p.c, &scale) {
                Basket::Ge => {
                    acc.b_ge += 1;
                    acc.min_dt_ratio = acc.min_dt_ratio.min(mu6(&s) / dt_unit);
                }
                Basket::Lt => {
                    acc.b_lt += 1;
                    match tp_dichotomy(&s, &scale, p) {
                        Dichotomy::Transversal => acc.transversal += 1,
                        Dichotomy::Paired(w) => {
                            acc.paired += 1;
                            if !verify_witness(&s, w, &scale, p.big_c) {
                                acc.witness_failures += 1;
                            }
                        }
                        Dichotomy::Neither => acc.neither += 1,
                    }
                    match rn_with_count(&s, scale.alpha, scale.d, c_star, count).label {
                        RnLabel::Robust => acc.robust += 1,
                        RnLabel::Narrow => acc.narrow += 1,
                        RnLabel::Neither => acc.rn_neither += 1,
                    }
                }
            }
        }
        acc
    });
    let init = PhaseSweep { min_dt_ratio: f64::INFINITY, ..Default::default() };
    Ok(parts.into_iter().fold(init, PhaseSweep::merge))
}

/// Largest `|μ₆| + |grad|` over `draws` random exactly-paired sextuples
/// (zero when the cancellation is exact).
pub fn paired_residual_sweep(scale: &ScaleParams, draws: usize, key: Key) -> f64 {
    mc::chunked(key, draws, |rng, n| {
        use rand::Rng as _;
        let mut worst = 0.0f64;
        for _ in 0..n {
            let first: [Vec3; 3] = std::array::from_fn(|_| {
                let r = mc::uniform(rng, 0.5, 2.0) * scale.lambda;
                vecmath::scale(&mc::unit_vector(rng), r)
            });
            let s = Sextuple::paired(first, PERMUTATIONS[rng.random_range(0..6)]);
            worst = worst.max(mu6(&s) + vecmath::norm(&grad_xprime(&s)));
        }
        worst
    })
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caps::{build_lattice, cluster_directions};
    use proptest::prelude::*;

    fn sc() -> ScaleParams {
        ScaleParams::with_lambda(4096.0).unwrap()
    }

    fn base(l: f64) -> [Vec3; 3] {
        [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.6 * l, 0.8 * l]]
    }

    #[test]
    fn mu6_examples() {
        let l = 4096.0;
        let s = Sextuple::paired(base(l), [2, 0, 1]);
        assert_eq!(mu6(&s), 0.0);
        assert_eq!(mu6(&Sextuple { xi: [[l, 0.0, 0.0]; 6] }), 0.0);
        let h = 1e-3;
        let mut t = Sextuple::paired(base(l), [0, 1, 2]);
        t.xi[0] = [l * (1.0 + h), 0.0, 0.0];
        let expect = l * l * ((1.0 + h) * (1.0 + h) - 1.0);
        assert!((mu6(&t) - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn basket_examples() {
        let s = sc();
        let l = s.lambda;
        assert_eq!(classify_basket(&Sextuple::paired(base(l), [0, 1, 2]), 1e-9, &s), Basket::Lt);
        // radial perturbation solving λ²((1+h)²−1) = 2cλ^{1/2}
        let c = 1.0;
        let h = (1.0 + 2.0 * c * l.sqrt() / (l * l)).sqrt() - 1.0;
        let mut t = Sextuple::paired(base(l), [0, 1, 2]);
        t.xi[0] = [l * (1.0 + h), 0.0, 0.0];
        assert_eq!(classify_basket(&t, c, &s), Basket::Ge);
        // tie goes to the upper basket
        let m = mu6(&t);
        assert_eq!(classify_basket(&t, m / l.sqrt(), &s), Basket::Ge);
    }

    #[test]
    fn grad_examples() {
        let s = sc();
        let l = s.lambda;
        assert_eq!(grad_xprime(&Sextuple::paired(base(l), [1, 2, 0])), [0.0, 0.0]);
        let mut t = Sextuple::paired(base(l), [0, 1, 2]);
        t.xi[0][1] += s.lambda_alpha();
        let g = grad_xprime(&t);
        assert!((vecmath::norm(&g) - s.lambda_alpha()).abs() < 1e-12 * l);
    }

    #[test]
    fn dichotomy_examples() {
        let s = sc();
        let p = DichotomyParams::defaults(&s);
        let l = s.lambda;
        let paired = Sextuple::paired(base(l), [0, 1, 2]);
        assert_eq!(tp_dichotomy(&paired, &s, &p), Dichotomy::Paired([0, 1, 2]));
        let shuffled = Sextuple::paired(base(l), [2, 0, 1]);
        assert_eq!(tp_dichotomy(&shuffled, &s, &p), Dichotomy::Paired([2, 0, 1]));
        assert!(verify_witness(&shuffled, [2, 0, 1], &s, p.big_c));
        assert!(!verify_witness(&shuffled, [0, 1, 2], &s, p.big_c));

        // break one pair by 10Cα, rotating out of the ξ′ plane's null direction
        let mut broken = paired;
        let u = vecmath::offset_direction(&[1.0, 0.0, 0.0], 10.0 * p.big_c * s.alpha, std::f64::consts::FRAC_PI_2);
        broken.xi[3] = vecmath::scale(&u, l);
        assert!(vecmath::norm(&grad_xprime(&broken)) >= p.c1 * s.lambda_alpha());
        assert_eq!(tp_dichotomy(&broken, &s, &p), Dichotomy::Transversal);
    }

    #[test]
    fn rn_examples() {
        let s = sc();
        let l = s.lambda;
        let sparse = CapFamily::from_directions(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], s).unwrap();
        let tight = cluster_directions(&[1.0, 1.0, 0.0], 6, s.alpha / 20.0);
        let narrow = Sextuple { xi: std::array::from_fn(|m| vecmath::scale(&tight[m], l)) };
        assert_eq!(rn_classify(&narrow, &sparse, 0.5).label, RnLabel::Narrow);
        let far = Sextuple { xi: [[l, 0.0, 0.0], [0.0, l, 0.0], [0.0, 0.0, l], [-l, 0.0, 0.0], [0.0, -l, 0.0], [0.0, 0.0, -l]] };
        assert_eq!(rn_classify(&far, &sparse, 0.5).label, RnLabel::Neither);
        let n = (2.0 * s.d).ceil() as usize + 1;
        let packed = CapFamily::from_directions(&cluster_directions(&[0.0, 0.0, 1.0], n, s.alpha / 4.0), s).unwrap();
        assert_eq!(rn_classify(&far, &packed, 0.5).label, RnLabel::Robust);
    }

    #[test]
    fn cluster_sizes() {
        let dirs = [[1.0, 0.0, 0.0], [1.0, 1e-4, 0.0], [1.0, 2e-4, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(clusters(&dirs, 1.5e-4), vec![3, 1]);
        assert_eq!(clusters(&dirs, 0.5e-4), vec![1, 1, 1, 1]);
    }

    #[test]
    fn sweep_is_deterministic_and_consistent() {
        let s = ScaleParams::derive(256.0, 4.0).unwrap();
        let fam = build_lattice(&s).unwrap();
        let p = DichotomyParams::defaults(&s);
        for mode in [SampleMode::Random, SampleMode::Paired] {
            let a = phase_sweep(&fam, mode, 5000, &p, 0.5, Key::new(1)).unwrap();
            assert_eq!(a, phase_sweep(&fam, mode, 5000, &p, 0.5, Key::new(1)).unwrap());
            assert_eq!(a.b_ge + a.b_lt, 5000);
            assert_eq!(a.transversal + a.paired + a.neither, a.b_lt);
            assert_eq!(a.robust + a.narrow + a.rn_neither, a.b_lt);
            assert_eq!(a.witness_failures, 0);
        }
    }

    #[test]
    fn paired_residuals_vanish() {
        assert_eq!(paired_residual_sweep(&sc(), 50_000, Key::new(2)), 0.0);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-2048.0f64..2048.0)
    }

    proptest! {
        #[test]
        fn paired_sextuples_cancel(a in vec3(), b in vec3(), c in vec3(), k in 0usize..6) {
            let s = Sextuple::paired([a, b, c], PERMUTATIONS[k]);
            prop_assert_eq!(mu6(&s), 0.0);
            prop_assert_eq!(grad_xprime(&s), [0.0, 0.0]);
        }

        #[test]
        fn mu6_symmetries(xi in prop::array::uniform6(vec3()), k in 0usize..6, j in 0usize..6) {
            let s = Sextuple { xi };
            let (p, q) = (PERMUTATIONS[k], PERMUTATIONS[j]);
            let mut t = s;
            for m in 0..3 {
                t.xi[p[m]] = s.xi[m];
                t.xi[3 + q[m]] = s.xi[3 + m];
            }
            let swapped = Sextuple { xi: [s.xi[3], s.xi[4], s.xi[5], s.xi[0], s.xi[1], s.xi[2]] };
            prop_assert_eq!(mu6(&s), mu6(&t));
            prop_assert_eq!(mu6(&s), mu6(&swapped));
        }

        #[test]
        fn witnesses_round_trip(seed in 0u64..500) {
            let s = ScaleParams::derive(1024.0, 16.0).unwrap();
            let fam = CapFamily::from_directions(&cluster_directions(&[0.2, 0.3, 0.9], 3, 0.5), s).unwrap();
            let mut rng = Key::new(seed).rng();
            let x = sample_sextuple(&fam, SampleMode::Paired, &mut rng);
            let p = DichotomyParams { big_c: 1e4, ..DichotomyParams::defaults(&s) };
            if let Dichotomy::Paired(w) = tp_dichotomy(&x, &s, &p) {
                prop_assert!(verify_witness(&x, w, &s, p.big_c));
            }
        }
    }
}
