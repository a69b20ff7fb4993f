//! The experiment registry. Every experiment maps one `(λ, config, key)` to an
//! [`ExperimentReport`]; ladders fit a headline result across λ.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng as _;

use super::config::Config;
use super::fit::{fit_slope, LadderFit};
use super::probe::{decoupling_probe, DEFAULT_GRID_FACTOR};
use super::report::{ExperimentReport, Verdict};
use crate::caps::{self, CapFamily, SphereGrid};
use crate::error::{Error, Result};
use crate::geometry::{self, Frequency, Normal4};
use crate::ledger;
use crate::mc::{self, Key, Rng};
use crate::phase::{self, DichotomyParams, SampleMode};
use crate::scale::ScaleParams;
use crate::shell::{self, Poly4};
use crate::tubes::{self, MultiplicityField, Tube};
use crate::vecmath::{self, chord, Vec3};

/// Subcommand an experiment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Ledger,
    Geometry,
    Caps,
    Tubes,
    Shell,
    Phase,
    Probe,
}

pub struct Ctx<'a> {
    pub scale: ScaleParams,
    pub cfg: &'a Config,
    pub key: Key,
    pub seed: u64,
}

pub struct Experiment {
    pub id: &'static str,
    pub group: Group,
    /// Empty for experiments that do not depend on λ.
    pub lambdas: &'static [f64],
    /// Result fitted across a ladder, with the predicted slope.
    pub headline: Option<(&'static str, f64)>,
    pub citation: &'static str,
    run: fn(&Ctx) -> Result<ExperimentReport>,
}

const ONE_MILLION: usize = 1_000_000;

/// Band constant `c` in `β = c·D^{-1}/d`; keeps the band well inside the box.
pub const DEFAULT_SHELL_C: f64 = 0.1;

/// Placeholder scale for experiments that do not depend on λ.
pub const UNUSED_LAMBDA: f64 = 1024.0;

fn pow2(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

pub fn registry() -> Vec<Experiment> {
    use Group::*;
    vec![
        Experiment { id: "ledger", group: Ledger, lambdas: &[], headline: None, citation: "exponent balance and derivation checkpoints", run: run_ledger },
        Experiment { id: "scale-identities", group: Geometry, lambdas: &[16.0, 256.0, 4096.0, 16384.0], headline: None, citation: "definitions of r, ρ, D, α and Q_λ", run: run_scale_identities },
        Experiment { id: "normal-unit", group: Geometry, lambdas: &[], headline: None, citation: "unit normal of the paraboloid", run: run_normal_unit },
        Experiment { id: "normal-residual", group: Geometry, lambdas: &[64.0, 256.0, 1024.0, 4096.0, 16384.0], headline: Some(("residual_axis", -2.0)), citation: "normal asymptotics: |n(ξ) − (−ξ, 1/2)/|ξ|| ≲ |ξ|^{-2}", run: run_normal_residual },
        Experiment { id: "bilipschitz", group: Geometry, lambdas: &[256.0, 1024.0, 4096.0], headline: Some(("deviation_fixed_angle", -2.0)), citation: "angular bilipschitz property of the normal map with constant 1/2", run: run_bilipschitz },
        Experiment { id: "wedge-gram", group: Geometry, lambdas: &[], headline: None, citation: "‖a∧b∧c‖² equals the 3×3 Gram determinant", run: run_wedge_gram },
        Experiment { id: "wedge-threshold", group: Geometry, lambdas: &[256.0, 4096.0], headline: None, citation: "broad triples: ‖n_i∧n_j∧n_k‖ ≥ α²/16", run: run_wedge_threshold },
        Experiment { id: "gram-closed-form", group: Geometry, lambdas: &[], headline: None, citation: "closed form of the 3×3 Gram determinant", run: run_gram_closed_form },
        Experiment { id: "gram-crowding", group: Geometry, lambdas: &[256.0, 4096.0], headline: None, citation: "Gram control for crowding: det G ≥ 1 − mα²", run: run_gram_crowding },
        Experiment { id: "mixed-minor", group: Geometry, lambdas: &[64.0, 256.0, 1024.0, 4096.0], headline: Some(("max_minor", -11.0 / 3.0)), citation: "mixed minors with the normal correction ≲ λ^{-3-2/3}", run: run_mixed_minor },
        Experiment { id: "broad3-min-triple", group: Geometry, lambdas: &[], headline: None, citation: "min-triple bound min|F_iF_jF_k|^{1/3} ≤ (Π|F_m|^{1/2})^{1/3}", run: run_broad3 },
        Experiment { id: "cap-lattice", group: Caps, lambdas: &[64.0, 256.0, 1024.0, 4096.0], headline: Some(("cap_count", 4.0 / 3.0)), citation: "number of caps ≍ λ^{4/3}", run: run_cap_lattice },
        Experiment { id: "coloring", group: Caps, lambdas: &[64.0, 256.0, 4096.0], headline: None, citation: "angular partition into O(D) classes by greedy coloring", run: run_coloring },
        Experiment { id: "annulus", group: Caps, lambdas: &[4096.0], headline: None, citation: "packing in thin rings: ≲ kD caps at angle ≈ kα", run: run_annulus },
        Experiment { id: "four-of-six", group: Caps, lambdas: &[4096.0], headline: None, citation: "four of six directions are pairwise α-separated", run: run_four_of_six },
        Experiment { id: "tube-volume", group: Tubes, lambdas: &[64.0, 128.0, 256.0, 512.0, 1024.0], headline: Some(("mc_volume", -3.0)), citation: "volume of one tube ≍ ρ³λ^{-3/2} = λ^{-3}", run: run_tube_volume },
        Experiment { id: "tube-degenerate", group: Tubes, lambdas: &[256.0], headline: None, citation: "static tube volume (4/3)π(ρ/2)³λ^{-3/2}", run: run_tube_degenerate },
        Experiment { id: "boundary-layer", group: Tubes, lambdas: &[256.0], headline: None, citation: "boundary layer |t| ≤ λ^{-3/2}/16 has bounded relative measure", run: run_boundary_layer },
        Experiment { id: "pair-overlap", group: Tubes, lambdas: &[256.0], headline: None, citation: "pairwise overlap |T∩T′| ≲ ρ³·min{ρ/(λδ), λ^{-3/2}}", run: run_pair_overlap },
        Experiment { id: "l2-sum", group: Tubes, lambdas: &[64.0, 256.0, 1024.0, 4096.0], headline: Some(("sqrt_S", -7.0 / 6.0)), citation: "‖Σ 1_T‖_{L²} ≲ λ^{-7/6}D^{1/4} (strong form λ^{-3/2}D^{1/2})", run: run_l2_sum },
        Experiment { id: "multiplicity", group: Tubes, lambdas: &[64.0, 256.0, 1024.0, 4096.0], headline: Some(("exceptional_fraction", -5.0 / 8.0)), citation: "averaged robust Kakeya: exceptional set ≲ λ^{-5/8}", run: run_multiplicity },
        Experiment { id: "cauchy-schwarz", group: Tubes, lambdas: &[256.0], headline: None, citation: "pointwise |Σ F_Θ|² ≤ M·Σ|F_Θ|² and its integral form", run: run_cauchy_schwarz },
        Experiment { id: "anisotropic-roundtrip", group: Shell, lambdas: &[], headline: None, citation: "anisotropic rescaling of Q_λ to the unit box", run: run_anisotropic },
        Experiment { id: "shell-hyperplane", group: Shell, lambdas: &[4096.0], headline: None, citation: "β-neighborhood of a hyperplane has measure 2β", run: run_shell_hyperplane },
        Experiment { id: "shell-sphere-proxy", group: Shell, lambdas: &[], headline: None, citation: "first-order band |P| ≤ β|∇P| as a distance proxy", run: run_shell_proxy },
        Experiment { id: "shell-fraction", group: Shell, lambdas: &[256.0, 512.0, 1024.0, 2048.0, 4096.0], headline: Some(("mean_fraction", -1.0 / 12.0)), citation: "shell measure ≲ C·D^{-1} for deg P ≤ D^{1/4}", run: run_shell_ensemble },
        Experiment { id: "paired-cancellation", group: Phase, lambdas: &[4096.0], headline: None, citation: "μ₆ and ∇_{x′}Φ vanish on paired sextuples", run: run_paired_cancellation },
        Experiment { id: "phase-dichotomy", group: Phase, lambdas: &[4096.0], headline: None, citation: "transversal/paired and robust/narrow dichotomies on B_<", run: run_phase_dichotomy },
        Experiment { id: "decoupling-probe", group: Probe, lambdas: &[16.0, 32.0, 64.0], headline: Some(("ratio", 0.0)), citation: "L⁶ decoupling ratio (observational only)", run: run_probe },
    ]
}

pub fn find(id: &str) -> Result<Experiment> {
    registry().into_iter().find(|e| e.id == id).ok_or_else(|| Error::UnknownExperiment(id.into()))
}

pub fn group(g: Group) -> Vec<Experiment> {
    registry().into_iter().filter(|e| e.group == g).collect()
}

/// Default c₀ for experiments that are vacuous at the global default, where
/// α-neighborhoods of a lattice cap are empty.
pub fn default_c0(id: &str) -> Option<f64> {
    match id {
        "coloring" | "annulus" | "four-of-six" | "phase-dichotomy" => Some(4.0),
        "multiplicity" => Some(16.0),
        _ => None,
    }
}

/// Runs `exp` at a single λ (ignored for λ-free experiments).
pub fn run_experiment(exp: &Experiment, lambda: f64, cfg: &Config) -> Result<ExperimentReport> {
    let c0 = cfg.c0.or(default_c0(exp.id)).unwrap_or(cfg.c0());
    let scale = ScaleParams::derive(lambda, c0)?;
    let seed = cfg.seed();
    let mut key = Key::new(seed).with(exp.id);
    if !exp.lambdas.is_empty() {
        key = key.with_f64(lambda);
    }
    let start = Instant::now();
    let mut report = (exp.run)(&Ctx { scale, cfg, key, seed })?;
    if !exp.lambdas.is_empty() && !report.params.contains_key("lambda") {
        report = report.scale(&scale);
    }
    report.wall_time_s = cfg.timing().then(|| start.elapsed().as_secs_f64());
    Ok(report)
}

/// Per-λ reports plus, for experiments with a headline, a ladder fit and an
/// aggregate report.
pub fn run_ladder(exp: &Experiment, lambdas: Option<&[f64]>, cfg: &Config) -> Result<(Vec<ExperimentReport>, Option<LadderFit>)> {
    if exp.lambdas.is_empty() {
        return Ok((vec![run_experiment(exp, UNUSED_LAMBDA, cfg)?], None));
    }
    let ls: Vec<f64> = lambdas.map(<[f64]>::to_vec).unwrap_or_else(|| exp.lambdas.to_vec());
    let start = Instant::now();
    let mut reports = ls.iter().map(|&l| run_experiment(exp, l, cfg)).collect::<Result<Vec<_>>>()?;
    let mut fit = None;
    if let Some((name, predicted)) = exp.headline {
        let points: Vec<(f64, f64)> = reports
            .iter()
            .filter_map(|r| Some((r.params.get("lambda")?.as_f64()?, r.get(name)?)))
            .collect();
        let mut agg = ExperimentReport::new(&format!("{}/ladder", exp.id), cfg.seed(), exp.citation)
            .param("lambdas", ls.clone())
            .param("fitted", name);
        agg.predict(&format!("log-log slope of {name}"), Some(predicted));
        match fit_slope(&points) {
            Ok(f) => {
                agg.push("slope", f.slope);
                agg.push("intercept", f.intercept);
                agg.push("r_squared", f.r_squared);
                fit = Some(f);
            }
            Err(e) => {
                agg = agg.param("fit_error", e.to_string());
            }
        }
        agg.wall_time_s = cfg.timing().then(|| start.elapsed().as_secs_f64());
        reports.push(agg);
    }
    Ok((reports, fit))
}

fn samples(c: &Ctx, default: usize) -> usize {
    c.cfg.samples_or(default)
}

fn report(c: &Ctx, id: &str) -> ExperimentReport {
    let exp = registry().into_iter().find(|e| e.id == id).expect("registered");
    ExperimentReport::new(id, c.seed, exp.citation)
}

fn scaled_report(c: &Ctx, id: &str) -> ExperimentReport {
    report(c, id).scale(&c.scale)
}

/// Random frequency with magnitude uniform in `[λ/2, 2λ]`.
fn on_shell(rng: &mut Rng, lambda: f64) -> Vec3 {
    vecmath::scale(&mc::unit_vector(rng), mc::uniform(rng, 0.5, 2.0) * lambda)
}

fn random_direction_near(rng: &mut Rng, center: &Vec3, max_angle: f64) -> Vec3 {
    let polar = max_angle * mc::uniform(rng, 0.0, 1.0).sqrt();
    vecmath::offset_direction(center, polar, mc::uniform(rng, 0.0, std::f64::consts::TAU))
}

fn run_ledger(c: &Ctx) -> Result<ExperimentReport> {
    let rows = ledger::checkpoint_table()?;
    let mut r = report(c, "ledger");
    let mismatches: Vec<String> = rows.iter().filter(|x| !x.matches).map(|x| x.item.clone()).collect();
    r.push("checkpoints", rows.len() as f64);
    r.push("mismatches", mismatches.len() as f64);
    let sums = ledger::Scenario::standard()
        .iter()
        .map(|sc| Ok(serde_json::json!({ "name": sc.name, "sigma": ledger::sum_exponents(sc)?.to_string() })))
        .collect::<Result<Vec<_>>>()?;
    r = r.param("scenarios", sums).param("table", serde_json::to_value(&rows)?).param("mismatched", mismatches.clone());
    r.predict("every recomputed exponent equals its stated value", Some(0.0));
    r.verdict = Verdict::from_check(mismatches.is_empty());
    Ok(r)
}

fn run_scale_identities(c: &Ctx) -> Result<ExperimentReport> {
    let s = &c.scale;
    let l = s.lambda;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let errs = [
        rel(s.r, l.powf(-2.0 / 3.0)),
        rel(s.rho, l.powf(-0.5)),
        rel(s.d, l.powf(1.0 / 12.0)),
        rel(s.alpha, s.c0 * l.powf(-5.0 / 8.0)),
        rel(s.alpha, s.c0 * s.r * s.d.sqrt()),
        rel(s.alpha / s.r, s.c0 * s.d.sqrt()),
        rel(s.t_half, l.powf(-1.5) / 2.0),
        rel(s.x_half, l.powf(-0.5) / 2.0),
        rel(s.x_half, s.rho / 2.0),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let mut r = scaled_report(c, "scale-identities");
    r.push("max_relative_error", worst);
    r.predict("identities hold to 1e-12", Some(1e-12));
    r.verdict = Verdict::from_check(worst <= 1e-12);
    Ok(r)
}

fn run_normal_unit(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let worst = mc::chunked(c.key, n, |rng, k| {
        (0..k)
            .map(|_| {
                let mag = 10f64.powf(mc::uniform(rng, -3.0, 6.0));
                let xi = Frequency(vecmath::scale(&mc::unit_vector(rng), mag));
                (vecmath::norm(&geometry::normal(&xi).0) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let mut r = report(c, "normal-unit").param("samples", n);
    r.push("max_unit_deviation", worst);
    r.predict("| |n(ξ)| − 1 | ≤ 1e-12", Some(1e-12));
    r.verdict = Verdict::from_check(worst <= 1e-12);
    Ok(r)
}

fn run_normal_residual(c: &Ctx) -> Result<ExperimentReport> {
    let l = c.scale.lambda;
    let n = samples(c, 100_000);
    let axis = geometry::normal_residual(&Frequency([l, 0.0, 0.0]))?;
    let worst = mc::chunked(c.key, n, |rng, k| {
        (0..k)
            .map(|_| {
                let xi = on_shell(rng, l);
                let s = vecmath::norm(&xi);
                geometry::normal_residual(&Frequency(xi)).map(|v| v * s * s).unwrap_or(f64::NAN)
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let mut r = scaled_report(c, "normal-residual").param("samples", n);
    r.push("residual_axis", axis);
    r.push("residual_axis_times_lambda2", axis * l * l);
    r.push("max_residual_times_norm2", worst);
    r.predict("residual·|ξ|² bounded (leading constant 1/8)", Some(0.125));
    Ok(r)
}

fn run_bilipschitz(c: &Ctx) -> Result<ExperimentReport> {
    let l = c.scale.lambda;
    let n = samples(c, 100_000);
    let parts = mc::chunked(c.key, n, |rng, k| {
        let (mut lo, mut hi, mut bad) = (f64::INFINITY, 0.0f64, 0u64);
        for _ in 0..k {
            let a = Frequency(on_shell(rng, l));
            let b = Frequency(on_shell(rng, l));
            let q = geometry::bilipschitz_ratio(&a, &b).unwrap_or(f64::NAN);
            lo = lo.min(q);
            hi = hi.max(q);
            if !(0.5..=2.0).contains(&q) {
                bad += 1;
            }
        }
        (lo, hi, bad)
    });
    let (lo, hi, bad) = parts.into_iter().fold((f64::INFINITY, 0.0f64, 0u64), |a, b| (a.0.min(b.0), a.1.max(b.1), a.2 + b.2));
    // equal radii at fixed separation 0.1: ratio → 1
    let a = Frequency([l, 0.0, 0.0]);
    let b = Frequency([l * 0.1f64.cos(), l * 0.1f64.sin(), 0.0]);
    let dev = (geometry::bilipschitz_ratio(&a, &b)? - 1.0).abs();
    let mut r = scaled_report(c, "bilipschitz").param("samples", n);
    r.push("min_ratio", lo);
    r.push("max_ratio", hi);
    r.push("violations", bad as f64);
    r.push("deviation_fixed_angle", dev);
    r.predict("ratio within [1/2, 2]", None);
    Ok(r)
}

fn random_normal(rng: &mut Rng) -> Normal4 {
    let mag = 10f64.powf(mc::uniform(rng, -2.0, 4.0));
    geometry::normal(&Frequency(vecmath::scale(&mc::unit_vector(rng), mag)))
}

fn run_wedge_gram(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let worst = mc::chunked(c.key, n, |rng, k| {
        (0..k)
            .map(|_| {
                let (a, b, cc) = (random_normal(rng).0, random_normal(rng).0, random_normal(rng).0);
                let w = geometry::wedge3_norm(&a, &b, &cc);
                (w * w - geometry::gram_det(&a, &b, &cc)).abs()
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let mut r = report(c, "wedge-gram").param("samples", n);
    r.push("max_abs_difference", worst);
    r.predict("agreement to 1e-12", Some(1e-12));
    r.verdict = Verdict::from_check(worst <= 1e-12);
    Ok(r)
}

fn run_gram_closed_form(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let worst = mc::chunked(c.key, n, |rng, k| {
        (0..k)
            .map(|_| {
                let (a, b, cc) = (mc::unit_vector(rng), mc::unit_vector(rng), mc::unit_vector(rng));
                (geometry::gram_det3(&a, &b, &cc) - geometry::gram_det3_direct(&a, &b, &cc)).abs()
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let mut r = report(c, "gram-closed-form").param("samples", n);
    r.push("max_abs_difference", worst);
    r.predict("agreement to 1e-12", Some(1e-12));
    r.verdict = Verdict::from_check(worst <= 1e-12);
    Ok(r)
}

/// Three directions: `u`, and two more at angles in `[α, 2α]` from `u`,
/// redrawn until all pairs are at least α apart.
fn separated_triple(rng: &mut Rng, alpha: f64) -> [Vec3; 3] {
    let u = mc::unit_vector(rng);
    loop {
        let v = vecmath::offset_direction(&u, alpha * mc::uniform(rng, 1.0, 2.0), mc::uniform(rng, 0.0, std::f64::consts::TAU));
        let w = vecmath::offset_direction(&u, alpha * mc::uniform(rng, 1.0, 2.0), mc::uniform(rng, 0.0, std::f64::consts::TAU));
        if vecmath::angle(&v, &w) >= alpha {
            return [u, v, w];
        }
    }
}

fn run_wedge_threshold(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, 100_000);
    let threshold = s.alpha * s.alpha / 16.0;
    let parts = mc::chunked(c.key, n, |rng, k| {
        let (mut lo, mut below) = (f64::INFINITY, 0u64);
        for _ in 0..k {
            let t = separated_triple(rng, s.alpha);
            let nn: Vec<_> = t.iter().map(|u| geometry::normal(&Frequency(vecmath::scale(u, s.lambda))).0).collect();
            let w = geometry::wedge3_norm(&nn[0], &nn[1], &nn[2]);
            lo = lo.min(w / threshold);
            if w < threshold {
                below += 1;
            }
        }
        (lo, below)
    });
    let (lo, below) = parts.into_iter().fold((f64::INFINITY, 0u64), |a, b| (a.0.min(b.0), a.1 + b.1));
    let mut r = scaled_report(c, "wedge-threshold").param("samples", n);
    r.push("min_wedge_over_threshold", lo);
    r.push("fraction_below_threshold", below as f64 / n as f64);
    r.predict("wedge ≥ α²/16 on α-separated triples", Some(1.0));
    Ok(r)
}

fn run_gram_crowding(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, 100_000);
    let parts = mc::chunked(c.key, n, |rng, k| {
        let (mut viol, mut crowded, mut lo) = (0u64, 0u64, f64::INFINITY);
        for _ in 0..k {
            let u = mc::unit_vector(rng);
            let v = random_direction_near(rng, &u, 2.0 * s.alpha);
            let w = random_direction_near(rng, &u, 2.0 * s.alpha);
            let (m, bound) = geometry::gram_crowding_bound(&u, &v, &w, s.alpha);
            if m == 0 {
                continue;
            }
            crowded += 1;
            let det = geometry::gram_det3_direct(&u, &v, &w);
            lo = lo.min(det / bound);
            if det < bound {
                viol += 1;
            }
        }
        (viol, crowded, lo)
    });
    let (viol, crowded, lo) = parts.into_iter().fold((0u64, 0u64, f64::INFINITY), |a, b| (a.0 + b.0, a.1 + b.1, a.2.min(b.2)));
    let mut r = scaled_report(c, "gram-crowding").param("samples", n);
    r.push("crowded_triples", crowded as f64);
    r.push("violations", viol as f64);
    r.push("violation_rate", if crowded > 0 { viol as f64 / crowded as f64 } else { 0.0 });
    r.push("min_det_over_bound", lo);
    r.predict("det G ≥ 1 − mα²", None);
    Ok(r)
}

fn run_mixed_minor(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, 100_000);
    let worst = mc::chunked(c.key, n, |rng, k| {
        (0..k)
            .map(|_| {
                let u = mc::unit_vector(rng);
                let f = |rng: &mut Rng| Frequency(vecmath::scale(&random_direction_near(rng, &u, s.r), s.lambda));
                let (a, b, cc, d) = (f(rng), f(rng), f(rng), f(rng));
                let res = geometry::normal_residual_vector(&d).expect("nonzero");
                geometry::mixed_minor4(&geometry::normal(&a).0, &geometry::normal(&b).0, &geometry::normal(&cc).0, &res)
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let mut r = scaled_report(c, "mixed-minor").param("samples", n);
    r.push("max_minor", worst);
    r.push("max_minor_over_prediction", worst / s.lambda.powf(-11.0 / 3.0));
    r.predict("λ^{-11/3}", Some(s.lambda.powf(-11.0 / 3.0)));
    Ok(r)
}

fn run_broad3(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let parts = mc::chunked(c.key, n, |rng, k| {
        let mut viol = 0u64;
        for _ in 0..k {
            let values: [Complex64; 6] = std::array::from_fn(|_| {
                let mag = if rng.random::<f64>() < 0.02 { 0.0 } else { (2.0 * mc::uniform(rng, -1.0, 1.0)).exp() };
                Complex64::from_polar(mag, mc::uniform(rng, 0.0, std::f64::consts::TAU))
            });
            let normals: [Normal4; 6] = std::array::from_fn(|_| geometry::normal(&Frequency(on_shell(rng, 256.0))));
            match geometry::broad3(&values, &normals) {
                Ok(b) if b.min_triple_bound_holds() => {}
                _ => viol += 1,
            }
        }
        viol
    });
    let viol: u64 = parts.into_iter().sum();
    let mut r = report(c, "broad3-min-triple").param("samples", n);
    r.push("violations", viol as f64);
    r.predict("zero violations", Some(0.0));
    r.verdict = Verdict::from_check(viol == 0);
    Ok(r)
}

/// Minimum pairwise separation by brute force.
fn min_separation(dirs: &[Vec3]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            m = m.min(vecmath::angle(&dirs[i], &dirs[j]));
        }
    }
    m
}

fn run_cap_lattice(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::build_lattice(&s)?;
    let dirs = fam.directions();
    let expected = caps::expected_cap_count(&s);
    let ratio = fam.len() as f64 / expected;
    let exhaustive = s.lambda <= 64.0;
    let separated = if exhaustive {
        min_separation(&dirs) >= s.r
    } else {
        fam.neighbors(s.r, false).iter().all(Vec::is_empty)
    };
    // covering radius ≤ 2r, probed at random directions
    let n = samples(c, 20_000);
    let grid = SphereGrid::build(&dirs, chord(2.0 * s.r));
    let uncovered = mc::count_hits(c.key, n, |rng| !grid.any_closer(&mc::unit_vector(rng), chord(2.0 * s.r)));
    let mut r = scaled_report(c, "cap-lattice").param("separation_check", if exhaustive { "exhaustive" } else { "spatial hash" });
    r.push("cap_count", fam.len() as f64);
    r.push("count_over_4_r_minus2", ratio);
    r.push("separated", separated as u8 as f64);
    r.push("uncovered_probes", uncovered as f64);
    r.predict("count within [1/4, 4]·4/r², separation ≥ r, covering ≤ 2r", Some(expected));
    r.verdict = Verdict::from_check((0.25..=4.0).contains(&ratio) && separated && uncovered == 0);
    Ok(r)
}

fn run_coloring(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::greedy_color(&caps::build_lattice(&s)?);
    let delta = caps::max_alpha_degree(&fam);
    let classes = fam.class_count().unwrap_or(0);
    let exhaustive = s.lambda <= 256.0;
    let valid = if exhaustive { caps::verify_coloring_exhaustive(&fam).is_ok() } else { caps::verify_coloring(&fam).is_ok() };
    let mut r = scaled_report(c, "coloring").param("validation", if exhaustive { "exhaustive" } else { "spatial hash" });
    r.push("caps", fam.len() as f64);
    r.push("max_degree", delta as f64);
    r.push("classes", classes as f64);
    r.push("classes_over_D", classes as f64 / s.d);
    r.push("valid", valid as u8 as f64);
    r.predict("classes ≤ Δ+1 and O(D)", None);
    r.verdict = Verdict::from_check(classes <= delta + 1 && valid);
    Ok(r)
}

fn run_annulus(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::build_lattice(&s)?;
    let centers = 8.min(fam.len());
    let mut partition_ok = true;
    let mut worst_c = 0.0f64;
    let mut max_count = 0usize;
    for i in 0..centers {
        let center = fam.caps[i * fam.len() / centers];
        let hist = caps::annulus_histogram(&fam, &center);
        partition_ok &= hist.iter().sum::<usize>() == fam.len() - 1;
        for k in 1..=32usize {
            let n = hist.get(k).copied().unwrap_or(0);
            max_count = max_count.max(n);
            worst_c = worst_c.max(n as f64 / (k as f64 * s.d));
        }
    }
    let mut r = scaled_report(c, "annulus").param("centers", centers);
    r.push("caps", fam.len() as f64);
    r.push("partition_holds", partition_ok as u8 as f64);
    r.push("max_ring_count_k1_32", max_count as f64);
    r.push("fitted_C", worst_c);
    r.predict("ring count ≲ k·D; rings partition the family", None);
    r.verdict = Verdict::from_check(partition_ok);
    Ok(r)
}

fn run_four_of_six(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::build_lattice(&s)?;
    // six caps drawn from the 2α-neighborhood of one of 64 random centers
    let mut rng = c.key.with("centers").rng();
    let hoods: Vec<Vec<Vec3>> = (0..64)
        .map(|_| fam.local(&mc::unit_vector(&mut rng), 2.0 * s.alpha).directions())
        .filter(|d| d.len() >= 6)
        .collect();
    if hoods.is_empty() {
        return Err(Error::Precondition("no 2α-neighborhood holds six caps; raise c0".into()));
    }
    let n = samples(c, 100_000);
    let parts = mc::chunked(c.key, n, |rng, k| {
        let (mut ok, mut dense) = (0u64, 0u64);
        for _ in 0..k {
            let hood = &hoods[rng.random_range(0..hoods.len())];
            let idx = rand::seq::index::sample(rng, hood.len(), 6);
            let dirs: [Vec3; 6] = std::array::from_fn(|m| hood[idx.index(m)]);
            let sel = caps::select_separated(&dirs, s.alpha);
            ok += sel.subset.is_some() as u64;
            dense += sel.dense_pairs as u64;
        }
        (ok, dense)
    });
    let (ok, dense) = parts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mut r = scaled_report(c, "four-of-six").param("samples", n).param("neighborhoods", hoods.len()).param("sampling", "six caps within 2α of a random center");
    r.push("qualification_rate", ok as f64 / n as f64);
    r.push("mean_dense_pairs", dense as f64 / n as f64);
    r.predict("a separated 4-subset always exists", Some(1.0));
    Ok(r)
}

/// A fixed generic on-shell direction.
fn generic_direction() -> Vec3 {
    vecmath::normalize(&[1.0, 2.0, 3.0]).expect("nonzero")
}

fn run_tube_volume(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, ONE_MILLION);
    let tube = Tube::from_xi(vecmath::scale(&generic_direction(), s.lambda), &s, false);
    let est = tubes::mc_volume(&tube, n, c.key)?;
    let exact = tube.analytic_volume();
    let mut r = scaled_report(c, "tube-volume").param("samples", n);
    r.push_est("mc_volume", &est);
    r.push("analytic_volume", exact);
    r.push("z_score", est.z_score(exact));
    r.push("volume_times_lambda3", est.value * s.lambda.powi(3));
    r.predict("ρ³λ^{-3/2} = λ^{-3}", Some(s.lambda.powi(-3)));
    Ok(r)
}

fn run_tube_degenerate(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, ONE_MILLION);
    let tube = Tube::from_xi([0.0; 3], &s, false);
    let exact = 4.0 / 3.0 * std::f64::consts::PI * (s.rho / 2.0).powi(3) * s.lambda.powf(-1.5);
    let est = tubes::mc_volume(&tube, n, c.key)?;
    let analytic = tube.analytic_volume();
    let z = est.z_score(exact);
    let mut r = scaled_report(c, "tube-degenerate").param("samples", n);
    r.push_est("mc_volume", &est);
    r.push("closed_form", exact);
    r.push("analytic_relative_error", ((analytic - exact) / exact).abs());
    r.push("z_score", z);
    r.predict("closed form (4/3)π(ρ/2)³λ^{-3/2}", Some(exact));
    r.verdict = Verdict::from_check(z < 3.0 && ((analytic - exact) / exact).abs() <= 1e-12);
    Ok(r)
}

fn run_boundary_layer(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let est = tubes::boundary_layer_fraction(&c.scale, n, c.key)?;
    let z = est.z_score(0.125);
    let mut r = scaled_report(c, "boundary-layer").param("samples", n);
    r.push_est("fraction", &est);
    r.push("z_score", z);
    r.predict("exactly 1/8", Some(0.125));
    r.verdict = Verdict::from_check(z < 3.0 && est.value > 0.0 && est.value < 1.0);
    Ok(r)
}

fn run_pair_overlap(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, 100_000);
    let u = generic_direction();
    let base = Tube::from_xi(vecmath::scale(&u, s.lambda), &s, true);
    let mut r = scaled_report(c, "pair-overlap").param("samples_per_delta", n).param("truncated", true);
    let mut deltas: Vec<f64> = (0..).map(|j| s.alpha * 2f64.powi(j)).take_while(|&d| d <= std::f64::consts::FRAC_PI_2).collect();
    deltas.extend([std::f64::consts::FRAC_PI_2, std::f64::consts::PI]);
    let mut worst = 0.0f64;
    let mut worst_min = 0.0f64;
    for (j, &delta) in deltas.iter().enumerate() {
        let v = vecmath::offset_direction(&u, delta, 0.7);
        let other = Tube::from_xi(vecmath::scale(&v, s.lambda), &s, true);
        let est = tubes::mc_pair_overlap(&base, &other, n, c.key.with_u64(j as u64))?;
        let rough = s.rho.powi(4) / (s.lambda * delta);
        let c_j = est.value / rough;
        let c_min = est.value / tubes::pair_overlap_bound(&s, delta);
        worst = worst.max(c_j);
        worst_min = worst_min.max(c_min);
        r.push(&format!("delta_{j:02}"), delta);
        r.push_est(&format!("overlap_{j:02}"), &est);
        r.push(&format!("C_{j:02}"), c_j);
        r.push(&format!("C_min_form_{j:02}"), c_min);
    }
    r.push("max_C", worst);
    r.push("max_C_min_form", worst_min);
    r.predict("overlap ≤ C·ρ⁴/(λδ)", None);
    Ok(r)
}

fn run_l2_sum(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::build_lattice(&s)?.local(&[0.0, 0.0, 1.0], 6.0 * s.r);
    let opts = tubes::L2Options {
        pairs_per_bucket: c.cfg.pairs_per_bucket.unwrap_or(16),
        samples_per_pair: samples(c, 20_000),
        truncated: true,
    };
    let out = tubes::l2_sum(&fam, &opts, c.key)?;
    let mut r = scaled_report(c, "l2-sum")
        .param("family", "lattice caps within 6r of a pole")
        .param("pairs_per_bucket", opts.pairs_per_bucket)
        .param("samples_per_pair", opts.samples_per_pair);
    r.push("caps", fam.len() as f64);
    r.push_est("S", &out.s);
    r.push("sqrt_S", out.norm);
    r.push("diagonal", out.diagonal);
    r.push("sqrt_S_over_baseline", out.norm / (s.lambda.powf(-7.0 / 6.0) * s.d.powf(0.25)));
    r.push("sqrt_S_over_strong", out.norm / (s.lambda.powf(-1.5) * s.d.sqrt()));
    for (i, b) in out.buckets.iter().enumerate() {
        r.push(&format!("bucket_{i:02}_lo"), b.lo);
        r.push(&format!("bucket_{i:02}_pairs"), b.pairs as f64);
        r.push_est(&format!("bucket_{i:02}_total"), &b.total);
    }
    r.predict("slope −7/6 (strong form −3/2)", Some(-7.0 / 6.0));
    Ok(r)
}

fn run_multiplicity(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n_caps = (2.0 * s.d).ceil() as usize + 2;
    let dirs = caps::cluster_directions(&generic_direction(), n_caps, s.alpha / 3.0);
    let fam = CapFamily::from_directions(&dirs, s)?;
    let opts = tubes::MultiplicityOptions { samples: samples(c, 200_000), c_star: c.cfg.c_star(), c: None, truncated: false };
    let st = tubes::multiplicity_experiment(&fam, &opts, c.key)?;
    let origin = MultiplicityField::new(&fam, false).eval(0.0, &[0.0; 3]);

    // far-apart caps: multiplicity sampled inside each tube
    let far = CapFamily::from_directions(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, -1.0]], s)?;
    let field = MultiplicityField::new(&far, false);
    let far_max = mc::chunked(c.key.with("far"), opts.samples, |rng, k| {
        (0..k)
            .map(|_| {
                let tube = &field.tubes[rng.random_range(0..field.tubes.len())];
                let (t, x) = tube.sample_cylinder(rng);
                if tube.contains(t, &x) { field.eval(t, &x) } else { 0 }
            })
            .max()
            .unwrap_or(0)
    })
    .into_iter()
    .max()
    .unwrap_or(0);

    let mut r = scaled_report(c, "multiplicity").param("family_size", n_caps).param("c_star", opts.c_star).param("samples", opts.samples);
    r.push("c", st.c);
    r.push("M_at_origin", origin as f64);
    r.push_est("union_measure", &st.union_measure);
    r.push("union_ratio", st.union_ratio);
    r.push("exceptional_fraction", st.exceptional_fraction);
    r.push("fitted_constant", st.fitted_constant);
    r.push("mean_multiplicity", st.mean_multiplicity);
    r.push("max_multiplicity", st.max_multiplicity as f64);
    r.push("far_family_max_M", far_max as f64);
    r.predict("exceptional fraction ≤ C·λ^{-5/8}", Some(s.lambda.powf(-0.625)));
    Ok(r)
}

fn run_cauchy_schwarz(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, ONE_MILLION);
    let sweep = tubes::pointwise_cs_sweep(&s, n, 0.05, c.key);
    let fam = CapFamily::from_directions(&caps::cluster_directions(&generic_direction(), 6, 0.02), s)?;
    let field = MultiplicityField::new(&fam, false);
    let mut rng = c.key.with("coeffs").rng();
    let coeffs: Vec<Complex64> = (0..fam.len()).map(|_| Complex64::new(mc::uniform(&mut rng, -1.0, 1.0), mc::uniform(&mut rng, -1.0, 1.0))).collect();
    let integral = tubes::integral_cs_check(&field, &coeffs, 100_000.min(n.max(tubes::MIN_SAMPLES)), c.key.with("integral"))?;
    let mut r = scaled_report(c, "cauchy-schwarz").param("samples", n);
    r.push("pointwise_violations", sweep.violations as f64);
    r.push("max_lhs_over_rhs", sweep.max_ratio);
    r.push_est("integral_lhs", &integral.lhs);
    r.push_est("integral_rhs", &integral.rhs);
    r.push("integral_pointwise_violations", integral.pointwise_violations as f64);
    r.predict("zero violations", Some(0.0));
    r.verdict = Verdict::from_check(sweep.violations == 0 && integral.pointwise_violations == 0);
    Ok(r)
}

fn run_anisotropic(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, 100_000);
    let mut worst = 0.0f64;
    let mut boundary = 0.0f64;
    for k in 4..=14 {
        let s = ScaleParams::derive(2f64.powi(k), c.cfg.c0())?;
        let (tau, _) = shell::anisotropic_map(&s, s.t_half, &[0.0; 3]);
        boundary = boundary.max((tau - 0.5).abs());
        let w = mc::chunked(c.key.with_u64(k as u64), n, |rng, m| {
            (0..m)
                .map(|_| {
                    let t = mc::uniform(rng, -s.t_half, s.t_half);
                    let x = vecmath::scale(&mc::ball_point(rng), s.x_half);
                    let (tau, z) = shell::anisotropic_map(&s, t, &x);
                    let (t1, x1) = shell::anisotropic_inverse(&s, tau, &z);
                    let ex = vecmath::norm(&vecmath::sub(&x, &x1)) / s.x_half;
                    ((t - t1).abs() / s.t_half).max(ex)
                })
                .fold(0.0, f64::max)
        });
        worst = w.into_iter().fold(worst, f64::max);
    }
    let mut r = report(c, "anisotropic-roundtrip").param("samples_per_lambda", n).param("lambdas", pow2(4, 14));
    r.push("max_relative_roundtrip_error", worst);
    r.push("boundary_image_error", boundary);
    r.predict("round trip to 1e-12", Some(1e-12));
    r.verdict = Verdict::from_check(worst <= 1e-12 && boundary <= 1e-12);
    Ok(r)
}

fn run_shell_hyperplane(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let n = samples(c, ONE_MILLION);
    let beta = shell::shell_beta(&s, c.cfg.shell_c.unwrap_or(DEFAULT_SHELL_C), 1);
    let p = Poly4::linear([1.0, 0.0, 0.0, 0.0], 0.0);
    let est = shell::shell_fraction(&p, &s, beta, n, c.key)?;
    let z = est.z_score(2.0 * beta);
    let mut r = scaled_report(c, "shell-hyperplane").param("samples", n).param("beta", beta);
    r.push_est("fraction", &est);
    r.push("z_score", z);
    r.predict("2β", Some(2.0 * beta));
    r.verdict = Verdict::from_check(z < 3.0);
    Ok(r)
}

fn run_shell_proxy(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, 100_000);
    let out = shell::sphere_proxy_check(0.25, n, c.key);
    let mut r = report(c, "shell-sphere-proxy").param("samples", n).param("radius", 0.25).param("compared_within", "distance ≤ R/2");
    r.push("compared", out.compared as f64);
    r.push("min_ratio", out.min_ratio);
    r.push("max_ratio", out.max_ratio);
    r.predict("proxy within a factor 2 of the exact distance", Some(2.0));
    r.verdict = Verdict::from_check(out.compared > 0 && out.min_ratio >= 0.5 && out.max_ratio <= 2.0);
    Ok(r)
}

fn run_shell_ensemble(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let members = c.cfg.ensemble.unwrap_or(16);
    let n = samples(c, 100_000);
    let st = shell::ensemble_sweep(&s, members, n, c.cfg.shell_c.unwrap_or(DEFAULT_SHELL_C), c.key)?;
    let mut r = scaled_report(c, "shell-fraction").param("members", members).param("samples", n).param("degree", st.degree).param("hyperplane_like", st.degree == 1);
    r.push("beta", st.beta);
    r.push("mean_fraction", st.fractions.iter().map(|e| e.value).sum::<f64>() / st.fractions.len().max(1) as f64);
    r.push("max_fraction_D", st.max_fraction_d);
    r.push("mean_fraction_D", st.mean_fraction_d);
    r.predict("fraction·D bounded", None);
    Ok(r)
}

fn run_paired_cancellation(c: &Ctx) -> Result<ExperimentReport> {
    let n = samples(c, ONE_MILLION);
    let worst = phase::paired_residual_sweep(&c.scale, n, c.key);
    let mut r = scaled_report(c, "paired-cancellation").param("samples", n);
    r.push("max_residual", worst);
    r.predict("exactly zero", Some(0.0));
    r.verdict = Verdict::from_check(worst == 0.0);
    Ok(r)
}

fn run_phase_dichotomy(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let fam = caps::build_lattice(&s)?.local(&generic_direction(), 4.0 * s.alpha);
    let d = DichotomyParams::defaults(&s);
    let p = DichotomyParams { c: c.cfg.basket_c.unwrap_or(d.c), c1: c.cfg.c1.unwrap_or(d.c1), big_c: c.cfg.big_c.unwrap_or(d.big_c) };
    let n = samples(c, 100_000);
    let mut r = scaled_report(c, "phase-dichotomy").param("samples", n).param("family", "lattice caps within 4α of a fixed direction").param("caps", fam.len()).param("c", p.c).param("c1", p.c1).param("C", p.big_c).param("c_star", c.cfg.c_star());
    for (mode, tag) in [(SampleMode::Random, "random"), (SampleMode::Paired, "paired")] {
        let sw = phase::phase_sweep(&fam, mode, n, &p, c.cfg.c_star(), c.key.with(tag))?;
        let lt = sw.b_lt.max(1) as f64;
        r.push(&format!("{tag}_b_ge_rate"), sw.b_ge as f64 / n as f64);
        r.push(&format!("{tag}_transversal_rate"), sw.transversal as f64 / lt);
        r.push(&format!("{tag}_paired_rate"), sw.paired as f64 / lt);
        r.push(&format!("{tag}_neither_rate"), sw.neither as f64 / lt);
        r.push(&format!("{tag}_robust_rate"), sw.robust as f64 / lt);
        r.push(&format!("{tag}_narrow_rate"), sw.narrow as f64 / lt);
        r.push(&format!("{tag}_rn_neither_rate"), sw.rn_neither as f64 / lt);
        r.push(&format!("{tag}_grad_large_rate"), sw.grad_large as f64 / n as f64);
        r.push(&format!("{tag}_witness_failures"), sw.witness_failures as f64);
        r.push(&format!("{tag}_min_dt_ratio"), sw.min_dt_ratio);
    }
    r.predict("no Neither labels on B_<", Some(0.0));
    Ok(r)
}

fn run_probe(c: &Ctx) -> Result<ExperimentReport> {
    let s = c.scale;
    let gf = c.cfg.grid_factor.unwrap_or(DEFAULT_GRID_FACTOR);
    let fam = caps::build_lattice(&s)?;
    let mut rng = c.key.with("coeffs").rng();
    let coeffs: Vec<Complex64> = (0..fam.len()).map(|_| Complex64::from_polar(1.0, mc::uniform(&mut rng, 0.0, std::f64::consts::TAU))).collect();
    let out = decoupling_probe(&s, &fam, &coeffs, gf)?;
    let single = CapFamily::from_directions(&[generic_direction()], s)?;
    let one = decoupling_probe(&s, &single, &[Complex64::new(1.0, 0.0)], gf)?;
    let mut r = scaled_report(c, "decoupling-probe").param("grid_factor", gf).param("grid_per_axis", out.grid_per_axis).param("grid_points", out.grid_points);
    r.push("ratio", out.ratio);
    r.push("norm_F", out.norm_f);
    r.push("active_caps", out.active_caps as f64);
    r.push("lambda_4_3", out.lambda_43);
    r.push("single_cap_ratio", one.ratio);
    r.predict("observational only; the claimed λ-decay is not visible at these sizes", None);
    Ok(r)
}
