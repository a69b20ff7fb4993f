//! Cap lattices on the shell `|ξ| = λ`, angular neighbor counting, the greedy
//! α-separated coloring, and the six-direction selection checker.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::ScaleParams;
use crate::vecmath::{self, chord, Vec3};

/// Fibonacci spacing relative to the target separation, before pruning.
const LATTICE_SPACING: f64 = 1.25;

/// A spherical cap: center direction and angular radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center_dir: Vec3,
    pub radius: f64,
    pub index: usize,
}

impl Cap {
    /// `ξ_Θ = λ · center_dir`.
    pub fn xi_center(&self, lambda: f64) -> Vec3 {
        vecmath::scale(&self.center_dir, lambda)
    }
}

/// A family of caps with dense indices `0..N` and an optional coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct CapFamily {
    pub caps: Vec<Cap>,
    pub scale: ScaleParams,
    pub coloring: Option<Vec<usize>>,
}

impl CapFamily {
    /// Builds a family from (not necessarily unit) directions; radius is `scale.r`.
    pub fn from_directions(dirs: &[Vec3], scale: ScaleParams) -> Result<Self> {
        let caps = dirs
            .iter()
            .enumerate()
            .map(|(index, d)| {
                let center_dir = vecmath::normalize(d)
                    .ok_or_else(|| Error::Domain(format!("zero direction at index {index}")))?;
                Ok(Cap { center_dir, radius: scale.r, index })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CapFamily { caps, scale, coloring: None })
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn directions(&self) -> Vec<Vec3> {
        self.caps.iter().map(|c| c.center_dir).collect()
    }

    /// Caps whose centers lie within `angular_radius` of `center`, reindexed densely.
    pub fn local(&self, center: &Vec3, angular_radius: f64) -> CapFamily {
        let center = vecmath::normalize(center).unwrap_or([0.0, 0.0, 1.0]);
        let dirs: Vec<Vec3> = self
            .caps
            .iter()
            .filter(|c| vecmath::angle(&c.center_dir, &center) <= angular_radius)
            .map(|c| c.center_dir)
            .collect();
        let mut out = CapFamily::from_directions(&dirs, self.scale).expect("unit directions");
        for cap in &mut out.caps {
            cap.radius = self.caps.first().map_or(self.scale.r, |c| c.radius);
        }
        out
    }

    pub fn class_count(&self) -> Option<usize> {
        self.coloring
            .as_ref()
            .map(|c| c.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Number of other caps at angle `< threshold` (or `≤` when `inclusive`) from each cap.
    pub fn neighbor_counts(&self, threshold: f64, inclusive: bool) -> Vec<usize> {
        let adj = self.neighbors(threshold, inclusive);
        adj.iter().map(Vec::len).collect()
    }

    /// Adjacency lists of the angular neighbor graph at `threshold`.
    pub fn neighbors(&self, threshold: f64, inclusive: bool) -> Vec<Vec<u32>> {
        let dirs = self.directions();
        let limit = chord(threshold);
        let grid = SphereGrid::build(&dirs, limit);
        dirs.iter()
            .enumerate()
            .map(|(i, p)| {
                let mut out = Vec::new();
                grid.for_each_near(p, |j, q| {
                    if j as usize != i && within(p, q, limit, threshold, inclusive) {
                        out.push(j);
                    }
                });
                out.sort_unstable();
                out
            })
            .collect()
    }

    /// Writes `index,x,y,z,class` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["index", "x", "y", "z", "class"])?;
        for cap in &self.caps {
            let class = self
                .coloring
                .as_ref()
                .map(|c| c[cap.index].to_string())
                .unwrap_or_default();
            wtr.write_record([
                cap.index.to_string(),
                format!("{:.17e}", cap.center_dir[0]),
                format!("{:.17e}", cap.center_dir[1]),
                format!("{:.17e}", cap.center_dir[2]),
                class,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Angular comparison done in chord space; the exact angle breaks near-ties.
fn within(p: &Vec3, q: &Vec3, limit: f64, threshold: f64, inclusive: bool) -> bool {
    let c = vecmath::norm(&vecmath::sub(p, q));
    if c > limit * (1.0 + 1e-9) {
        return false;
    }
    let a = vecmath::angle(p, q);
    if inclusive {
        a <= threshold
    } else {
        a < threshold
    }
}

/// Uniform hash grid over unit vectors; a query visits the 27 cells around a point,
/// so every point within chord distance `cell` is found.
pub struct SphereGrid {
    cell: f64,
    cells: HashMap<[i32; 3], Vec<(u32, Vec3)>>,
}

impl SphereGrid {
    pub fn new(cell: f64) -> Self {
        // keep keys well inside i32 even for tiny cells
        SphereGrid { cell: cell.max(1e-8), cells: HashMap::new() }
    }

    pub fn build(points: &[Vec3], cell: f64) -> Self {
        let mut g = Self::new(cell);
        for (i, p) in points.iter().enumerate() {
            g.insert(i as u32, *p);
        }
        g
    }

    fn key(&self, p: &Vec3) -> [i32; 3] {
        std::array::from_fn(|i| (p[i] / self.cell).floor() as i32)
    }

    pub fn insert(&mut self, idx: u32, p: Vec3) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push((idx, p));
    }

    pub fn for_each_near<F: FnMut(u32, &Vec3)>(&self, p: &Vec3, mut f: F) {
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for (j, q) in v {
                            f(*j, q);
                        }
                    }
                }
            }
        }
    }

    /// Whether some stored point lies at chord distance `< limit` (`limit ≤ cell`).
    pub fn any_closer(&self, p: &Vec3, limit: f64) -> bool {
        let mut hit = false;
        self.for_each_near(p, |_, q| {
            if !hit && vecmath::norm(&vecmath::sub(p, q)) < limit {
                hit = true;
            }
        });
        hit
    }
}

/// Golden-angle spiral with `n` points.
pub fn fibonacci_points(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Fibonacci sphere points pruned (in spiral order) to a set whose pairwise
/// angular separation is at least `radius`.
pub fn fibonacci_separated(radius: f64) -> Result<Vec<Vec3>> {
    if !(radius > 0.0) || radius >= 1.0 {
        return Err(Error::Degenerate(format!(
            "cap radius {radius} must lie in (0, 1)"
        )));
    }
    let spacing = LATTICE_SPACING * radius;
    let n = (8.0 * std::f64::consts::PI / (3f64.sqrt() * spacing * spacing)).ceil() as usize;
    let limit = chord(radius);
    let mut grid = SphereGrid::new(limit);
    let mut kept = Vec::with_capacity(n);
    for p in fibonacci_points(n) {
        if !grid.any_closer(&p, limit) {
            grid.insert(kept.len() as u32, p);
            kept.push(p);
        }
    }
    Ok(kept)
}

/// The cap lattice at scale `r`: an r-separated Fibonacci set on the unit sphere
/// (centers sit at `|ξ| = λ`). Deterministic in λ.
pub fn build_lattice(scale: &ScaleParams) -> Result<CapFamily> {
    let dirs = fibonacci_separated(scale.r)?;
    CapFamily::from_directions(&dirs, *scale)
}

/// Target cap count `4 / r²`.
pub fn expected_cap_count(scale: &ScaleParams) -> f64 {
    4.0 / (scale.r * scale.r)
}

fn is_center(cap: &Cap, center: &Cap) -> bool {
    cap.index == center.index && cap.center_dir == center.center_dir
}

/// `#{Θ′ ≠ center : angle(ξ_Θ, ξ_Θ′) ∈ [kα, (k+1)α)}`.
///
/// `k = 0` counts the inner disc (without the center), so that summing over all
/// `k ≥ 0` partitions the rest of the family.
pub fn annulus_count(family: &CapFamily, center: &Cap, k: usize) -> usize {
    let alpha = family.scale.alpha;
    let (lo, hi) = (k as f64 * alpha, (k + 1) as f64 * alpha);
    if lo > std::f64::consts::PI {
        return 0;
    }
    family
        .caps
        .iter()
        .filter(|c| !is_center(c, center))
        .filter(|c| {
            let a = vecmath::angle(&c.center_dir, &center.center_dir);
            a >= lo && a < hi
        })
        .count()
}

/// Counts for every thin ring `k = 0, 1, …` in one pass over the family.
pub fn annulus_histogram(family: &CapFamily, center: &Cap) -> Vec<usize> {
    let alpha = family.scale.alpha;
    let mut hist: Vec<usize> = Vec::new();
    for c in family.caps.iter().filter(|c| !is_center(c, center)) {
        let k = (vecmath::angle(&c.center_dir, &center.center_dir) / alpha).floor() as usize;
        if hist.len() <= k {
            hist.resize(k + 1, 0);
        }
        hist[k] += 1;
    }
    hist
}

/// Maximum degree Δ of the graph joining caps at angle `< α`.
pub fn max_alpha_degree(family: &CapFamily) -> usize {
    family
        .neighbor_counts(family.scale.alpha, false)
        .into_iter()
        .max()
        .unwrap_or(0)
}

/// Greedy coloring of the `< α` conflict graph in ascending index order.
/// Uses at most `Δ + 1` classes.
pub fn greedy_color(family: &CapFamily) -> CapFamily {
    let adj = family.neighbors(family.scale.alpha, false);
    let mut colors = vec![usize::MAX; family.len()];
    let mut used: Vec<bool> = Vec::new();
    for i in 0..family.len() {
        used.clear();
        used.resize(adj[i].len() + 1, false);
        for &j in &adj[i] {
            let c = colors[j as usize];
            if c < used.len() {
                used[c] = true;
            }
        }
        colors[i] = used.iter().position(|u| !u).expect("Δ+1 slots");
    }
    CapFamily { coloring: Some(colors), ..family.clone() }
}

/// A pair of same-class caps closer than α.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColoringViolation(pub usize, pub usize);

/// Grid-accelerated check that every class is α-separated.
pub fn verify_coloring(family: &CapFamily) -> std::result::Result<(), ColoringViolation> {
    let Some(colors) = family.coloring.as_ref() else {
        return Ok(());
    };
    for (i, adj) in family.neighbors(family.scale.alpha, false).iter().enumerate() {
        if let Some(&j) = adj.iter().find(|&&j| colors[j as usize] == colors[i]) {
            return Err(ColoringViolation(i, j as usize));
        }
    }
    Ok(())
}

/// All-pairs check that every class is α-separated. Quadratic; intended for
/// small lattices.
pub fn verify_coloring_exhaustive(family: &CapFamily) -> std::result::Result<(), ColoringViolation> {
    let Some(colors) = family.coloring.as_ref() else {
        return Ok(());
    };
    let alpha = family.scale.alpha;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            if colors[i] == colors[j]
                && vecmath::angle(&family.caps[i].center_dir, &family.caps[j].center_dir) < alpha
            {
                return Err(ColoringViolation(i, j));
            }
        }
    }
    Ok(())
}

/// Outcome of the exhaustive four-of-six search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// First 4-subset (lexicographic) with all pairwise angles ≥ α.
    pub subset: Option<[usize; 4]>,
    /// Number of pairs at angle `< α`.
    pub dense_pairs: usize,
}

pub fn select_separated(dirs: &[Vec3; 6], alpha: f64) -> Selection {
    let mut dense = [[false; 6]; 6];
    let mut dense_pairs = 0;
    for i in 0..6 {
        for j in (i + 1)..6 {
            if vecmath::angle(&dirs[i], &dirs[j]) < alpha {
                dense[i][j] = true;
                dense[j][i] = true;
                dense_pairs += 1;
            }
        }
    }
    let mut subset = None;
    'outer: for a in 0..6 {
        for b in (a + 1)..6 {
            for c in (b + 1)..6 {
                for d in (c + 1)..6 {
                    let s = [a, b, c, d];
                    let ok = (0..4).all(|x| ((x + 1)..4).all(|y| !dense[s[x]][s[y]]));
                    if ok {
                        subset = Some(s);
                        break 'outer;
                    }
                }
            }
        }
    }
    Selection { subset, dense_pairs }
}

/// `n` unit directions on a circle of angular radius `spread` around `center`
/// (the center itself when `n == 1`); pairwise angles are at most `2·spread`.
pub fn cluster_directions(center: &Vec3, n: usize, spread: f64) -> Vec<Vec3> {
    let center = vecmath::normalize(center).unwrap_or([0.0, 0.0, 1.0]);
    if n == 1 {
        return vec![center];
    }
    (0..n)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vecmath::offset_direction(&center, spread, az)
        })
        .collect()
}
