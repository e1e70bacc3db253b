//! Cone-beam acquisition geometry and view planning.
//!
//! The orbit is circular in the z = 0 plane, counterclockwise. At angle α
//! (degrees) the source sits at `(dso·cos α, dso·sin α, 0)` and a flat panel
//! detector faces it across the isocenter. Detector axes:
//! `ŵ = (−cos α, −sin α, 0)` (optical axis, source → detector),
//! `û = (−sin α, cos α, 0)`, `v̂ = (0, 0, 1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points closer to the source plane than this (mm) cannot be projected.
pub const EPS_DEPTH: f64 = 1e-6;

/// Angles closer than this (degrees) are considered duplicates.
pub const ANGLE_EPS: f64 = 1e-9;

/// Cap on the number of subsets the exact auxiliary-angle search may visit
/// before falling back to greedy insertion.
pub const EXHAUSTIVE_SUBSET_CAP: u128 = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("point is degenerate for projection (depth {depth} <= {eps})")]
    DegeneratePoint { depth: f64, eps: f64 },
    #[error("view count must be >= 1")]
    InvalidCount,
    #[error("angle sets differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("auxiliary angle constraints are infeasible: {0}")]
    Infeasible(String),
    #[error("angles must be strictly increasing in [0, 360): {0}")]
    InvalidAngles(String),
}

/// Cone-beam scan geometry. Distances in mm, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    /// Source to isocenter distance.
    pub dso: f64,
    /// Source to detector distance.
    pub dsd: f64,
    /// Detector columns (W).
    pub det_cols: usize,
    /// Detector rows (H).
    pub det_rows: usize,
    /// Detector pixel pitch along û, mm.
    pub det_spacing_u: f64,
    /// Detector pixel pitch along v̂, mm.
    pub det_spacing_v: f64,
    /// Volume grid size (nx, ny, nz).
    pub vol_shape: (usize, usize, usize),
    /// Isotropic voxel spacing, mm.
    pub voxel_spacing: f64,
    /// World position of the center of voxel (0, 0, 0), mm.
    pub vol_origin: [f64; 3],
}

impl ScanGeometry {
    /// Geometry with the volume centered on the isocenter.
    pub fn centered(
        dso: f64,
        dsd: f64,
        det_cols: usize,
        det_rows: usize,
        det_spacing: f64,
        vol_shape: (usize, usize, usize),
        voxel_spacing: f64,
    ) -> Result<Self, GeometryError> {
        let origin = [
            -0.5 * (vol_shape.0 as f64 - 1.0) * voxel_spacing,
            -0.5 * (vol_shape.1 as f64 - 1.0) * voxel_spacing,
            -0.5 * (vol_shape.2 as f64 - 1.0) * voxel_spacing,
        ];
        let g = Self {
            dso,
            dsd,
            det_cols,
            det_rows,
            det_spacing_u: det_spacing,
            det_spacing_v: det_spacing,
            vol_shape,
            voxel_spacing,
            vol_origin: origin,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let err = |m: &str| Err(GeometryError::InvalidGeometry(m.to_string()));
        if !(self.dso > 0.0 && self.dsd > self.dso) {
            return err("require dsd > dso > 0");
        }
        if !(self.det_spacing_u > 0.0 && self.det_spacing_v > 0.0 && self.voxel_spacing > 0.0) {
            return err("spacings must be positive");
        }
        if self.det_cols < 1 || self.det_rows < 1 {
            return err("detector must have at least one pixel");
        }
        let (nx, ny, nz) = self.vol_shape;
        if nx < 1 || ny < 1 || nz < 1 {
            return err("volume must have at least one voxel");
        }
        let m = self.dsd / self.dso;
        if !(m.is_finite() && m > 1.0) {
            return err("magnification dsd/dso must be finite and > 1");
        }
        let (lo, hi) = self.volume_bounds();
        let mut max_corner: f64 = 0.0;
        for cx in [lo[0], hi[0]] {
            for cy in [lo[1], hi[1]] {
                for cz in [lo[2], hi[2]] {
                    max_corner = max_corner.max((cx * cx + cy * cy + cz * cz).sqrt());
                }
            }
        }
        if max_corner >= self.dso {
            return err("volume bounding box must fit inside the source orbit");
        }
        Ok(())
    }

    /// Outer bounding box of the voxel grid (voxel centers padded by half a
    /// voxel on each side).
    pub fn volume_bounds(&self) -> ([f64; 3], [f64; 3]) {
        let (nx, ny, nz) = self.vol_shape;
        let h = 0.5 * self.voxel_spacing;
        let lo = [
            self.vol_origin[0] - h,
            self.vol_origin[1] - h,
            self.vol_origin[2] - h,
        ];
        let hi = [
            self.vol_origin[0] + (nx as f64 - 0.5) * self.voxel_spacing,
            self.vol_origin[1] + (ny as f64 - 0.5) * self.voxel_spacing,
            self.vol_origin[2] + (nz as f64 - 0.5) * self.voxel_spacing,
        ];
        (lo, hi)
    }
}

/// Per-view frame: source position and detector axes.
#[derive(Debug, Clone, Copy)]
pub struct ViewFrame {
    pub source: [f64; 3],
    /// Optical axis, source → detector.
    pub w: [f64; 3],
    /// Detector column axis.
    pub u: [f64; 3],
    /// Detector row axis.
    pub v: [f64; 3],
}

impl ViewFrame {
    pub fn new(geom: &ScanGeometry, angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        let (sin, cos) = a.sin_cos();
        ViewFrame {
            source: [geom.dso * cos, geom.dso * sin, 0.0],
            w: [-cos, -sin, 0.0],
            u: [-sin, cos, 0.0],
            v: [0.0, 0.0, 1.0],
        }
    }

    /// World position of the center of detector pixel (u, v).
    pub fn pixel_center(&self, geom: &ScanGeometry, u: f64, v: f64) -> [f64; 3] {
        let du = (u - 0.5 * (geom.det_cols as f64 - 1.0)) * geom.det_spacing_u;
        let dv = (v - 0.5 * (geom.det_rows as f64 - 1.0)) * geom.det_spacing_v;
        [
            self.source[0] + geom.dsd * self.w[0] + du * self.u[0] + dv * self.v[0],
            self.source[1] + geom.dsd * self.w[1] + du * self.u[1] + dv * self.v[1],
            self.source[2] + geom.dsd * self.w[2] + du * self.u[2] + dv * self.v[2],
        ]
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Source position at `angle` degrees on the orbit.
pub fn source_position(geom: &ScanGeometry, angle_deg: f64) -> [f64; 3] {
    ViewFrame::new(geom, angle_deg).source
}

/// Projects a world point onto the detector, in continuous pixel coordinates.
/// Coordinates may fall outside `[0, W−1] × [0, H−1]`; callers own
/// out-of-bounds handling.
pub fn project_point(
    geom: &ScanGeometry,
    angle_deg: f64,
    p: [f64; 3],
) -> Result<(f64, f64), GeometryError> {
    let f = ViewFrame::new(geom, angle_deg);
    let d = [p[0] - f.source[0], p[1] - f.source[1], p[2] - f.source[2]];
    let depth = dot(d, f.w);
    if depth <= EPS_DEPTH {
        return Err(GeometryError::DegeneratePoint {
            depth,
            eps: EPS_DEPTH,
        });
    }
    let t = geom.dsd / depth;
    let u_mm = t * dot(d, f.u);
    let v_mm = t * dot(d, f.v);
    Ok((
        u_mm / geom.det_spacing_u + 0.5 * (geom.det_cols as f64 - 1.0),
        v_mm / geom.det_spacing_v + 0.5 * (geom.det_rows as f64 - 1.0),
    ))
}

/// An ordered set of view angles, strictly increasing, in `[0, 360)` degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewAngleSet {
    angles: Vec<f64>,
}

impl ViewAngleSet {
    pub fn new(mut angles: Vec<f64>) -> Result<Self, GeometryError> {
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in angles.windows(2) {
            if (w[1] - w[0]).abs() <= ANGLE_EPS {
                return Err(GeometryError::InvalidAngles(format!(
                    "duplicate angle {}",
                    w[0]
                )));
            }
        }
        if let (Some(first), Some(last)) = (angles.first(), angles.last()) {
            if *first < 0.0 || *last >= 360.0 {
                return Err(GeometryError::InvalidAngles(format!(
                    "range [{first}, {last}] outside [0, 360)"
                )));
            }
        }
        Ok(ViewAngleSet { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.angles.iter().any(|a| (a - angle).abs() <= ANGLE_EPS)
    }

    /// Index of the closest angle.
    pub fn nearest(&self, angle: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, a) in self.angles.iter().enumerate() {
            let d = (a - angle).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// `n` angles uniformly spaced over the half rotation `[0°, 180°)`.
pub fn uniform_half_scan_angles(n: usize, offset_deg: f64) -> Result<ViewAngleSet, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidCount);
    }
    let step = 180.0 / n as f64;
    if offset_deg < 0.0 || offset_deg >= step {
        return Err(GeometryError::InvalidAngles(format!(
            "offset {offset_deg} outside [0, {step})"
        )));
    }
    ViewAngleSet::new((0..n).map(|k| offset_deg + k as f64 * step).collect())
}

/// Minimum over bijections φ of Σ |α − φ(α)| between two equal-size angle
/// sets. For 1-D L1 matching the sorted pairing is optimal, so this is just
/// the sorted element-wise sum.
pub fn matching_cost(a: &ViewAngleSet, b: &ViewAngleSet) -> Result<f64, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::SizeMismatch(a.len(), b.len()));
    }
    Ok(a.angles
        .iter()
        .zip(&b.angles)
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Optimal partial matching cost: injectively match every element of the
/// sorted set `a` into the sorted set `b` (|a| ≤ |b|), minimizing Σ|aᵢ − φ(aᵢ)|.
/// Used by the greedy fallback while the auxiliary set is still growing.
fn partial_matching_cost(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    debug_assert!(n <= m);
    if n == 0 {
        return 0.0;
    }
    // dp[j] = cost of matching a[..i] into b[..j], order-preserving.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for j in 1..=m {
        prev[j] = 0.0;
    }
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let take = prev[j - 1] + (a[i - 1] - b[j - 1]).abs();
            let skip = cur[j - 1];
            cur[j] = take.min(skip);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Result of the auxiliary-angle search.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxSelection {
    pub aux: ViewAngleSet,
    pub cost: f64,
    /// True when the greedy fallback ran instead of the exhaustive search.
    pub approximate: bool,
}

/// Finds auxiliary angles `Λ_aux ⊆ dense`, disjoint from `sparse`, with
/// `|Λ_aux| = |dense| − N`, minimizing the matching cost between
/// `sparse ∪ Λ_aux` and `dense`. Exhaustive when the subset count is at most
/// [`EXHAUSTIVE_SUBSET_CAP`], greedy insertion otherwise.
pub fn select_aux_angles(
    sparse: &ViewAngleSet,
    dense: &ViewAngleSet,
    n: usize,
) -> Result<AuxSelection, GeometryError> {
    if sparse.len() != n {
        return Err(GeometryError::SizeMismatch(sparse.len(), n));
    }
    let n_max = dense.len();
    if n > n_max {
        return Err(GeometryError::Infeasible(format!(
            "N = {n} exceeds the dense set size {n_max}"
        )));
    }
    let k = n_max - n;
    let candidates: Vec<f64> = dense
        .angles
        .iter()
        .copied()
        .filter(|a| !sparse.contains(*a))
        .collect();
    if candidates.len() < k {
        return Err(GeometryError::Infeasible(format!(
            "need {k} auxiliary angles but only {} dense angles are outside the sparse set",
            candidates.len()
        )));
    }
    if k == 0 {
        return Ok(AuxSelection {
            aux: ViewAngleSet::new(vec![])?,
            cost: matching_cost(sparse, dense)?,
            approximate: false,
        });
    }

    let union_cost = |aux: &[f64]| -> f64 {
        let mut union: Vec<f64> = sparse.angles.iter().copied().chain(aux.iter().copied()).collect();
        union.sort_by(|a, b| a.partial_cmp(b).unwrap());
        union
            .iter()
            .zip(&dense.angles)
            .map(|(x, y)| (x - y).abs())
            .sum()
    };

    if binomial(candidates.len() as u128, k as u128) <= EXHAUSTIVE_SUBSET_CAP {
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut pick = vec![0usize; k];
        enumerate_subsets(candidates.len(), k, &mut pick, 0, 0, &mut |idx| {
            let aux: Vec<f64> = idx.iter().map(|&i| candidates[i]).collect();
            let c = union_cost(&aux);
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, aux));
            }
        });
        let (cost, aux) = best.expect("at least one feasible subset");
        Ok(AuxSelection {
            aux: ViewAngleSet::new(aux)?,
            cost,
            approximate: false,
        })
    } else {
        let chosen = greedy_aux(&sparse.angles, &dense.angles, &candidates, k);
        let cost = union_cost(&chosen);
        Ok(AuxSelection {
            aux: ViewAngleSet::new(chosen)?,
            cost,
            approximate: true,
        })
    }
}

/// Greedy insertion: repeatedly add the candidate that minimizes the optimal
/// partial matching cost of the growing union against the dense set.
fn greedy_aux(sparse: &[f64], dense: &[f64], candidates: &[f64], k: usize) -> Vec<f64> {
    let mut chosen: Vec<f64> = Vec::with_capacity(k);
    let mut remaining = candidates.to_vec();
    for _ in 0..k {
        let mut best_i = 0;
        let mut best_c = f64::INFINITY;
        for (i, &cand) in remaining.iter().enumerate() {
            let mut trial: Vec<f64> = sparse
                .iter()
                .copied()
                .chain(chosen.iter().copied())
                .chain(std::iter::once(cand))
                .collect();
            trial.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let c = partial_matching_cost(&trial, dense);
            if c < best_c {
                best_c = c;
                best_i = i;
            }
        }
        chosen.push(remaining.remove(best_i));
    }
    chosen
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > EXHAUSTIVE_SUBSET_CAP * 1000 {
            return acc; // large enough; callers only compare against the cap
        }
    }
    acc
}

fn enumerate_subsets(
    n: usize,
    k: usize,
    pick: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(pick);
        return;
    }
    for i in start..=(n - (k - depth)) {
        pick[depth] = i;
        enumerate_subsets(n, k, pick, depth + 1, i + 1, visit);
    }
}

/// The (sparse, auxiliary, dense) angle triple used by hybrid view sampling.
/// `union` lists the sparse angles first, then the auxiliary ones, so that
/// "the first N views" of the union are exactly the sparse set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub sparse: ViewAngleSet,
    pub aux: ViewAngleSet,
    pub dense: ViewAngleSet,
    pub union: Vec<f64>,
    /// True when the auxiliary set came from the greedy fallback.
    pub approximate: bool,
}

impl ViewPlan {
    pub fn build(
        sparse: ViewAngleSet,
        dense: ViewAngleSet,
        n_min: usize,
    ) -> Result<Self, GeometryError> {
        let n = sparse.len();
        if n < n_min || n > dense.len() {
            return Err(GeometryError::Infeasible(format!(
                "N = {n} outside [{n_min}, {}]",
                dense.len()
            )));
        }
        let sel = select_aux_angles(&sparse, &dense, n)?;
        let union: Vec<f64> = sparse
            .angles()
            .iter()
            .copied()
            .chain(sel.aux.angles().iter().copied())
            .collect();
        Ok(ViewPlan {
            sparse,
            aux: sel.aux,
            dense,
            union,
            approximate: sel.approximate,
        })
    }

    pub fn n_sparse(&self) -> usize {
        self.sparse.len()
    }

    pub fn n_total(&self) -> usize {
        self.union.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> ScanGeometry {
        ScanGeometry::centered(800.0, 1200.0, 64, 64, 1.0, (64, 64, 64), 1.5).unwrap()
    }

    #[test]
    fn source_positions_follow_the_orbit_convention() {
        let g = geom();
        let close = |a: [f64; 3], b: [f64; 3]| {
            a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
        };
        assert!(close(source_position(&g, 0.0), [800.0, 0.0, 0.0]));
        assert!(close(source_position(&g, 90.0), [0.0, 800.0, 0.0]));
        assert!(close(source_position(&g, 180.0), [-800.0, 0.0, 0.0]));
    }

    #[test]
    fn isocenter_projects_to_detector_center_at_any_angle() {
        let g = geom();
        for k in 0..36 {
            let (u, v) = project_point(&g, k as f64 * 10.0, [0.0, 0.0, 0.0]).unwrap();
            assert!((u - 31.5).abs() < 1e-9, "u = {u} at angle {k}");
            assert!((v - 31.5).abs() < 1e-9);
        }
    }

    #[test]
    fn in_plane_offsets_magnify_by_dsd_over_dso() {
        let g = geom();
        // +10 mm along û at angle 0 → +15 px (magnification 1.5, 1 mm pixels).
        let (u, v) = project_point(&g, 0.0, [0.0, 10.0, 0.0]).unwrap();
        assert!((u - 31.5 - 15.0).abs() < 1e-9);
        assert!((v - 31.5).abs() < 1e-9);
        // +20 mm along z → +30 px in v at any angle.
        let (_, v) = project_point(&g, 123.0, [0.0, 0.0, 20.0]).unwrap();
        assert!((v - 31.5 - 30.0).abs() < 1e-9);
        // Magnification property for random in-plane offsets.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let angle: f64 = rng.random_range(0.0..360.0);
            let f = ViewFrame::new(&g, angle);
            let s: f64 = rng.random_range(-30.0..30.0);
            let t: f64 = rng.random_range(-30.0..30.0);
            let p = [s * f.u[0] + t * f.v[0], s * f.u[1] + t * f.v[1], s * f.u[2] + t * f.v[2]];
            let (u, v) = project_point(&g, angle, p).unwrap();
            let du = (u - 31.5) * g.det_spacing_u;
            let dv = (v - 31.5) * g.det_spacing_v;
            let mag = g.dsd / g.dso;
            assert!((du - s * mag).abs() / (s.abs() * mag).max(1.0) < 1e-6);
            assert!((dv - t * mag).abs() / (t.abs() * mag).max(1.0) < 1e-6);
        }
    }

    #[test]
    fn points_behind_the_source_are_degenerate() {
        let g = geom();
        let err = project_point(&g, 0.0, [900.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::DegeneratePoint { .. }));
    }

    #[test]
    fn uniform_half_scan_spacing() {
        let a = uniform_half_scan_angles(4, 0.0).unwrap();
        assert_eq!(a.angles(), &[0.0, 45.0, 90.0, 135.0]);
        let a = uniform_half_scan_angles(2, 0.0).unwrap();
        assert_eq!(a.angles(), &[0.0, 90.0]);
        let a = uniform_half_scan_angles(200, 0.0).unwrap();
        assert_eq!(a.len(), 200);
        for w in a.angles().windows(2) {
            assert!((w[1] - w[0] - 0.9).abs() < 1e-12);
        }
        assert!(*a.angles().last().unwrap() < 180.0);
        assert_eq!(
            uniform_half_scan_angles(0, 0.0).unwrap_err(),
            GeometryError::InvalidCount
        );
    }

    #[test]
    fn angle_sets_reject_duplicates() {
        assert!(ViewAngleSet::new(vec![1.0, 1.0 + 1e-12]).is_err());
        assert!(ViewAngleSet::new(vec![10.0, 5.0, 20.0]).is_ok());
        assert!(ViewAngleSet::new(vec![-1.0]).is_err());
        assert!(ViewAngleSet::new(vec![360.0]).is_err());
    }

    fn brute_force_bijection_cost(a: &[f64], b: &[f64]) -> f64 {
        fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, a: &[f64], b: &[f64], best: &mut f64) {
            if rest.is_empty() {
                let c: f64 = chosen
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (a[i] - b[j]).abs())
                    .sum();
                *best = best.min(c);
                return;
            }
            for i in 0..rest.len() {
                let j = rest.remove(i);
                chosen.push(j);
                permute(rest, chosen, a, b, best);
                chosen.pop();
                rest.insert(i, j);
            }
        }
        let mut best = f64::INFINITY;
        permute(&mut (0..b.len()).collect(), &mut Vec::new(), a, b, &mut best);
        best
    }

    #[test]
    fn matching_cost_examples() {
        let a = ViewAngleSet::new(vec![0.0, 90.0]).unwrap();
        assert_eq!(matching_cost(&a, &a).unwrap(), 0.0);
        let b = ViewAngleSet::new(vec![0.0, 45.0]).unwrap();
        assert_eq!(matching_cost(&a, &b).unwrap(), 45.0);
        let x = ViewAngleSet::new(vec![10.0, 20.0, 30.0]).unwrap();
        let y = ViewAngleSet::new(vec![12.0, 19.0, 33.0]).unwrap();
        assert_eq!(matching_cost(&x, &y).unwrap(), 6.0);
        assert_eq!(
            matching_cost(&a, &x).unwrap_err(),
            GeometryError::SizeMismatch(2, 3)
        );
    }

    #[test]
    fn sorted_pairing_matches_permutation_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=7);
            let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let sa = ViewAngleSet::new(a.clone());
            let sb = ViewAngleSet::new(b.clone());
            let (sa, sb) = match (sa, sb) {
                (Ok(x), Ok(y)) => (x, y),
                _ => continue, // duplicate draw; skip
            };
            let fast = matching_cost(&sa, &sb).unwrap();
            let brute = brute_force_bijection_cost(&a, &b);
            assert!((fast - brute).abs() < 1e-9, "fast {fast} vs brute {brute}");
        }
    }

    #[test]
    fn aux_selection_examples() {
        let sparse = ViewAngleSet::new(vec![0.0, 90.0]).unwrap();
        let dense = ViewAngleSet::new(vec![0.0, 45.0, 90.0, 135.0]).unwrap();
        let sel = select_aux_angles(&sparse, &dense, 2).unwrap();
        assert_eq!(sel.aux.angles(), &[45.0, 135.0]);
        assert_eq!(sel.cost, 0.0);
        assert!(!sel.approximate);

        // N = N_max forces an empty auxiliary set.
        let sel = select_aux_angles(&dense, &dense, 4).unwrap();
        assert!(sel.aux.is_empty());

        let sparse = ViewAngleSet::new(vec![0.0]).unwrap();
        let dense = ViewAngleSet::new(vec![0.0, 60.0, 120.0]).unwrap();
        let sel = select_aux_angles(&sparse, &dense, 1).unwrap();
        assert_eq!(sel.aux.angles(), &[60.0, 120.0]);
    }

    #[test]
    fn aux_selection_is_infeasible_when_the_complement_is_too_small() {
        let sparse = ViewAngleSet::new(vec![10.0, 20.0]).unwrap();
        let dense = ViewAngleSet::new(vec![10.0, 20.0, 30.0]).unwrap();
        // Need 1 aux from a complement of size 1: feasible.
        assert!(select_aux_angles(&sparse, &dense, 2).is_ok());
        // Sparse disjoint from dense of equal size: every dense angle is a
        // candidate but we need N_max − N = 1 with complement 3: feasible.
        // Infeasible case: N smaller than sparse size.
        assert!(select_aux_angles(&sparse, &dense, 1).is_err());
    }

    #[test]
    fn exhaustive_aux_selection_beats_every_feasible_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n_max = rng.random_range(2..=8usize);
            let n = rng.random_range(1..=n_max);
            let dense_v: Vec<f64> = {
                let mut v: Vec<f64> = (0..n_max).map(|_| rng.random_range(0.0..180.0)).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                v
            };
            if dense_v.len() < n_max {
                continue;
            }
            let dense = ViewAngleSet::new(dense_v.clone()).unwrap();
            // Sparse: n angles, some possibly from dense.
            let mut sparse_v = Vec::new();
            for _ in 0..n {
                if rng.random_bool(0.5) {
                    sparse_v.push(dense_v[rng.random_range(0..n_max)]);
                } else {
                    sparse_v.push(rng.random_range(0.0..180.0));
                }
            }
            sparse_v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sparse_v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let sparse = match ViewAngleSet::new(sparse_v) {
                Ok(s) if s.len() == n => s,
                _ => continue,
            };
            let sel = match select_aux_angles(&sparse, &dense, n) {
                Ok(s) => s,
                Err(_) => continue,
            };
            assert!(!sel.approximate);
            // Constraints.
            assert_eq!(sel.aux.len(), n_max - n);
            for a in sel.aux.angles() {
                assert!(dense.contains(*a));
                assert!(!sparse.contains(*a));
            }
            // Optimality against every feasible subset.
            let candidates: Vec<f64> = dense
                .angles()
                .iter()
                .copied()
                .filter(|a| !sparse.contains(*a))
                .collect();
            let k = n_max - n;
            let mut pick = vec![0usize; k];
            let mut best = f64::INFINITY;
            enumerate_subsets(candidates.len(), k, &mut pick, 0, 0, &mut |idx| {
                let mut union: Vec<f64> = sparse
                    .angles()
                    .iter()
                    .copied()
                    .chain(idx.iter().map(|&i| candidates[i]))
                    .collect();
                union.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let c: f64 = union
                    .iter()
                    .zip(dense.angles())
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                best = best.min(c);
            });
            assert!(
                sel.cost <= best + 1e-9,
                "selected cost {} worse than best subset {}",
                sel.cost,
                best
            );
        }
    }

    #[test]
    fn greedy_fallback_engages_above_the_cap_and_satisfies_constraints() {
        // 40 candidates choose 20 ≫ cap.
        let dense = ViewAngleSet::new((0..40).map(|k| k as f64 * 4.5).collect()).unwrap();
        let sparse = ViewAngleSet::new((0..20).map(|k| k as f64 * 9.0 + 1.0).collect()).unwrap();
        let sel = select_aux_angles(&sparse, &dense, 20).unwrap();
        assert!(sel.approximate);
        assert_eq!(sel.aux.len(), 20);
        for a in sel.aux.angles() {
            assert!(dense.contains(*a));
            assert!(!sparse.contains(*a));
        }
    }

    #[test]
    fn greedy_matches_exhaustive_where_both_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let dense =
                ViewAngleSet::new((0..8).map(|k| k as f64 * 22.5).collect()).unwrap();
            let n = rng.random_range(4..8usize);
            let offset: f64 = rng.random_range(0.0..(180.0 / n as f64));
            let sparse = ViewAngleSet::new(
                (0..n).map(|k| offset + k as f64 * 180.0 / n as f64).collect(),
            )
            .unwrap();
            let exact = select_aux_angles(&sparse, &dense, n).unwrap();
            // Run the greedy path directly on the same instance.
            let candidates: Vec<f64> = dense
                .angles()
                .iter()
                .copied()
                .filter(|a| !sparse.contains(*a))
                .collect();
            let k = dense.len() - n;
            let chosen = greedy_aux(sparse.angles(), dense.angles(), &candidates, k);
            let mut union: Vec<f64> = sparse
                .angles()
                .iter()
                .copied()
                .chain(chosen.iter().copied())
                .collect();
            union.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let greedy_cost: f64 = union
                .iter()
                .zip(dense.angles())
                .map(|(x, y)| (x - y).abs())
                .sum();
            // Greedy is validated against exhaustive where both run: equal cost
            // on these evenly-spaced instances.
            assert!(
                (greedy_cost - exact.cost).abs() < 1e-9,
                "greedy {greedy_cost} vs exact {}",
                exact.cost
            );
        }
    }

    #[test]
    fn view_plan_orders_sparse_first() {
        let sparse = ViewAngleSet::new(vec![30.0, 120.0]).unwrap();
        let dense = ViewAngleSet::new(vec![0.0, 45.0, 90.0, 135.0]).unwrap();
        let plan = ViewPlan::build(sparse.clone(), dense.clone(), 1).unwrap();
        assert_eq!(plan.n_sparse(), 2);
        assert_eq!(plan.n_total(), 4);
        assert_eq!(&plan.union[..2], sparse.angles());
        for a in plan.aux.angles() {
            assert!(dense.contains(*a));
            assert!(!sparse.contains(*a));
        }
    }

    #[test]
    fn geometry_validation_rejects_bad_setups() {
        assert!(ScanGeometry::centered(800.0, 700.0, 8, 8, 1.0, (8, 8, 8), 1.0).is_err());
        assert!(ScanGeometry::centered(10.0, 1200.0, 8, 8, 1.0, (64, 64, 64), 1.5).is_err());
        assert!(ScanGeometry::centered(800.0, 1200.0, 0, 8, 1.0, (8, 8, 8), 1.0).is_err());
    }
}
