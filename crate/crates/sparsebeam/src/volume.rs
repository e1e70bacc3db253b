//! Volume and projection containers.

use thiserror::Error;

use crate::geometry::{ScanGeometry, ViewAngleSet};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("projection maximum is not positive; cannot normalize")]
    DegenerateRange,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// A voxelized scalar field. Values are dimensionless normalized attenuation,
/// stored x-fastest: `index = x + nx·(y + ny·z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<F: Scalar> {
    data: Vec<F>,
    pub shape: (usize, usize, usize),
    /// Isotropic voxel spacing, mm.
    pub spacing: f64,
    /// World position of the center of voxel (0, 0, 0), mm.
    pub origin: [f64; 3],
}

impl<F: Scalar> Volume<F> {
    pub fn new(data: Vec<F>, shape: (usize, usize, usize), spacing: f64, origin: [f64; 3]) -> Self {
        assert_eq!(data.len(), shape.0 * shape.1 * shape.2, "payload length");
        assert!(spacing > 0.0);
        Volume {
            data,
            shape,
            spacing,
            origin,
        }
    }

    pub fn zeros(shape: (usize, usize, usize), spacing: f64, origin: [f64; 3]) -> Self {
        Volume::new(vec![F::zero(); shape.0 * shape.1 * shape.2], shape, spacing, origin)
    }

    /// Zero volume on the geometry's reconstruction grid.
    pub fn zeros_like_geom(geom: &ScanGeometry) -> Self {
        Volume::zeros(geom.vol_shape, geom.voxel_spacing, geom.vol_origin)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> F {
        let (nx, ny, _) = self.shape;
        self.data[x + nx * (y + ny * z)]
    }

    pub fn check_finite(&self) -> Result<(), VolumeError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(VolumeError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// World position of a voxel center.
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing,
            self.origin[1] + y as f64 * self.spacing,
            self.origin[2] + z as f64 * self.spacing,
        ]
    }

    /// Trilinear interpolation at a world point, zero outside the grid.
    pub fn sample_world(&self, p: [f64; 3]) -> F {
        let cx = (p[0] - self.origin[0]) / self.spacing;
        let cy = (p[1] - self.origin[1]) / self.spacing;
        let cz = (p[2] - self.origin[2]) / self.spacing;
        self.sample_index(cx, cy, cz)
    }

    /// Trilinear interpolation in continuous index coordinates, zero padding
    /// outside `[0, n−1]` per axis.
    pub fn sample_index(&self, cx: f64, cy: f64, cz: f64) -> F {
        let (nx, ny, nz) = self.shape;
        let x0 = cx.floor();
        let y0 = cy.floor();
        let z0 = cz.floor();
        let fx = cx - x0;
        let fy = cy - y0;
        let fz = cz - z0;
        let (x0, y0, z0) = (x0 as isize, y0 as isize, z0 as isize);
        let mut acc = 0.0f64;
        for dz in 0..2 {
            let z = z0 + dz;
            if z < 0 || z >= nz as isize {
                continue;
            }
            let wz = if dz == 0 { 1.0 - fz } else { fz };
            for dy in 0..2 {
                let y = y0 + dy;
                if y < 0 || y >= ny as isize {
                    continue;
                }
                let wy = if dy == 0 { 1.0 - fy } else { fy };
                for dx in 0..2 {
                    let x = x0 + dx;
                    if x < 0 || x >= nx as isize {
                        continue;
                    }
                    let wx = if dx == 0 { 1.0 - fx } else { fx };
                    let v = self.data[x as usize + nx * (y as usize + ny * z as usize)];
                    acc += wx * wy * wz * v.as_f64();
                }
            }
        }
        F::of_f64(acc)
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(F) -> G) -> Volume<G> {
        Volume {
            data: self.data.iter().map(|v| f(*v)).collect(),
            shape: self.shape,
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.data {
            let x = v.as_f64();
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if self.data.is_empty() {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Multi-view post-log line-integral images plus the angles and geometry that
/// produced them. `norm_max` is the divisor applied so far during input
/// normalization (1.0 for raw data).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet<F: Scalar> {
    /// View-major, then row-major: `index = u + W·(v + H·view)`.
    views: Vec<F>,
    pub angles: ViewAngleSet,
    pub geom: ScanGeometry,
    pub norm_max: f64,
}

impl<F: Scalar> ProjectionSet<F> {
    pub fn new(views: Vec<F>, angles: ViewAngleSet, geom: ScanGeometry, norm_max: f64) -> Self {
        assert_eq!(
            views.len(),
            angles.len() * geom.det_rows * geom.det_cols,
            "payload length"
        );
        ProjectionSet {
            views,
            angles,
            geom,
            norm_max,
        }
    }

    pub fn zeros(angles: ViewAngleSet, geom: ScanGeometry) -> Self {
        let n = angles.len() * geom.det_rows * geom.det_cols;
        ProjectionSet::new(vec![F::zero(); n], angles, geom, 1.0)
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    pub fn view_shape(&self) -> (usize, usize) {
        (self.geom.det_rows, self.geom.det_cols)
    }

    pub fn data(&self) -> &[F] {
        &self.views
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.views
    }

    /// One H×W view image.
    pub fn view(&self, i: usize) -> &[F] {
        let n = self.geom.det_rows * self.geom.det_cols;
        &self.views[i * n..(i + 1) * n]
    }

    pub fn view_mut(&mut self, i: usize) -> &mut [F] {
        let n = self.geom.det_rows * self.geom.det_cols;
        &mut self.views[i * n..(i + 1) * n]
    }

    pub fn at(&self, view: usize, row: usize, col: usize) -> F {
        let w = self.geom.det_cols;
        self.view(view)[row * w + col]
    }

    pub fn max_value(&self) -> f64 {
        self.views
            .iter()
            .fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()))
    }

    /// Divides every pixel by the set's own maximum and folds the divisor into
    /// `norm_max`. Normalizing an already-normalized set is the identity.
    pub fn normalized(&self) -> Result<Self, VolumeError> {
        let max = self.max_value();
        self.normalized_by(max)
    }

    /// Divides every pixel by an externally supplied maximum (the dataset-wide
    /// maximum over dense candidate projections).
    pub fn normalized_by(&self, max: f64) -> Result<Self, VolumeError> {
        if !(max > 0.0) {
            return Err(VolumeError::DegenerateRange);
        }
        let inv = F::of_f64(1.0 / max);
        let one = F::one();
        let views = if inv == one {
            self.views.clone()
        } else {
            self.views.iter().map(|v| *v * inv).collect()
        };
        Ok(ProjectionSet {
            views,
            angles: self.angles.clone(),
            geom: self.geom.clone(),
            norm_max: self.norm_max * max,
        })
    }

    /// Extracts the views at the given angle indices. The result is stored in
    /// canonical increasing-angle order regardless of the index order given.
    pub fn subset_by_indices(&self, indices: &[usize]) -> Result<Self, VolumeError> {
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        let n = self.geom.det_rows * self.geom.det_cols;
        let mut views = Vec::with_capacity(indices.len() * n);
        let mut angles = Vec::with_capacity(indices.len());
        for &i in &indices {
            if i >= self.n_views() {
                return Err(VolumeError::ShapeMismatch(format!(
                    "view index {i} out of range ({} views)",
                    self.n_views()
                )));
            }
            views.extend_from_slice(self.view(i));
            angles.push(self.angles.angles()[i]);
        }
        let angles = ViewAngleSet::new(angles)
            .map_err(|e| VolumeError::ShapeMismatch(e.to_string()))?;
        Ok(ProjectionSet {
            views,
            angles,
            geom: self.geom.clone(),
            norm_max: self.norm_max,
        })
    }

    /// Index of the candidate view whose angle matches `angle` within 1e-6°.
    pub fn index_of_angle(&self, angle: f64) -> Option<usize> {
        self.angles
            .angles()
            .iter()
            .position(|a| (a - angle).abs() < 1e-6)
    }
}
