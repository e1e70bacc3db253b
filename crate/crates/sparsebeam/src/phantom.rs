//! Analytic ellipsoid phantoms.
//!
//! Union-of-ellipsoids phantoms have closed-form line integrals (a sum of
//! chord lengths), which makes them the independent oracle for the ray
//! marching projector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::ScanGeometry;
use crate::volume::Volume;
use crate::Scalar;

/// One ellipsoid: axis-aligned semi-axes, rotated about z, shifted to
/// `center`, contributing `density` inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub rot_z_deg: f64,
    pub density: f64,
}

impl Ellipsoid {
    /// Maps a world point into the unit-sphere frame of this ellipsoid.
    fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let a = self.rot_z_deg.to_radians();
        let (s, c) = a.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let dz = p[2] - self.center[2];
        // Rotate by −rot_z.
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        [
            lx / self.semi_axes[0],
            ly / self.semi_axes[1],
            dz / self.semi_axes[2],
        ]
    }

    fn dir_to_local(&self, d: [f64; 3]) -> [f64; 3] {
        let a = self.rot_z_deg.to_radians();
        let (s, c) = a.sin_cos();
        let lx = c * d[0] + s * d[1];
        let ly = -s * d[0] + c * d[1];
        [
            lx / self.semi_axes[0],
            ly / self.semi_axes[1],
            d[2] / self.semi_axes[2],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let l = self.to_local(p);
        l[0] * l[0] + l[1] * l[1] + l[2] * l[2] <= 1.0
    }

    /// Chord length of a unit-direction ray through this ellipsoid (mm).
    pub fn chord(&self, origin: [f64; 3], dir: [f64; 3]) -> f64 {
        let o = self.to_local(origin);
        let d = self.dir_to_local(dir);
        let a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let b = 2.0 * (o[0] * d[0] + o[1] * d[1] + o[2] * d[2]);
        let c = o[0] * o[0] + o[1] * o[1] + o[2] * o[2] - 1.0;
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 || a == 0.0 {
            return 0.0;
        }
        // Roots in the original ray parameter (dir is unit length in world).
        disc.sqrt() / a
    }
}

/// A phantom built as a sum of ellipsoid densities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidPhantomSpec {
    pub ellipsoids: Vec<Ellipsoid>,
}

impl EllipsoidPhantomSpec {
    pub fn sphere(center: [f64; 3], radius: f64, density: f64) -> Self {
        EllipsoidPhantomSpec {
            ellipsoids: vec![Ellipsoid {
                center,
                semi_axes: [radius; 3],
                rot_z_deg: 0.0,
                density,
            }],
        }
    }

    /// A radially stratified sphere: `shells` concentric spheres of equal
    /// density steps, so the summed profile ramps from `density` at the core
    /// to zero at `radius`. Softens the boundary that a single hard sphere
    /// would put across one voxel.
    pub fn stratified_sphere(center: [f64; 3], radius: f64, density: f64, shells: usize) -> Self {
        let shells = shells.max(1);
        let step = density / shells as f64;
        EllipsoidPhantomSpec {
            ellipsoids: (1..=shells)
                .map(|k| Ellipsoid {
                    center,
                    semi_axes: [radius * k as f64 / shells as f64; 3],
                    rot_z_deg: 0.0,
                    density: step,
                })
                .collect(),
        }
    }

    pub fn density_at(&self, p: [f64; 3]) -> f64 {
        self.ellipsoids
            .iter()
            .filter(|e| e.contains(p))
            .map(|e| e.density)
            .sum()
    }
}

/// Voxelizes a phantom on the geometry's volume grid. Each voxel takes the
/// summed density of the ellipsoids containing its center, clamped to [0, 1].
pub fn generate_phantom<F: Scalar>(spec: &EllipsoidPhantomSpec, geom: &ScanGeometry) -> Volume<F> {
    let (nx, ny, nz) = geom.vol_shape;
    let sp = geom.voxel_spacing;
    let o = geom.vol_origin;
    let mut data = vec![F::zero(); nx * ny * nz];
    for iz in 0..nz {
        let z = o[2] + iz as f64 * sp;
        for iy in 0..ny {
            let y = o[1] + iy as f64 * sp;
            let row = &mut data[(iz * ny + iy) * nx..(iz * ny + iy + 1) * nx];
            for (ix, out) in row.iter_mut().enumerate() {
                let x = o[0] + ix as f64 * sp;
                let v = spec.density_at([x, y, z]).clamp(0.0, 1.0);
                *out = F::of_f64(v);
            }
        }
    }
    Volume::new(data, (nx, ny, nz), sp, o)
}

/// Closed-form line integral of the phantom along a unit-direction ray:
/// Σ density × chord length. Rays that miss contribute zero.
pub fn analytic_ray_integral(
    spec: &EllipsoidPhantomSpec,
    ray_origin: [f64; 3],
    ray_dir: [f64; 3],
) -> f64 {
    let n2 = ray_dir[0] * ray_dir[0] + ray_dir[1] * ray_dir[1] + ray_dir[2] * ray_dir[2];
    debug_assert!((n2 - 1.0).abs() < 1e-9, "ray_dir must be unit length");
    spec.ellipsoids
        .iter()
        .map(|e| e.density * e.chord(ray_origin, ray_dir))
        .sum()
}

/// Parameters for random training phantoms: a large background ellipsoid plus
/// a few interior blobs, densities kept low enough that line integrals stay
/// in the measurable range of the noise model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomPhantomParams {
    pub background_semi_axes: (f64, f64),
    pub background_density: (f64, f64),
    pub blobs: (usize, usize),
    pub blob_semi_axes: (f64, f64),
    pub blob_density: (f64, f64),
    /// All blob centers stay within this radius of the origin.
    pub placement_radius: f64,
}

impl Default for RandomPhantomParams {
    fn default() -> Self {
        RandomPhantomParams {
            background_semi_axes: (22.0, 30.0),
            background_density: (0.05, 0.09),
            blobs: (2, 4),
            blob_semi_axes: (4.0, 11.0),
            blob_density: (0.05, 0.20),
            placement_radius: 16.0,
        }
    }
}

/// Draws a random phantom spec. All densities are positive, so the summed
/// field is nonnegative everywhere.
pub fn random_phantom<R: Rng>(rng: &mut R, p: &RandomPhantomParams) -> EllipsoidPhantomSpec {
    let mut ellipsoids = Vec::new();
    let bg_axes = [
        rng.random_range(p.background_semi_axes.0..=p.background_semi_axes.1),
        rng.random_range(p.background_semi_axes.0..=p.background_semi_axes.1),
        rng.random_range(p.background_semi_axes.0..=p.background_semi_axes.1),
    ];
    ellipsoids.push(Ellipsoid {
        center: [0.0, 0.0, 0.0],
        semi_axes: bg_axes,
        rot_z_deg: rng.random_range(0.0..180.0),
        density: rng.random_range(p.background_density.0..=p.background_density.1),
    });
    let n_blobs = rng.random_range(p.blobs.0..=p.blobs.1);
    for _ in 0..n_blobs {
        let r = p.placement_radius;
        ellipsoids.push(Ellipsoid {
            center: [
                rng.random_range(-r..=r),
                rng.random_range(-r..=r),
                rng.random_range(-r..=r),
            ],
            semi_axes: [
                rng.random_range(p.blob_semi_axes.0..=p.blob_semi_axes.1),
                rng.random_range(p.blob_semi_axes.0..=p.blob_semi_axes.1),
                rng.random_range(p.blob_semi_axes.0..=p.blob_semi_axes.1),
            ],
            rot_z_deg: rng.random_range(0.0..180.0),
            density: rng.random_range(p.blob_density.0..=p.blob_density.1),
        });
    }
    EllipsoidPhantomSpec { ellipsoids }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ScanGeometry {
        ScanGeometry::centered(800.0, 1200.0, 64, 64, 1.0, (64, 64, 64), 1.0).unwrap()
    }

    #[test]
    fn empty_spec_gives_a_zero_volume() {
        let vol: Volume<f32> = generate_phantom(&EllipsoidPhantomSpec::default(), &geom());
        assert!(vol.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn centered_sphere_hits_its_density_at_the_center_voxel() {
        let spec = EllipsoidPhantomSpec::sphere([0.0, 0.0, 0.0], 10.0, 0.7);
        let g = ScanGeometry::centered(800.0, 1200.0, 64, 64, 1.0, (65, 65, 65), 1.0).unwrap();
        let vol: Volume<f32> = generate_phantom(&spec, &g);
        assert_eq!(vol.at(32, 32, 32), 0.7);
    }

    #[test]
    fn voxel_sum_approximates_the_sphere_volume() {
        let r = 20.3;
        let mu = 0.5;
        let spec = EllipsoidPhantomSpec::sphere([0.0, 0.0, 0.0], r, mu);
        let vol: Volume<f64> = generate_phantom(&spec, &geom());
        let sum: f64 = vol.data().iter().sum();
        let voxel_volume = 1.0;
        let analytic = mu * 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        let rel = (sum * voxel_volume - analytic).abs() / analytic;
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn rays_missing_all_ellipsoids_integrate_to_zero() {
        let spec = EllipsoidPhantomSpec::sphere([0.0, 0.0, 0.0], 5.0, 1.0);
        let v = analytic_ray_integral(&spec, [0.0, 100.0, 0.0], [1.0, 0.0, 0.0]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn diameter_and_offset_chords_match_the_closed_form() {
        let r = 7.0;
        let mu = 0.3;
        let spec = EllipsoidPhantomSpec::sphere([0.0, 0.0, 0.0], r, mu);
        let d = analytic_ray_integral(&spec, [-100.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((d - 2.0 * r * mu).abs() < 1e-12);
        let b = 3.0;
        let c = analytic_ray_integral(&spec, [-100.0, b, 0.0], [1.0, 0.0, 0.0]);
        assert!((c - 2.0 * mu * (r * r - b * b).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn integral_is_invariant_under_joint_z_rotation() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = EllipsoidPhantomSpec {
            ellipsoids: vec![
                Ellipsoid {
                    center: [5.0, -3.0, 2.0],
                    semi_axes: [8.0, 4.0, 6.0],
                    rot_z_deg: 25.0,
                    density: 0.4,
                },
                Ellipsoid {
                    center: [-6.0, 1.0, -2.0],
                    semi_axes: [5.0, 9.0, 3.0],
                    rot_z_deg: 140.0,
                    density: 0.2,
                },
            ],
        };
        for _ in 0..20 {
            let phi: f64 = rng.random_range(0.0..360.0);
            let (s, c) = phi.to_radians().sin_cos();
            let rot = |p: [f64; 3]| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
            let o = [
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-20.0..20.0),
            ];
            let mut d: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            d = [d[0] / n, d[1] / n, d[2] / n];
            let base = analytic_ray_integral(&spec, o, d);
            let rotated_spec = EllipsoidPhantomSpec {
                ellipsoids: spec
                    .ellipsoids
                    .iter()
                    .map(|e| Ellipsoid {
                        center: rot(e.center),
                        rot_z_deg: e.rot_z_deg + phi,
                        ..e.clone()
                    })
                    .collect(),
            };
            let turned = analytic_ray_integral(&rotated_spec, rot(o), rot(d));
            assert!(
                (base - turned).abs() <= 1e-9 * base.abs().max(1.0),
                "base {base} vs rotated {turned}"
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = EllipsoidPhantomSpec::sphere([1.0, 2.0, 3.0], 12.0, 0.5);
        let a: Volume<f32> = generate_phantom(&spec, &geom());
        let b: Volume<f32> = generate_phantom(&spec, &geom());
        assert_eq!(a.data(), b.data());
    }
}
