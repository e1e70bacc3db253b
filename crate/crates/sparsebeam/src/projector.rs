//! Ray-marching forward projector, its exact adjoint, and the photon noise
//! model.
//!
//! Rays march from the source to each detector pixel center through the
//! volume bounding box with step `Δs = step_frac × voxel_spacing`,
//! accumulating trilinear samples × Δs. The adjoint transposes exactly that
//! sampling pattern, which is what SART and the dot-product test require.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::geometry::{ScanGeometry, ViewAngleSet, ViewFrame};
use crate::parallel;
use crate::volume::{ProjectionSet, Volume};
use crate::Scalar;

/// Precomputed per-ray marching plan: start position in continuous voxel
/// index coordinates and the per-step index increment.
struct RayMarch {
    start: [f64; 3],
    step: [f64; 3],
    n_steps: usize,
}

fn ray_box_range(origin: [f64; 3], dir: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if dir[a].abs() < 1e-300 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let (ta, tb) = ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv);
        let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    if t1 <= t0 {
        None
    } else {
        Some((t0, t1))
    }
}

fn plan_ray(geom: &ScanGeometry, frame: &ViewFrame, u: usize, v: usize, ds: f64) -> Option<RayMarch> {
    let pix = frame.pixel_center(geom, u as f64, v as f64);
    let src = frame.source;
    let mut dir = [pix[0] - src[0], pix[1] - src[1], pix[2] - src[2]];
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    dir = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
    let (lo, hi) = geom.volume_bounds();
    let (t0, t1) = ray_box_range(src, dir, lo, hi)?;
    let n_steps = ((t1 - t0) / ds).ceil() as usize;
    if n_steps == 0 {
        return None;
    }
    let inv_sp = 1.0 / geom.voxel_spacing;
    let t_first = t0 + 0.5 * ds;
    let start = [
        (src[0] + t_first * dir[0] - geom.vol_origin[0]) * inv_sp,
        (src[1] + t_first * dir[1] - geom.vol_origin[1]) * inv_sp,
        (src[2] + t_first * dir[2] - geom.vol_origin[2]) * inv_sp,
    ];
    let step = [
        dir[0] * ds * inv_sp,
        dir[1] * ds * inv_sp,
        dir[2] * ds * inv_sp,
    ];
    Some(RayMarch {
        start,
        step,
        n_steps,
    })
}

#[inline]
fn trilinear_gather<F: Scalar>(
    data: &[F],
    (nx, ny, nz): (usize, usize, usize),
    p: [f64; 3],
) -> f64 {
    let x0f = p[0].floor();
    let y0f = p[1].floor();
    let z0f = p[2].floor();
    let fx = p[0] - x0f;
    let fy = p[1] - y0f;
    let fz = p[2] - z0f;
    let (x0, y0, z0) = (x0f as isize, y0f as isize, z0f as isize);
    // Fast path: all eight corners in bounds.
    if x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + 1 < nx as isize && y0 + 1 < ny as isize && z0 + 1 < nz as isize
    {
        let (x0, y0, z0) = (x0 as usize, y0 as usize, z0 as usize);
        let i000 = x0 + nx * (y0 + ny * z0);
        let i001 = i000 + nx * ny;
        let c00 = data[i000].as_f64() * (1.0 - fx) + data[i000 + 1].as_f64() * fx;
        let c10 = data[i000 + nx].as_f64() * (1.0 - fx) + data[i000 + nx + 1].as_f64() * fx;
        let c01 = data[i001].as_f64() * (1.0 - fx) + data[i001 + 1].as_f64() * fx;
        let c11 = data[i001 + nx].as_f64() * (1.0 - fx) + data[i001 + nx + 1].as_f64() * fx;
        return (c00 * (1.0 - fy) + c10 * fy) * (1.0 - fz) + (c01 * (1.0 - fy) + c11 * fy) * fz;
    }
    let mut acc = 0.0;
    for dz in 0..2isize {
        let z = z0 + dz;
        if z < 0 || z >= nz as isize {
            continue;
        }
        let wz = if dz == 0 { 1.0 - fz } else { fz };
        for dy in 0..2isize {
            let y = y0 + dy;
            if y < 0 || y >= ny as isize {
                continue;
            }
            let wy = if dy == 0 { 1.0 - fy } else { fy };
            for dx in 0..2isize {
                let x = x0 + dx;
                if x < 0 || x >= nx as isize {
                    continue;
                }
                let wx = if dx == 0 { 1.0 - fx } else { fx };
                acc += wx * wy * wz * data[x as usize + nx * (y as usize + ny * z as usize)].as_f64();
            }
        }
    }
    acc
}

#[inline]
fn trilinear_scatter<F: Scalar>(
    data: &mut [F],
    (nx, ny, nz): (usize, usize, usize),
    p: [f64; 3],
    value: f64,
) {
    let x0f = p[0].floor();
    let y0f = p[1].floor();
    let z0f = p[2].floor();
    let fx = p[0] - x0f;
    let fy = p[1] - y0f;
    let fz = p[2] - z0f;
    let (x0, y0, z0) = (x0f as isize, y0f as isize, z0f as isize);
    for dz in 0..2isize {
        let z = z0 + dz;
        if z < 0 || z >= nz as isize {
            continue;
        }
        let wz = if dz == 0 { 1.0 - fz } else { fz };
        for dy in 0..2isize {
            let y = y0 + dy;
            if y < 0 || y >= ny as isize {
                continue;
            }
            let wy = if dy == 0 { 1.0 - fy } else { fy };
            for dx in 0..2isize {
                let x = x0 + dx;
                if x < 0 || x >= nx as isize {
                    continue;
                }
                let wx = if dx == 0 { 1.0 - fx } else { fx };
                let idx = x as usize + nx * (y as usize + ny * z as usize);
                data[idx] += F::of_f64(wx * wy * wz * value);
            }
        }
    }
}

/// Forward projects a volume at the given angles. `step_frac` is the march
/// step as a fraction of the voxel spacing, in `(0, 1]`.
pub fn forward_project<F: Scalar>(
    vol: &Volume<F>,
    geom: &ScanGeometry,
    angles: &ViewAngleSet,
    step_frac: f64,
) -> ProjectionSet<F> {
    assert!(step_frac > 0.0 && step_frac <= 1.0, "step_frac in (0, 1]");
    let ds = step_frac * geom.voxel_spacing;
    let (h, w) = (geom.det_rows, geom.det_cols);
    let shape = vol.shape;
    let mut out = vec![F::zero(); angles.len() * h * w];
    let frames: Vec<ViewFrame> = angles
        .angles()
        .iter()
        .map(|a| ViewFrame::new(geom, *a))
        .collect();
    // Each worker owns whole rows of output pixels.
    parallel::fill_chunks(&mut out, w, |start, row| {
        let view = start / (h * w);
        let v = (start / w) % h;
        let frame = &frames[view];
        for (u, pix) in row.iter_mut().enumerate() {
            let Some(ray) = plan_ray(geom, frame, u, v, ds) else {
                continue;
            };
            let mut p = ray.start;
            let mut acc = 0.0f64;
            for _ in 0..ray.n_steps {
                acc += trilinear_gather(vol.data(), shape, p);
                p[0] += ray.step[0];
                p[1] += ray.step[1];
                p[2] += ray.step[2];
            }
            *pix = F::of_f64(acc * ds);
        }
    });
    ProjectionSet::new(out, angles.clone(), geom.clone(), 1.0)
}

/// Exact adjoint of [`forward_project`]: every trilinear read of weight `w`
/// from voxel `q` becomes an accumulation of `w × pixel` into `q`.
pub fn backproject<F: Scalar>(
    proj: &ProjectionSet<F>,
    geom: &ScanGeometry,
    step_frac: f64,
) -> Volume<F> {
    assert!(step_frac > 0.0 && step_frac <= 1.0, "step_frac in (0, 1]");
    let ds = step_frac * geom.voxel_spacing;
    let (h, w) = (geom.det_rows, geom.det_cols);
    let shape = geom.vol_shape;
    let n_rays = proj.n_views() * h * w;
    let frames: Vec<ViewFrame> = proj
        .angles
        .angles()
        .iter()
        .map(|a| ViewFrame::new(geom, *a))
        .collect();
    let mut vol = Volume::zeros_like_geom(geom);
    let data = proj.data();
    parallel::scatter_reduce(
        n_rays,
        shape.0 * shape.1 * shape.2,
        F::zero(),
        |range, acc| {
            for ray_idx in range {
                let value = data[ray_idx].as_f64() * ds;
                if value == 0.0 {
                    continue;
                }
                let view = ray_idx / (h * w);
                let v = (ray_idx / w) % h;
                let u = ray_idx % w;
                let Some(ray) = plan_ray(geom, &frames[view], u, v, ds) else {
                    continue;
                };
                let mut p = ray.start;
                for _ in 0..ray.n_steps {
                    trilinear_scatter(acc, shape, p, value);
                    p[0] += ray.step[0];
                    p[1] += ray.step[1];
                    p[2] += ray.step[2];
                }
            }
        },
        vol.data_mut(),
    );
    vol
}

/// Counter-based per-pixel RNG: reproducible and independent of evaluation
/// order.
fn pixel_rng(seed: u64, view: u64, pixel: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&view.to_le_bytes());
    key[16..24].copy_from_slice(&pixel.to_le_bytes());
    key[24..32].copy_from_slice(&0x5350_424d_4e4f_4953u64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Applies quantum noise to clean post-log projections: per pixel with clean
/// value `g`, counts ~ Poisson(i0·e^(−g)) plus Normal(0, σ), clamped to ≥ 1;
/// the output is ln(i0 / counts).
pub fn apply_noise<F: Scalar>(
    clean: &ProjectionSet<F>,
    i0: f64,
    sigma: f64,
    seed: u64,
) -> ProjectionSet<F> {
    assert!(i0 > 0.0, "photon flux must be positive");
    assert!(sigma >= 0.0, "gaussian sigma must be nonnegative");
    let (h, w) = clean.view_shape();
    let px_per_view = h * w;
    let mut out = clean.clone();
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).unwrap());
    parallel::fill_chunks(out.data_mut(), w, |start, row| {
        let view = (start / px_per_view) as u64;
        for (i, g) in row.iter_mut().enumerate() {
            let pixel = ((start + i) % px_per_view) as u64;
            let mut rng = pixel_rng(seed, view, pixel);
            let lambda = i0 * (-g.as_f64()).exp();
            let mut counts = if lambda > 1e-12 {
                Poisson::new(lambda).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            if let Some(n) = &normal {
                counts += n.sample(&mut rng);
            }
            counts = counts.max(1.0);
            *g = F::of_f64((i0 / counts).ln());
        }
    });
    out
}

/// Compares a DRR against the analytic phantom oracle. Returns the maximum
/// per-ray relative error over central rays (analytic integral above both the
/// absolute floor 0.1 and `central_frac` of the peak) and the number of rays
/// compared.
pub fn oracle_max_relative_error<F: Scalar>(
    geom: &ScanGeometry,
    spec: &crate::phantom::EllipsoidPhantomSpec,
    angles: &ViewAngleSet,
    step_frac: f64,
    central_frac: f64,
) -> (f64, usize) {
    let vol: Volume<F> = crate::phantom::generate_phantom(spec, geom);
    let drr = forward_project(&vol, geom, angles, step_frac);
    let mut oracles = vec![0.0f64; drr.data().len()];
    let mut peak = 0.0f64;
    for (vi, a) in angles.angles().iter().enumerate() {
        let frame = ViewFrame::new(geom, *a);
        for v in 0..geom.det_rows {
            for u in 0..geom.det_cols {
                let pix = frame.pixel_center(geom, u as f64, v as f64);
                let mut d = [
                    pix[0] - frame.source[0],
                    pix[1] - frame.source[1],
                    pix[2] - frame.source[2],
                ];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                d = [d[0] / n, d[1] / n, d[2] / n];
                let o = crate::phantom::analytic_ray_integral(spec, frame.source, d);
                oracles[(vi * geom.det_rows + v) * geom.det_cols + u] = o;
                peak = peak.max(o);
            }
        }
    }
    let mut max_rel = 0.0f64;
    let mut n_central = 0;
    for (got, oracle) in drr.data().iter().zip(&oracles) {
        if *oracle > (central_frac * peak).max(0.1) {
            n_central += 1;
            max_rel = max_rel.max((got.as_f64() - oracle).abs() / oracle);
        }
    }
    (max_rel, n_central)
}
