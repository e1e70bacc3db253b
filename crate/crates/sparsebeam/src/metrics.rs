//! Volumetric image quality metrics.

use thiserror::Error;

use crate::volume::Volume;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("volume shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("data range must be positive")]
    InvalidRange,
}

/// PSNR cap reported when the volumes are identical (MSE = 0).
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB: `10·log10(data_range² / MSE)`, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr<F: Scalar>(a: &Volume<F>, b: &Volume<F>, data_range: f64) -> Result<f64, MetricsError> {
    if a.shape != b.shape {
        return Err(MetricsError::ShapeMismatch(a.shape, b.shape));
    }
    if !(data_range > 0.0) {
        return Err(MetricsError::InvalidRange);
    }
    let n = a.data().len() as f64;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP_DB))
}

const SSIM_WINDOW: usize = 7;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *t;
    }
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian filtering over the valid region: output dimension
/// shrinks by `SSIM_WINDOW − 1` per axis.
fn gaussian_filter_valid(
    data: &[f64],
    (nx, ny, nz): (usize, usize, usize),
) -> (Vec<f64>, (usize, usize, usize)) {
    let taps = gaussian_taps();
    let k = SSIM_WINDOW;
    let ox = nx - k + 1;
    // Pass along x.
    let mut fx = vec![0.0; ox * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            let src = &data[(z * ny + y) * nx..(z * ny + y + 1) * nx];
            let dst = &mut fx[(z * ny + y) * ox..(z * ny + y + 1) * ox];
            for (x, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * src[x + j];
                }
                *d = acc;
            }
        }
    }
    // Pass along y.
    let oy = ny - k + 1;
    let mut fy = vec![0.0; ox * oy * nz];
    for z in 0..nz {
        for y in 0..oy {
            for x in 0..ox {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * fx[(z * ny + y + j) * ox + x];
                }
                fy[(z * oy + y) * ox + x] = acc;
            }
        }
    }
    // Pass along z.
    let oz = nz - k + 1;
    let mut fz = vec![0.0; ox * oy * oz];
    for z in 0..oz {
        for y in 0..oy {
            for x in 0..ox {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * fy[((z + j) * oy + y) * ox + x];
                }
                fz[(z * oy + y) * ox + x] = acc;
            }
        }
    }
    (fz, (ox, oy, oz))
}

/// 3-D structural similarity with a 7³ Gaussian window (σ = 1.5), constants
/// K1 = 0.01 / K2 = 0.03 and data range 1, averaged over all positions where
/// the window fits entirely inside the volume. Volumes smaller than the
/// window fall back to a single global window.
pub fn ssim3d<F: Scalar>(a: &Volume<F>, b: &Volume<F>) -> Result<f64, MetricsError> {
    if a.shape != b.shape {
        return Err(MetricsError::ShapeMismatch(a.shape, b.shape));
    }
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let (nx, ny, nz) = a.shape;
    let av: Vec<f64> = a.data().iter().map(|v| v.as_f64()).collect();
    let bv: Vec<f64> = b.data().iter().map(|v| v.as_f64()).collect();

    if nx < SSIM_WINDOW || ny < SSIM_WINDOW || nz < SSIM_WINDOW {
        // Degenerate size: single window over everything, uniform weights.
        let n = av.len() as f64;
        let ma = av.iter().sum::<f64>() / n;
        let mb = bv.iter().sum::<f64>() / n;
        let va = av.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / n;
        let vb = bv.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / n;
        let cov = av
            .iter()
            .zip(&bv)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / n;
        return Ok(((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2)));
    }

    let sq_a: Vec<f64> = av.iter().map(|x| x * x).collect();
    let sq_b: Vec<f64> = bv.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x * y).collect();

    let shape = (nx, ny, nz);
    let (mu_a, out_shape) = gaussian_filter_valid(&av, shape);
    let (mu_b, _) = gaussian_filter_valid(&bv, shape);
    let (m_a2, _) = gaussian_filter_valid(&sq_a, shape);
    let (m_b2, _) = gaussian_filter_valid(&sq_b, shape);
    let (m_ab, _) = gaussian_filter_valid(&ab, shape);

    let n = out_shape.0 * out_shape.1 * out_shape.2;
    let mut total = 0.0;
    for i in 0..n {
        let ma = mu_a[i];
        let mb = mu_b[i];
        let va = m_a2[i] - ma * ma;
        let vb = m_b2[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / n as f64)
}
