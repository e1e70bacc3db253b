//! Feldkamp-Davis-Kress filtered backprojection for circular cone-beam
//! orbits.
//!
//! Pipeline per view: cosine weighting, redundancy weighting (Parker-style
//! for short scans, uniform 1/2 for full orbits — this carries the classic
//! 1/2 of the Feldkamp formula), row-wise ramp filtering via a zero-padded
//! FFT, then voxel-driven backprojection with the dso²/U² distance weight and
//! a final Δβ scale.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::geometry::{ScanGeometry, ViewFrame};
use crate::parallel;
use crate::volume::{ProjectionSet, Volume};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum FdkError {
    #[error("FDK needs at least 2 views, got {0}")]
    InsufficientViews(usize),
}

/// Ramp filter apodization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdkFilter {
    RamLak,
    HannApodized,
}

/// Frequency response of the discrete ramp kernel on `len` samples with pitch
/// `tau` (mm). The response includes the Riemann Δu factor, so filtering is
/// `row → IFFT(FFT(row)·H)`. The DC bin is exactly zero.
pub fn ramp_frequency_response(len: usize, tau: f64, filter: FdkFilter) -> Vec<f64> {
    // Band-limited ramp kernel (h(0) = 1/(4τ²), h(n odd) = −1/(πnτ)²,
    // h(n even) = 0) laid out with wraparound indexing.
    let mut kernel: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for (i, k) in kernel.iter_mut().enumerate() {
        let n = if i <= len / 2 {
            i as isize
        } else {
            i as isize - len as isize
        };
        let v = if n == 0 {
            1.0 / (4.0 * tau * tau)
        } else if n % 2 != 0 {
            let d = std::f64::consts::PI * n as f64 * tau;
            -1.0 / (d * d)
        } else {
            0.0
        };
        *k = Complex::new(v, 0.0);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut kernel);
    let mut response: Vec<f64> = kernel.iter().map(|c| c.re.max(0.0) * tau).collect();
    response[0] = 0.0;
    if filter == FdkFilter::HannApodized {
        for (k, r) in response.iter_mut().enumerate() {
            let f = if k <= len / 2 { k } else { len - k } as f64 / (len as f64 / 2.0);
            *r *= 0.5 * (1.0 + (std::f64::consts::PI * f).cos());
        }
    }
    response
}

/// Parker-style redundancy weight for a ray at in-fan angle `gamma` measured
/// at orbit position `beta` (radians from the first view) on an orbit of
/// total angular coverage `span`. When `span = π + 2δ`, complementary rays
/// (β, γ) and (β + π − 2γ, −γ) receive weights summing to one.
pub fn parker_weight(beta: f64, gamma: f64, span: f64) -> f64 {
    let delta = ((span - std::f64::consts::PI) / 2.0).max(0.0);
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    let a = delta + gamma;
    if a > 1e-12 && beta < 2.0 * a {
        let s = (quarter_pi * beta.max(0.0) / a).sin();
        return (s * s).clamp(0.0, 1.0);
    }
    let b = delta - gamma;
    if b > 1e-12 && beta > span - 2.0 * b {
        let s = (quarter_pi * (span - beta).max(0.0) / b).sin();
        return (s * s).clamp(0.0, 1.0);
    }
    1.0
}

/// Cosine-weights, redundancy-weights and ramp-filters every view, returning
/// the filtered projection stack in f64.
fn filter_views<F: Scalar>(
    proj: &ProjectionSet<F>,
    geom: &ScanGeometry,
    filter: FdkFilter,
    short_scan: bool,
    span: f64,
) -> Vec<f64> {
    let (h, w) = (geom.det_rows, geom.det_cols);
    let n_views = proj.n_views();
    let pad = (2 * w).next_power_of_two();
    // Filter pitch in isocenter-scaled detector coordinates.
    let tau = geom.det_spacing_u * geom.dso / geom.dsd;
    let response = ramp_frequency_response(pad, tau, filter);
    let first_angle = proj.angles.angles()[0].to_radians();

    let half_w = 0.5 * (w as f64 - 1.0);
    let half_h = 0.5 * (h as f64 - 1.0);
    let u_mm: Vec<f64> = (0..w)
        .map(|u| (u as f64 - half_w) * geom.det_spacing_u)
        .collect();
    let gammas: Vec<f64> = u_mm.iter().map(|u| (u / geom.dsd).atan()).collect();

    let mut filtered = vec![0.0f64; n_views * h * w];
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(pad);
    let ifft = planner.plan_fft_inverse(pad);

    parallel::fill_chunks(&mut filtered, w, |start, out_row| {
        let view = start / (h * w);
        let v = (start / w) % h;
        let beta = proj.angles.angles()[view].to_radians() - first_angle;
        let v_mm = (v as f64 - half_h) * geom.det_spacing_v;
        let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); pad];
        for u in 0..w {
            let cosw = geom.dsd / (geom.dsd * geom.dsd + u_mm[u] * u_mm[u] + v_mm * v_mm).sqrt();
            let red = if short_scan {
                parker_weight(beta, gammas[u], span)
            } else {
                0.5
            };
            row[u] = Complex::new(proj.at(view, v, u).as_f64() * cosw * red, 0.0);
        }
        fft.process(&mut row);
        for (r, resp) in row.iter_mut().zip(&response) {
            *r *= *resp;
        }
        ifft.process(&mut row);
        let inv_pad = 1.0 / pad as f64;
        for (o, r) in out_row.iter_mut().zip(row.iter().take(w)) {
            *o = r.re * inv_pad;
        }
    });
    filtered
}

/// FDK reconstruction onto the geometry's volume grid. Output is clamped to
/// be nonnegative.
pub fn fdk_reconstruct<F: Scalar>(
    proj: &ProjectionSet<F>,
    geom: &ScanGeometry,
    filter: FdkFilter,
    short_scan: bool,
) -> Result<Volume<F>, FdkError> {
    let n_views = proj.n_views();
    if n_views < 2 {
        return Err(FdkError::InsufficientViews(n_views));
    }
    let angles = proj.angles.angles();
    let d_beta = (angles[n_views - 1] - angles[0]).to_radians() / (n_views - 1) as f64;
    let span = d_beta * n_views as f64;

    let filtered = filter_views(proj, geom, filter, short_scan, span);

    let (h, w) = (geom.det_rows, geom.det_cols);
    let frames: Vec<ViewFrame> = angles.iter().map(|a| ViewFrame::new(geom, *a)).collect();
    let (nx, ny, _) = geom.vol_shape;
    let mut vol = Volume::zeros_like_geom(geom);
    let half_w = 0.5 * (w as f64 - 1.0);
    let half_h = 0.5 * (h as f64 - 1.0);
    let dso2 = geom.dso * geom.dso;

    parallel::fill_chunks(vol.data_mut(), nx, |start, row| {
        let iz = start / (nx * ny);
        let iy = (start / nx) % ny;
        let z = geom.vol_origin[2] + iz as f64 * geom.voxel_spacing;
        let y = geom.vol_origin[1] + iy as f64 * geom.voxel_spacing;
        for (ix, out) in row.iter_mut().enumerate() {
            let x = geom.vol_origin[0] + ix as f64 * geom.voxel_spacing;
            let mut acc = 0.0f64;
            for (vi, f) in frames.iter().enumerate() {
                let d = [x - f.source[0], y - f.source[1], z - f.source[2]];
                let depth = d[0] * f.w[0] + d[1] * f.w[1] + d[2] * f.w[2];
                if depth <= 1e-6 {
                    continue;
                }
                let t = geom.dsd / depth;
                let u_px = t * (d[0] * f.u[0] + d[1] * f.u[1] + d[2] * f.u[2])
                    / geom.det_spacing_u
                    + half_w;
                let v_px = t * (d[0] * f.v[0] + d[1] * f.v[1] + d[2] * f.v[2])
                    / geom.det_spacing_v
                    + half_h;
                // Bilinear sample of the filtered view, zero outside.
                let u0 = u_px.floor();
                let v0 = v_px.floor();
                let fu = u_px - u0;
                let fv = v_px - v0;
                let (u0, v0) = (u0 as isize, v0 as isize);
                let view_base = vi * h * w;
                let mut q = 0.0;
                for dv in 0..2isize {
                    let vv = v0 + dv;
                    if vv < 0 || vv >= h as isize {
                        continue;
                    }
                    let wv = if dv == 0 { 1.0 - fv } else { fv };
                    for du in 0..2isize {
                        let uu = u0 + du;
                        if uu < 0 || uu >= w as isize {
                            continue;
                        }
                        let wu = if du == 0 { 1.0 - fu } else { fu };
                        q += wu * wv * filtered[view_base + vv as usize * w + uu as usize];
                    }
                }
                acc += q * dso2 / (depth * depth);
            }
            *out = F::of_f64((acc * d_beta).max(0.0));
        }
    });
    Ok(vol)
}
