//! Image quality metrics.

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// `10 log10(peak^2 / MSE)`; `f64::INFINITY` when the images coincide.
pub fn psnr(u: &ScalarField, u_ref: &ScalarField, peak: f64) -> Result<f64> {
    u.ensure_same_shape(u_ref.shape())?;
    let d = u.sub(u_ref)?.l2_norm();
    let mse = d * d / u.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn window_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (k, t) in taps.iter_mut().enumerate() {
        let x = k as f64 - r;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = taps.iter().sum();
    taps.map(|t| t / total)
}

/// Gaussian-weighted window average over every fully contained window.
fn filter_valid(x: &[f64], rows: usize, cols: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let w = taps.len();
    let (vr, vc) = (rows - w + 1, cols - w + 1);
    let mut tmp = vec![0.0; rows * vc];
    for i in 0..rows {
        for j in 0..vc {
            let row = &x[i * cols + j..i * cols + j + w];
            tmp[i * vc + j] = row.iter().zip(taps).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; vr * vc];
    for i in 0..vr {
        for j in 0..vc {
            let mut acc = 0.0;
            for (t, &wt) in taps.iter().enumerate() {
                acc += wt * tmp[(i + t) * vc + j];
            }
            out[i * vc + j] = acc;
        }
    }
    (out, vr, vc)
}

/// Mean SSIM with an 11x11 Gaussian window (std 1.5) over valid windows,
/// `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2` and population (co)variances.
pub fn ssim(u: &ScalarField, u_ref: &ScalarField, peak: f64) -> Result<f64> {
    u.ensure_same_shape(u_ref.shape())?;
    let (rows, cols) = u.shape();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidShape {
            rows,
            cols,
            reason: "SSIM needs at least 11x11 pixels",
        });
    }
    let taps = window_taps();
    let (x, y) = (u.as_slice(), u_ref.as_slice());
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = y.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, _, _) = filter_valid(x, rows, cols, &taps);
    let (my, _, _) = filter_valid(y, rows, cols, &taps);
    let (mxx, _, _) = filter_valid(&xx, rows, cols, &taps);
    let (myy, _, _) = filter_valid(&yy, rows, cols, &taps);
    let (mxy, vr, vc) = filter_valid(&xy, rows, cols, &taps);

    let c1 = (K1 * peak).powi(2);
    let c2 = (K2 * peak).powi(2);
    let mut total = 0.0;
    for k in 0..vr * vc {
        let (a, b) = (mx[k], my[k]);
        let vx = mxx[k] - a * a;
        let vy = myy[k] - b * b;
        let cxy = mxy[k] - a * b;
        let num = (2.0 * a * b + c1) * (2.0 * cxy + c2);
        let den = (a * a + b * b + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / (vr * vc) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{add_gaussian_noise, NoiseSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair() -> (ScalarField, ScalarField) {
        let a = ScalarField::from_fn(23, 19, |i, j| ((i * 31 + j * 17) % 256) as f64);
        let b = ScalarField::from_fn(23, 19, |i, j| a.get(i, j) + ((i * 13 + j * 7) % 41) as f64 - 20.0);
        (a, b)
    }

    fn waves() -> ScalarField {
        ScalarField::from_fn(23, 19, |i, j| 128.0 + 100.0 * (i as f64 / 3.0).sin() * (j as f64 / 4.0).cos())
    }

    #[test]
    fn psnr_cases() {
        let u = ScalarField::from_fn(6, 5, |i, j| (i * 5 + j) as f64);
        assert_eq!(psnr(&u, &u, 255.0).unwrap(), f64::INFINITY);
        let v = u.map(|x| x + 10.0);
        assert!((psnr(&v, &u, 255.0).unwrap() - 20.0 * 25.5f64.log10()).abs() < 1e-12);
        assert!((psnr(&v, &u, 255.0).unwrap() - 28.130803608679106).abs() < 1e-9);
        let (a, b) = pair();
        // skimage.metrics.peak_signal_noise_ratio(a, b, data_range=255)
        assert!((psnr(&a, &b, 255.0).unwrap() - 26.6478555710191).abs() < 1e-10);
        assert!(psnr(&a, &ScalarField::zeros(2, 2), 255.0).is_err());
    }

    #[test]
    fn psnr_random_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = ScalarField::from_fn(9, 14, |_, _| rng.random_range(0.0..255.0));
        let b = ScalarField::from_fn(9, 14, |_, _| rng.random_range(0.0..255.0));
        let mut mse = 0.0;
        for i in 0..9 {
            for j in 0..14 {
                mse += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        mse /= 126.0;
        let expect = 10.0 * (255.0f64 * 255.0 / mse).log10();
        assert!((psnr(&a, &b, 255.0).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn psnr_drops_with_extra_noise() {
        let gt = ScalarField::from_fn(32, 32, |i, j| ((i * 9 + j * 5) % 200) as f64);
        for trial in 0..100 {
            let (u, _) = add_gaussian_noise(&gt, &NoiseSpec::new(0.05, trial)).unwrap();
            let (w, _) = add_gaussian_noise(&u, &NoiseSpec::new(0.05, 1000 + trial)).unwrap();
            assert!(psnr(&w, &gt, 255.0).unwrap() < psnr(&u, &gt, 255.0).unwrap());
        }
    }

    #[test]
    fn ssim_matches_skimage() {
        // skimage structural_similarity(..., gaussian_weights=True, sigma=1.5,
        // use_sample_covariance=False)
        let (a, b) = pair();
        assert!((ssim(&a, &b, 255.0).unwrap() - 0.9823817390442581).abs() < 1e-12);
        let c = waves();
        let inv = c.map(|v| 255.0 - v);
        assert!((ssim(&c, &inv, 255.0).unwrap() - -0.7580864084960155).abs() < 1e-12);
        assert!((ssim(&c, &b, 1.0).unwrap() - -0.0002323531935229189).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_symmetry_and_size() {
        let (a, b) = pair();
        assert!((ssim(&a, &a, 255.0).unwrap() - 1.0).abs() <= 1e-12);
        assert!((ssim(&a, &b, 255.0).unwrap() - ssim(&b, &a, 255.0).unwrap()).abs() <= 1e-12);
        let c = waves();
        assert!(ssim(&c, &c.map(|v| 255.0 - v), 255.0).unwrap() < 0.5);
        let small = ScalarField::zeros(10, 30);
        assert!(ssim(&small, &small, 255.0).is_err());
    }
}
