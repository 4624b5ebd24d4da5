//! Estimation of the Lipschitz budget `gamma`.
//!
//! The over-TV pipeline denoises heavily with ROF, smooths the residual
//! `f - u_hat` with a Gaussian of width `rho` and takes the pointwise
//! gradient magnitude of the result.

use crate::diffops::{grad, GridSpacing};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::pdhg::{run_grad_pdhg, SolveReport, SolverParams};
use crate::prox::project_ball_in_place;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEstimateParams {
    pub lambda: f64,
    pub rho: f64,
    pub rof_tol: f64,
    pub rof_max_iter: usize,
}

impl Default for GammaEstimateParams {
    fn default() -> Self {
        Self {
            lambda: 500.0,
            rho: 2.0,
            rof_tol: 1e-4,
            rof_max_iter: 20_000,
        }
    }
}

impl GammaEstimateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be positive, got {}", self.lambda)));
        }
        check_rho(self.rho)?;
        self.rof_controls().validate()
    }

    /// Inner ROF controls. The dual variable lives in a ball of radius
    /// `lambda`, so the dual step is scaled up by `c = max(lambda / 8, 1)` and
    /// the primal step down by the same factor (`sigma tau` is unchanged).
    pub fn rof_controls(&self) -> SolverParams {
        let base = SolverParams::default();
        let c = (self.lambda / 8.0).max(1.0);
        SolverParams {
            sigma: base.sigma * c,
            tau: base.tau / c,
            tol: self.rof_tol,
            max_iter: self.rof_max_iter,
            record_history: false,
            ..base
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    Ok(())
}

/// PDHG solve of `min lambda TV(u) + 1/2 ||u - f||^2`, with `lambda` moved
/// into the radius of the dual ball.
pub fn rof_solve(f: &ScalarField, lambda: f64, controls: &SolverParams) -> Result<SolveReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    controls.validate()?;
    let fs = f.as_slice();
    Ok(run_grad_pdhg(
        f,
        controls,
        None,
        |p1, p2| project_ball_in_place(p1, p2, lambda),
        |u, tau| {
            for (x, &fk) in u.iter_mut().zip(fs) {
                *x = (*x + tau * fk) / (1.0 + tau);
            }
        },
    ))
}

pub fn rof_denoise(f: &ScalarField, lambda: f64, controls: &SolverParams) -> Result<ScalarField> {
    Ok(rof_solve(f, lambda, controls)?.final_u)
}

/// `lambda TV(u) + 1/2 ||u - f||^2` at unit spacing.
pub fn rof_objective(u: &ScalarField, f: &ScalarField, lambda: f64) -> Result<f64> {
    let d = u.sub(f)?.l2_norm();
    Ok(lambda * crate::regularisers::tv(u, GridSpacing::UNIT) + 0.5 * d * d)
}

/// Normalised Gaussian taps for offsets `-r..=r`, `r = ceil(3 rho)`.
pub fn gaussian_kernel(rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let radius = (3.0 * rho).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * rho * rho)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    Ok(taps)
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(idx: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let k = idx.rem_euclid(period);
    (if k >= n { period - 1 - k } else { k }) as usize
}

/// Separable Gaussian smoothing with reflecting boundary.
pub fn gaussian_smooth(r: &ScalarField, rho: f64) -> Result<ScalarField> {
    let taps = gaussian_kernel(rho)?;
    let radius = (taps.len() / 2) as i64;
    let (rows, cols) = r.shape();
    let src = r.as_slice();

    let mut tmp = vec![0.0; rows * cols];
    for i in 0..rows {
        let row = &src[i * cols..(i + 1) * cols];
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                acc += w * row[reflect(j as i64 + t as i64 - radius, cols)];
            }
            tmp[i * cols + j] = acc;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for (t, &w) in taps.iter().enumerate() {
            let si = reflect(i as i64 + t as i64 - radius, rows);
            let srow = &tmp[si * cols..(si + 1) * cols];
            let orow = &mut out[i * cols..(i + 1) * cols];
            for (o, &s) in orow.iter_mut().zip(srow) {
                *o += w * s;
            }
        }
    }
    Ok(ScalarField::from_raw(rows, cols, out))
}

/// `gamma = |grad K_rho * (f - rof(f, lambda))|`.
pub fn estimate_gamma_over_tv(f: &ScalarField, params: &GammaEstimateParams) -> Result<ScalarField> {
    params.validate()?;
    let u_hat = rof_denoise(f, params.lambda, &params.rof_controls())?;
    let residual = f.sub(&u_hat)?;
    let smoothed = gaussian_smooth(&residual, params.rho)?;
    Ok(grad(&smoothed, GridSpacing::UNIT).norm2_pointwise())
}

/// Raw gradient magnitude of a ground-truth image.
pub fn gamma_from_ground_truth(u_gt: &ScalarField) -> ScalarField {
    grad(u_gt, GridSpacing::UNIT).norm2_pointwise()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularisers::tvpwl_closed_form;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rows: usize, cols: usize, seed: u64, amp: f64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(rows, cols, |_, _| rng.random_range(-amp..amp))
    }

    fn variance(u: &ScalarField) -> f64 {
        let m = u.mean();
        u.as_slice().iter().map(|x| (x - m) * (x - m)).sum::<f64>() / u.len() as f64
    }

    #[test]
    fn kernel_normalised() {
        for rho in [0.3, 1.0, 1.5, 2.0, 7.2] {
            let k = gaussian_kernel(rho).unwrap();
            assert_eq!(k.len(), 2 * (3.0 * rho).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert!(gaussian_kernel(0.0).is_err());
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-5..9).map(|k| reflect(k, 4)).collect();
        assert_eq!(got, vec![3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
    }

    #[test]
    fn smooth_matches_scipy_reflect() {
        // scipy.ndimage.gaussian_filter(x, 2.0, mode='reflect', truncate=3.0)
        let x = ScalarField::from_fn(7, 10, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let y = gaussian_smooth(&x, 2.0).unwrap();
        for &(i, j, v) in &[
            (0, 0, 4.837935411349704),
            (3, 4, 4.985787513529887),
            (6, 9, 4.1323585207142814),
            (2, 7, 5.049928881016395),
        ] {
            assert!((y.get(i, j) - v).abs() <= 1e-12, "({i},{j}) {} vs {v}", y.get(i, j));
        }
        // Kernel larger than the image: repeated reflections.
        let mut w = ScalarField::zeros(5, 4);
        w.as_mut_slice()[1] = 1.0;
        let yw = gaussian_smooth(&w, 2.0).unwrap();
        assert!((yw.get(4, 3) - 0.009213695050308172).abs() <= 1e-14);
    }

    #[test]
    fn smooth_impulse_is_bump() {
        let mut z = ScalarField::zeros(15, 15);
        z.as_mut_slice()[7 * 15 + 7] = 1.0;
        let k = gaussian_smooth(&z, 2.0).unwrap();
        assert!((k.sum() - 1.0).abs() <= 1e-12);
        assert!((k.get(7, 7) - 0.03987035621668855).abs() <= 1e-14);
        assert!((k.get(7, 8) - 0.03518546586617211).abs() <= 1e-14);
        assert!((k.get(7, 13) - 0.0004429196491896807).abs() <= 1e-14);
    }

    #[test]
    fn smooth_preserves_constants_and_reduces_variance() {
        let c = ScalarField::filled(9, 13, 17.25);
        let s = gaussian_smooth(&c, 2.0).unwrap();
        assert!(s.as_slice().iter().all(|v| (v - 17.25).abs() <= 1e-12));
        let r = random_field(40, 40, 1, 1.0);
        assert!(variance(&gaussian_smooth(&r, 4.0).unwrap()) < variance(&r));
    }

    #[test]
    fn rof_limits() {
        let controls = GammaEstimateParams::default().rof_controls();
        let f = random_field(16, 16, 2, 50.0);
        let u = rof_denoise(&f, 1e-9, &controls).unwrap();
        assert!(u.sub(&f).unwrap().l2_norm() / 16.0 <= 1e-6);
        let c = ScalarField::filled(8, 8, 3.0);
        assert_eq!(rof_denoise(&c, 500.0, &controls).unwrap(), c);
        assert!(rof_denoise(&c, 0.0, &controls).is_err());
    }

    #[test]
    fn rof_lowers_objective() {
        let controls = GammaEstimateParams::default().rof_controls();
        let f = random_field(24, 24, 3, 100.0);
        for lambda in [1.0, 10.0, 500.0] {
            let u = rof_denoise(&f, lambda, &controls).unwrap();
            assert!(rof_objective(&u, &f, lambda).unwrap() < rof_objective(&f, &f, lambda).unwrap());
        }
    }

    #[test]
    fn gamma_over_tv_basics() {
        let params = GammaEstimateParams::default();
        let c = ScalarField::filled(12, 12, 80.0);
        let g = estimate_gamma_over_tv(&c, &params).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));

        let f = random_field(20, 20, 4, 30.0);
        let g = estimate_gamma_over_tv(&f, &params).unwrap();
        assert!(g.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
        let shifted = estimate_gamma_over_tv(&f.map(|v| v + 37.0), &params).unwrap();
        let diff = g.sub(&shifted).unwrap().as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff <= 1e-8, "{diff}");

        assert!(estimate_gamma_over_tv(&f, &GammaEstimateParams { rho: -1.0, ..params }).is_err());
    }

    #[test]
    fn gamma_small_for_clean_piecewise_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField::from_fn(32, 32, |i, j| {
            let base = if (i / 8 + j / 8) % 2 == 0 { 50.0 } else { 200.0 };
            base + rng.random_range(-0.01..0.01)
        });
        // Residual of an over-smoothed cartoon is the blocks themselves, so
        // the bound is on the order of the block contrast over the kernel width.
        let g = estimate_gamma_over_tv(&f, &GammaEstimateParams::default()).unwrap();
        assert!(g.max() <= 150.0 / 2.0, "{}", g.max());
    }

    #[test]
    fn ground_truth_gamma() {
        let c = ScalarField::filled(5, 6, 9.0);
        assert!(gamma_from_ground_truth(&c).as_slice().iter().all(|&v| v == 0.0));

        let ramp = ScalarField::from_fn(6, 7, |i, j| 3.0 * i as f64 + 4.0 * j as f64);
        let g = gamma_from_ground_truth(&ramp);
        for i in 0..5 {
            for j in 0..6 {
                assert!((g.get(i, j) - 5.0).abs() <= 1e-12);
            }
        }
        assert_eq!(g.get(5, 6), 0.0);
        assert!((g.get(5, 2) - 4.0).abs() <= 1e-12);

        let u = random_field(10, 11, 6, 100.0);
        let g = gamma_from_ground_truth(&u);
        assert_eq!(tvpwl_closed_form(&u, &g, GridSpacing::UNIT).unwrap(), 0.0);
    }
}
