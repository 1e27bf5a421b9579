//! Variance components for the orthogonal estimator: the plug-in score
//! variance, the kernel-based derivative matrix via Powell's method, the two
//! sigma formulas, and Wald intervals.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::stats::normal_quantile;

/// Default scale constant in the bandwidth rule h = c sd(resid) n^{-1/3}.
pub const DEFAULT_BANDWIDTH_SCALE: f64 = 1.0;
/// Floor applied to the bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;
/// Threshold below which the derivative estimate counts as degenerate.
const J_DEGENERATE_TOL: f64 = 1e-10;
/// Threshold below which the density estimate counts as degenerate.
const DENSITY_TOL: f64 = 1e-10;

/// Score variance: E_n(vhat^2) / 4.
pub fn omega_hat(vhat: &DVector<f64>) -> f64 {
    assert!(!vhat.is_empty());
    vhat.norm_squared() / (4.0 * vhat.len() as f64)
}

/// Rule-of-thumb bandwidth c * sd(residuals) * n^{-1/3}, floored at 1e-8.
/// The standard deviation uses divisor n, matching the empirical-moment
/// convention elsewhere.
pub fn powell_bandwidth(residuals: &DVector<f64>, c_h: f64) -> f64 {
    let n = residuals.len();
    assert!(n >= 10, "bandwidth rule needs n >= 10");
    let mean = residuals.mean();
    let sd = (residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64).sqrt();
    (c_h * sd * (n as f64).powf(-1.0 / 3.0)).max(BANDWIDTH_FLOOR)
}

/// Residuals this close to zero (relative to the residual scale) are treated
/// as interpolated by the fit: an l1 fit zeroes one residual per free
/// parameter mechanically, and counting those would bias the kernel
/// estimates upward by k/(2hn).
fn interpolation_tol(residuals: &DVector<f64>) -> f64 {
    1e-7 * (1.0 + residuals.amax())
}

/// Uniform-kernel plug-in for J = E(f_eps(0) d v):
/// (2 h m)^{-1} sum 1{tol < |e_i| <= h} d_i vhat_i, where fit-interpolated
/// residuals are excluded from both the window and the effective count m.
pub fn powell_j(residuals: &DVector<f64>, d: &DVector<f64>, vhat: &DVector<f64>, h: f64) -> f64 {
    assert!(h > 0.0);
    let n = residuals.len();
    assert_eq!(d.len(), n);
    assert_eq!(vhat.len(), n);
    let tol = interpolation_tol(residuals);
    let mut acc = 0.0;
    let mut zeros = 0usize;
    for i in 0..n {
        let a = residuals[i].abs();
        if a <= tol {
            zeros += 1;
        } else if a <= h {
            acc += d[i] * vhat[i];
        }
    }
    acc / (2.0 * h * (n - zeros).max(1) as f64)
}

/// Uniform-kernel density estimate at zero:
/// (2 h m)^{-1} sum 1{tol < |e_i| <= h} with fit-interpolated residuals
/// excluded as in [`powell_j`].
pub fn density_at_zero(residuals: &DVector<f64>, h: f64) -> f64 {
    assert!(h > 0.0);
    let n = residuals.len();
    let tol = interpolation_tol(residuals);
    let mut count = 0usize;
    let mut zeros = 0usize;
    for r in residuals.iter() {
        let a = r.abs();
        if a <= tol {
            zeros += 1;
        } else if a <= h {
            count += 1;
        }
    }
    count as f64 / (2.0 * h * (n - zeros).max(1) as f64)
}

/// Robust variance sigma^2 = Omega / J^2.
pub fn sigma_robust(omega: f64, j_hat: f64) -> f64 {
    omega / (j_hat * j_hat)
}

/// Homoscedastic-efficiency variance sigma^2 = 1 / (4 f_eps(0)^2 E_n vhat^2).
pub fn sigma_homoscedastic(f_eps0: f64, vhat: &DVector<f64>) -> f64 {
    let ev2 = vhat.norm_squared() / vhat.len() as f64;
    1.0 / (4.0 * f_eps0 * f_eps0 * ev2)
}

/// Wald interval alpha +- sigma n^{-1/2} Phi^{-1}(1 - xi/2).
pub fn wald_ci(alpha_check: f64, sigma: f64, n: usize, xi: f64) -> (f64, f64) {
    assert!(sigma > 0.0);
    assert!(xi > 0.0 && xi < 1.0);
    let half = sigma / (n as f64).sqrt() * normal_quantile(1.0 - xi / 2.0);
    (alpha_check - half, alpha_check + half)
}

/// Assembled variance components for one inference run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub omega: f64,
    pub j_hat: f64,
    /// Robust variance Omega / J^2 (NaN when j_degenerate).
    pub sigma2: f64,
    pub f_eps0: f64,
    pub bandwidth: f64,
    pub j_degenerate: bool,
    pub zero_density: bool,
}

/// Estimate all components from step-(iii) residuals, the treatment, and the
/// instrument.
pub fn estimate_variance(
    residuals: &DVector<f64>,
    d: &DVector<f64>,
    vhat: &DVector<f64>,
    c_h: f64,
) -> VarianceEstimate {
    let h = powell_bandwidth(residuals, c_h);
    let omega = omega_hat(vhat);
    let j_hat = powell_j(residuals, d, vhat, h);
    let f_eps0 = density_at_zero(residuals, h);
    let j_degenerate = j_hat.abs() < J_DEGENERATE_TOL;
    let zero_density = f_eps0 < DENSITY_TOL;
    let sigma2 = if j_degenerate { f64::NAN } else { sigma_robust(omega, j_hat) };
    VarianceEstimate { omega, j_hat, sigma2, f_eps0, bandwidth: h, j_degenerate, zero_density }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn omega_examples() {
        let v = DVector::from_row_slice(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(omega_hat(&v), 0.25);
        let z = DVector::from_row_slice(&[0.0, 0.0]);
        assert_eq!(omega_hat(&z), 0.0);
        let mut rng = RngStream::new(1, 0).rng();
        let r = DVector::from_fn(37, |_, _| rng.random::<f64>() * 3.0 - 1.5);
        let naive: f64 = (0..37).map(|i| r[i] * r[i]).sum::<f64>() / (4.0 * 37.0);
        assert!((omega_hat(&r) - naive).abs() < 1e-12);
    }

    #[test]
    fn omega_scales_quadratically() {
        let v = DVector::from_row_slice(&(0..12).map(|i| i as f64 * 0.3 - 1.0).collect::<Vec<_>>());
        let v3 = &v * 3.0;
        assert!((omega_hat(&v3) - 9.0 * omega_hat(&v)).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_examples() {
        // sd = 1 at n = 1000 gives exactly 0.1.
        let mut vals = Vec::with_capacity(1000);
        for i in 0..500 {
            let _ = i;
            vals.push(1.0);
            vals.push(-1.0);
        }
        let r = DVector::from_vec(vals);
        assert!((powell_bandwidth(&r, 1.0) - 0.1).abs() < 1e-12);
        assert!((powell_bandwidth(&r, 2.0) - 0.2).abs() < 1e-12);
        let equal = DVector::from_element(20, 5.0);
        assert_eq!(powell_bandwidth(&equal, 1.0), BANDWIDTH_FLOOR);
    }

    #[test]
    fn powell_j_direct_formula() {
        let e = DVector::from_row_slice(&[0.1, -0.2, 3.0]);
        let ones = DVector::from_element(3, 1.0);
        let j = powell_j(&e, &ones, &ones, 0.5);
        assert!((j - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn powell_j_scales_inversely_in_h_with_fixed_indicators() {
        // For h' > h with identical indicator sets, J(h') h' = J(h) h.
        let e = DVector::from_row_slice(&[0.1, -0.2, 0.05, 10.0]);
        let d = DVector::from_row_slice(&[1.0, 2.0, -1.0, 3.0]);
        let v = DVector::from_row_slice(&[0.5, 1.0, 1.5, -2.0]);
        let j1 = powell_j(&e, &d, &v, 0.5);
        let j2 = powell_j(&e, &d, &v, 0.9);
        assert!((j1 * 0.5 - j2 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn density_examples() {
        let e = DVector::from_row_slice(&[0.1, -0.2, 3.0]);
        assert!((density_at_zero(&e, 0.5) - 2.0 / 3.0).abs() < 1e-12);
        let far = DVector::from_row_slice(&[5.0, -7.0, 9.0]);
        assert_eq!(density_at_zero(&far, 0.5), 0.0);
    }

    #[test]
    fn sigma_formulas() {
        assert_eq!(sigma_robust(0.25, 0.5), 1.0);
        // The two formulas coincide when J = f * E_n v^2.
        let v = DVector::from_row_slice(&[1.0, -2.0, 0.5, 1.5]);
        let ev2 = v.norm_squared() / 4.0;
        let f = 0.37;
        let j = f * ev2;
        let robust = sigma_robust(omega_hat(&v), j);
        let homo = sigma_homoscedastic(f, &v);
        assert!((robust - homo).abs() < 1e-12);
    }

    #[test]
    fn wald_interval_reference() {
        let (lo, hi) = wald_ci(0.0, 1.0, 100, 0.05);
        assert!((hi - 0.19599639845400542).abs() < 1e-12);
        assert!((lo + hi).abs() < 1e-15);
        // width shrinks to zero as xi -> 1
        let (l2, h2) = wald_ci(0.3, 1.0, 100, 0.9999);
        assert!(h2 - l2 < 1e-4);
        // linear in sigma
        let (l3, h3) = wald_ci(0.0, 2.0, 100, 0.05);
        assert!(((h3 - l3) - 2.0 * (hi - lo)).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let e = DVector::from_row_slice(&[0.3, -0.1, 0.02, 0.5, -0.04, 1.0, 0.2, -0.3, 0.6, 0.01]);
        let d = DVector::from_row_slice(&[1.0, 2.0, 3.0, -1.0, 0.5, 0.7, -0.2, 1.1, 0.9, -0.6]);
        let v = DVector::from_row_slice(&[0.5, -0.5, 1.0, 0.3, 0.8, -0.9, 0.4, 0.6, -0.7, 0.2]);
        let h = 0.25;
        let perm: Vec<usize> = vec![7, 2, 9, 0, 4, 1, 8, 3, 6, 5];
        let ep = DVector::from_fn(10, |i, _| e[perm[i]]);
        let dp = DVector::from_fn(10, |i, _| d[perm[i]]);
        let vp = DVector::from_fn(10, |i, _| v[perm[i]]);
        assert!((powell_j(&e, &d, &v, h) - powell_j(&ep, &dp, &vp, h)).abs() < 1e-15);
        assert!((density_at_zero(&e, h) - density_at_zero(&ep, h)).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_invariance_of_robust_sigma() {
        let e = DVector::from_row_slice(&[0.3, -0.1, 0.02, 0.5, -0.04, 1.0, 0.2, -0.3, 0.6, 0.01]);
        let d = DVector::from_row_slice(&[1.0, 2.0, 3.0, -1.0, 0.5, 0.7, -0.2, 1.1, 0.9, -0.6]);
        let v = DVector::from_row_slice(&[0.5, -0.5, 1.0, 0.3, 0.8, -0.9, 0.4, 0.6, -0.7, 0.2]);
        let h = 0.25;
        let s1 = sigma_robust(omega_hat(&v), powell_j(&e, &d, &v, h));
        let vneg = -&v;
        let s2 = sigma_robust(omega_hat(&vneg), powell_j(&e, &d, &vneg, h));
        assert!((s1 - s2).abs() < 1e-12);
    }

    // Monte Carlo against known population values for standard normal errors.
    #[test]
    fn powell_j_near_population_value() {
        let n = 2000;
        let mut estimates = Vec::new();
        for rep in 0..100 {
            let mut rng = RngStream::new(900, rep).rng();
            let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let d = v.clone(); // homoscedastic design with d = v
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let h = powell_bandwidth(&e, 1.0);
            estimates.push(powell_j(&e, &d, &v, h));
        }
        estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = estimates[50];
        let truth = 0.3989422804014327; // f_eps(0) * E(d v) with E(dv) = 1
        assert!(
            (median - truth).abs() < 0.15 * truth,
            "median J {median} vs population {truth}"
        );
    }

    #[test]
    fn density_near_normal_density() {
        let n = 5000;
        let mut estimates = Vec::new();
        for rep in 0..100 {
            let mut rng = RngStream::new(901, rep).rng();
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let h = powell_bandwidth(&e, 1.0);
            estimates.push(density_at_zero(&e, h));
        }
        estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = estimates[50];
        assert!((median - 0.3989422804014327).abs() < 0.04, "median density {median}");
    }

    #[test]
    fn two_sigma_estimates_agree_on_homoscedastic_design() {
        let n = 2000;
        let mut ratios = Vec::new();
        for rep in 0..100 {
            let mut rng = RngStream::new(902, rep).rng();
            let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let d = &v * 1.0 + noise * 0.5;
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let est = estimate_variance(&e, &d, &v, 1.0);
            let homo = sigma_homoscedastic(est.f_eps0, &v);
            ratios.push(est.sigma2 / homo);
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = ratios[50];
        assert!((median - 1.0).abs() < 0.2, "median sigma ratio {median}");
    }
}
