//! Heteroscedastic lasso for the auxiliary treatment equation: data-driven
//! penalty loadings with iterated refinement, coordinate-descent solver, and
//! the post-lasso least-squares refit.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// Coordinate-descent convergence threshold on the max coefficient change.
const CD_TOL: f64 = 1e-10;
/// Cap on coordinate-descent sweeps.
const CD_MAX_SWEEPS: usize = 100_000;
/// Loadings-iteration convergence threshold.
const LOADINGS_TOL: f64 = 1e-6;

/// Default number of loading rounds: the initial option followed by one
/// refinement.
pub const DEFAULT_LOADING_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LassoStatus {
    Converged,
    IterationLimit,
}

/// A fitted weighted lasso for the treatment equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    /// Indices j with theta_j != 0 (soft-thresholding produces exact zeros).
    pub support: Vec<usize>,
    pub lambda: f64,
    /// Penalty loadings used in the final solve.
    pub loadings: Vec<f64>,
    /// Loading rounds actually performed.
    pub iterations_of_loadings: usize,
    pub status: LassoStatus,
}

impl LassoFit {
    pub fn theta_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.theta)
    }

    /// Residuals d - x theta.
    pub fn residuals(&self, sample: &Sample) -> DVector<f64> {
        sample.d() - sample.x() * self.theta_vector()
    }
}

/// Penalty level 2 c sqrt(n) Phi^{-1}(1 - gamma/(2p)).
pub fn lasso_penalty_level(n: usize, p: usize, gamma: f64, c: f64) -> f64 {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    assert!(c > 1.0, "c must exceed 1");
    2.0 * c * (n as f64).sqrt() * normal_quantile(1.0 - gamma / (2.0 * p as f64))
}

/// Initial loadings sqrt(E_n[x_j^2 (d - dbar)^2]).
pub fn initial_loadings(sample: &Sample) -> Result<Vec<f64>> {
    let dbar = sample.d().mean();
    let centered = sample.d().map(|v| v - dbar);
    loadings_from(sample, &centered)
}

/// Refined loadings sqrt(E_n[x_j^2 vhat^2]) for given residuals.
pub fn refined_loadings(sample: &Sample, vhat: &DVector<f64>) -> Result<Vec<f64>> {
    if vhat.len() != sample.n() {
        return Err(Error::InvalidInput("vhat length must equal n".into()));
    }
    loadings_from(sample, vhat)
}

fn loadings_from(sample: &Sample, v: &DVector<f64>) -> Result<Vec<f64>> {
    let n = sample.n() as f64;
    let x = sample.x();
    let mut out = Vec::with_capacity(sample.p());
    for j in 0..sample.p() {
        let col = x.column(j);
        let mut acc = 0.0;
        for i in 0..sample.n() {
            let t = col[i] * v[i];
            acc += t * t;
        }
        let g = (acc / n).sqrt();
        if g == 0.0 {
            return Err(Error::DegenerateColumn(format!("x{}", j + 1)));
        }
        out.push(g);
    }
    Ok(out)
}

/// Weighted lasso of d on x by cyclic coordinate descent with exact
/// soft-threshold updates: minimizes E_n(d - x'theta)^2 + (lambda/n)||G theta||_1.
/// A loading of exactly 0 marks a penalty-exempt (free) coordinate.
pub fn solve_lasso(sample: &Sample, lambda: f64, loadings: &[f64]) -> Result<LassoFit> {
    if loadings.len() != sample.p() {
        return Err(Error::InvalidInput("loadings length must equal p".into()));
    }
    if loadings.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidInput("loadings must be nonnegative".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let p = sample.p();
    let x = sample.x();

    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    let mut theta = vec![0.0f64; p];
    let mut resid: DVector<f64> = sample.d().clone();
    let mut status = LassoStatus::IterationLimit;
    let mut sweeps = 0;

    #[cfg(debug_assertions)]
    let objective = |theta: &[f64], resid: &DVector<f64>| -> f64 {
        resid.norm_squared()
            + lambda * loadings.iter().zip(theta).map(|(g, t)| g * t.abs()).sum::<f64>()
    };

    while sweeps < CD_MAX_SWEEPS {
        sweeps += 1;
        #[cfg(debug_assertions)]
        let obj_before = objective(&theta, &resid);
        let mut max_change = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.dot(&resid) + col_sq[j] * theta[j];
            let kappa = 0.5 * lambda * loadings[j];
            let new = soft_threshold(rho, kappa) / col_sq[j];
            let delta = new - theta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col.into_owned(), 1.0);
                theta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        #[cfg(debug_assertions)]
        {
            let obj_after = objective(&theta, &resid);
            debug_assert!(
                obj_after <= obj_before + 1e-9 * (1.0 + obj_before.abs()),
                "coordinate sweep increased objective: {obj_before} -> {obj_after}"
            );
        }
        if max_change < CD_TOL {
            status = LassoStatus::Converged;
            break;
        }
    }

    let support: Vec<usize> =
        theta.iter().enumerate().filter(|(_, t)| **t != 0.0).map(|(j, _)| j).collect();
    Ok(LassoFit {
        theta,
        support,
        lambda,
        loadings: loadings.to_vec(),
        iterations_of_loadings: 1,
        status,
    })
}

#[inline]
fn soft_threshold(a: f64, kappa: f64) -> f64 {
    if a > kappa {
        a - kappa
    } else if a < -kappa {
        a + kappa
    } else {
        0.0
    }
}

/// Post-lasso least squares of d on the selected columns; zeros elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostLassoFit {
    pub theta: Vec<f64>,
    /// The restricted design was rank-deficient and a pseudo-inverse was used.
    pub rank_deficient: bool,
}

impl PostLassoFit {
    pub fn theta_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.theta)
    }

    pub fn residuals(&self, sample: &Sample) -> DVector<f64> {
        sample.d() - sample.x() * self.theta_vector()
    }
}

pub fn post_lasso(sample: &Sample, support: &[usize]) -> Result<PostLassoFit> {
    let p = sample.p();
    let mut supp: Vec<usize> = support.to_vec();
    supp.sort_unstable();
    supp.dedup();
    if supp.iter().any(|&j| j >= p) {
        return Err(Error::InvalidInput("support index out of range".into()));
    }
    if supp.len() >= sample.n() {
        return Err(Error::InvalidInput(format!(
            "post-lasso underdetermined: support {} >= n {}",
            supp.len(),
            sample.n()
        )));
    }
    let mut theta = vec![0.0f64; p];
    if supp.is_empty() {
        return Ok(PostLassoFit { theta, rank_deficient: false });
    }
    let cols: Vec<DVector<f64>> =
        supp.iter().map(|&j| sample.x().column(j).into_owned()).collect();
    let xs = DMatrix::from_columns(&cols);
    let gram = xs.tr_mul(&xs);
    let xtd = xs.tr_mul(sample.d());
    match Cholesky::new(gram.clone()) {
        Some(chol) => {
            let sol = chol.solve(&xtd);
            for (slot, &j) in supp.iter().enumerate() {
                theta[j] = sol[slot];
            }
            Ok(PostLassoFit { theta, rank_deficient: false })
        }
        None => {
            let svd = gram.svd(true, true);
            let sol = svd
                .solve(&xtd, 1e-12)
                .map_err(|e| Error::InvalidInput(format!("pseudo-inverse failed: {e}")))?;
            for (slot, &j) in supp.iter().enumerate() {
                theta[j] = sol[slot];
            }
            Ok(PostLassoFit { theta, rank_deficient: true })
        }
    }
}

/// Lasso with data-driven loadings: round 1 uses the initial option, each
/// later round recomputes refined loadings from the current residuals and
/// re-solves; stops when the loadings move less than 1e-6 or after
/// `max_rounds`. Columns listed in `exempt` are left unpenalized.
pub fn iterated_lasso_exempt(
    sample: &Sample,
    gamma: f64,
    c: f64,
    max_rounds: usize,
    exempt: &[usize],
) -> Result<LassoFit> {
    if max_rounds < 1 {
        return Err(Error::InvalidInput("max_rounds must be >= 1".into()));
    }
    let apply_exemption = |loadings: &mut Vec<f64>| {
        for &j in exempt {
            loadings[j] = 0.0;
        }
    };
    let lambda = lasso_penalty_level(sample.n(), sample.p(), gamma, c);
    let mut loadings = initial_loadings(sample)?;
    apply_exemption(&mut loadings);
    let mut fit = solve_lasso(sample, lambda, &loadings)?;
    let mut rounds = 1;
    while rounds < max_rounds {
        let vhat = fit.residuals(sample);
        let mut refined = refined_loadings(sample, &vhat)?;
        apply_exemption(&mut refined);
        let max_change = refined
            .iter()
            .zip(loadings.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        loadings = refined;
        fit = solve_lasso(sample, lambda, &loadings)?;
        rounds += 1;
        if max_change < LOADINGS_TOL {
            break;
        }
    }
    fit.iterations_of_loadings = rounds;
    Ok(fit)
}

/// Lasso with data-driven loadings and no exemptions.
pub fn iterated_lasso(sample: &Sample, gamma: f64, c: f64, max_rounds: usize) -> Result<LassoFit> {
    iterated_lasso_exempt(sample, gamma, c, max_rounds, &[])
}

/// Largest KKT violation of a lasso fit: for active coordinates the stationarity
/// gap |E_n[x_j r] - sign(theta_j) lambda g_j / (2n)|, for inactive ones the
/// excess of |E_n[x_j r]| over lambda g_j / (2n).
pub fn kkt_violation(sample: &Sample, fit: &LassoFit) -> f64 {
    let n = sample.n() as f64;
    let resid = fit.residuals(sample);
    let mut worst = 0.0f64;
    for j in 0..sample.p() {
        let score = sample.x().column(j).dot(&resid) / n;
        let bound = fit.lambda * fit.loadings[j] / (2.0 * n);
        let v = if fit.theta[j] != 0.0 {
            (score - fit.theta[j].signum() * bound).abs()
        } else {
            (score.abs() - bound).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
