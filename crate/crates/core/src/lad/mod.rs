//! l1-penalized median regression, the unpenalized refit on a selected
//! support, the simulated pivotal penalty rule, and a sparsity-truncation
//! guard.

mod ipm;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PenaltyWeights, Sample};
use crate::error::{Error, Result};
use crate::stats::quantile_type7;
use ipm::{solve_l1_lp, IpmConfig};

/// Suggested tail probability for the pivotal penalty rule.
pub fn default_gamma(n: usize) -> f64 {
    0.1 / (n as f64).ln()
}

/// Suggested slack constant for the pivotal penalty rule.
pub const DEFAULT_C0: f64 = 1.1;

/// A coefficient below `RELATIVE_ZERO * max(1, ||beta||_inf)` is treated as
/// zero when extracting the support from an interior-point solution.
pub const RELATIVE_ZERO: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    IterationLimit,
}

/// A fitted (possibly penalized) median regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadFit {
    /// Coefficient on the treatment.
    pub alpha: f64,
    /// Coefficients on the controls; exact zeros off the support.
    pub beta: Vec<f64>,
    /// Indices j with beta_j != 0.
    pub support: Vec<usize>,
    /// E_n |resid| + (lambda/n) ||Psi (alpha, beta')'||_1, recomputed from the
    /// stored coefficients.
    pub objective: f64,
    pub lambda: f64,
    pub solver_status: SolverStatus,
    /// Control columns dropped from a refit because they were collinear with
    /// earlier ones.
    pub dropped: Vec<usize>,
}

impl LadFit {
    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.beta)
    }

    /// Fitted control part x_i' beta.
    pub fn control_fit(&self, sample: &Sample) -> DVector<f64> {
        sample.x() * self.beta_vector()
    }

    /// Residuals y - d alpha - x beta.
    pub fn residuals(&self, sample: &Sample) -> DVector<f64> {
        sample.y() - sample.d() * self.alpha - self.control_fit(sample)
    }
}

/// The penalized objective at given coefficients.
pub fn lad_objective(
    sample: &Sample,
    weights: &PenaltyWeights,
    lambda: f64,
    alpha: f64,
    beta: &[f64],
) -> f64 {
    let n = sample.n() as f64;
    let mut loss = 0.0;
    let x = sample.x();
    for i in 0..sample.n() {
        let mut fit = sample.d()[i] * alpha;
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                fit += x[(i, j)] * b;
            }
        }
        loss += (sample.y()[i] - fit).abs();
    }
    let mut pen = weights.psi[0] * alpha.abs();
    for (j, b) in beta.iter().enumerate() {
        pen += weights.psi[j + 1] * b.abs();
    }
    loss / n + lambda / n * pen
}

fn finish_fit(
    sample: &Sample,
    weights: &PenaltyWeights,
    lambda: f64,
    alpha: f64,
    beta: Vec<f64>,
    status: SolverStatus,
    dropped: Vec<usize>,
) -> LadFit {
    let support: Vec<usize> =
        beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect();
    let objective = lad_objective(sample, weights, lambda, alpha, &beta);
    LadFit { alpha, beta, support, objective, lambda, solver_status: status, dropped }
}

/// Solve the l1-penalized median regression of y on (d, x) with penalty level
/// `lambda` and loadings `weights` (an entry of 0 exempts that column from the
/// penalty).
pub fn solve_l1_median(
    sample: &Sample,
    lambda: f64,
    weights: &PenaltyWeights,
) -> Result<LadFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if weights.psi.len() != sample.p() + 1 {
        return Err(Error::InvalidInput(format!(
            "weights dimension {} != p+1 = {}",
            weights.psi.len(),
            sample.p() + 1
        )));
    }
    let n = sample.n();
    let p = sample.p();

    // Columns that are identically zero cannot affect the fit; pin their
    // coefficients to zero and keep the LP strictly feasible.
    let mut cols: Vec<usize> = Vec::with_capacity(p + 1);
    let dmax = sample.d().amax();
    if dmax > 0.0 {
        cols.push(0);
    }
    for j in 0..p {
        if sample.x().column(j).amax() > 0.0 {
            cols.push(j + 1);
        }
    }
    let k = cols.len();
    let mut design = DMatrix::zeros(n, k);
    let mut pen = DVector::zeros(k);
    for (slot, &cj) in cols.iter().enumerate() {
        if cj == 0 {
            design.set_column(slot, sample.d());
        } else {
            design.set_column(slot, &sample.x().column(cj - 1).into_owned());
        }
        pen[slot] = lambda * weights.psi[cj];
    }

    let sol = solve_l1_lp(&design, sample.y(), &pen, &IpmConfig::default())?;
    let mut alpha = 0.0;
    let mut beta = vec![0.0f64; p];
    for (slot, &cj) in cols.iter().enumerate() {
        if cj == 0 {
            alpha = sol.coef[slot];
        } else {
            beta[cj - 1] = sol.coef[slot];
        }
    }
    // Interior-point coefficients are never exactly zero; apply the relative
    // zero threshold to the control coefficients before reading off support.
    let bmax = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let thr = RELATIVE_ZERO * bmax.max(1.0);
    for b in beta.iter_mut() {
        if b.abs() <= thr {
            *b = 0.0;
        }
    }
    let status = if sol.converged { SolverStatus::Optimal } else { SolverStatus::IterationLimit };
    Ok(finish_fit(sample, weights, lambda, alpha, beta, status, Vec::new()))
}

/// Drop columns of `design` that are numerically in the span of earlier ones
/// (modified Gram-Schmidt); returns kept indices and dropped indices.
fn drop_collinear(design: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let n = design.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..design.ncols() {
        let mut v = design.column(j).into_owned();
        let orig = v.norm_squared();
        if orig == 0.0 {
            dropped.push(j);
            continue;
        }
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        if v.norm_squared() <= 1e-10 * orig {
            dropped.push(j);
        } else {
            v /= v.norm();
            basis.push(v);
            kept.push(j);
        }
        if basis.len() == n {
            // Remaining columns are necessarily dependent.
            dropped.extend(j + 1..design.ncols());
            break;
        }
    }
    (kept, dropped)
}

/// Unpenalized median regression restricted to the given control support
/// (plus the treatment when `include_d`). Collinear columns are dropped,
/// later-indexed first, and reported in `dropped`.
pub fn lad_refit(sample: &Sample, support: &[usize], include_d: bool) -> Result<LadFit> {
    let p = sample.p();
    let mut supp: Vec<usize> = support.to_vec();
    supp.sort_unstable();
    supp.dedup();
    if supp.iter().any(|&j| j >= p) {
        return Err(Error::InvalidInput("support index out of range".into()));
    }
    let n = sample.n();
    if supp.len() + 1 >= n {
        return Err(Error::InvalidInput(format!(
            "refit underdetermined: support {} + 1 >= n {}",
            supp.len(),
            n
        )));
    }

    // Column order: treatment first, then the selected controls.
    let mut col_ids: Vec<Option<usize>> = Vec::new(); // None = d
    if include_d {
        col_ids.push(None);
    }
    col_ids.extend(supp.iter().map(|&j| Some(j)));
    if col_ids.is_empty() {
        let weights = unit_weights(p);
        return Ok(finish_fit(sample, &weights, 0.0, 0.0, vec![0.0; p], SolverStatus::Optimal, vec![]));
    }
    let mut design = DMatrix::zeros(n, col_ids.len());
    for (slot, id) in col_ids.iter().enumerate() {
        match id {
            None => design.set_column(slot, sample.d()),
            Some(j) => design.set_column(slot, &sample.x().column(*j).into_owned()),
        }
    }
    let (kept, dropped_slots) = drop_collinear(&design);
    let dropped: Vec<usize> =
        dropped_slots.iter().filter_map(|&slot| col_ids[slot]).collect();
    let design_kept = DMatrix::from_columns(
        &kept.iter().map(|&slot| design.column(slot).into_owned()).collect::<Vec<_>>(),
    );
    let pen = DVector::zeros(kept.len());
    let sol = solve_l1_lp(&design_kept, sample.y(), &pen, &IpmConfig::default())?;

    let mut alpha = 0.0;
    let mut beta = vec![0.0f64; p];
    for (pos, &slot) in kept.iter().enumerate() {
        match col_ids[slot] {
            None => alpha = sol.coef[pos],
            Some(j) => beta[j] = sol.coef[pos],
        }
    }
    let status = if sol.converged { SolverStatus::Optimal } else { SolverStatus::IterationLimit };
    let weights = unit_weights(p);
    Ok(finish_fit(sample, &weights, 0.0, alpha, beta, status, dropped))
}

fn unit_weights(p: usize) -> PenaltyWeights {
    PenaltyWeights { psi: vec![1.0; p + 1] }
}

/// Simulated pivotal penalty level for the l1-penalized median regression:
/// `c0 * n * Q_{1-gamma}` of `2 ||Psi^{-1} E_n[(1/2 - 1{U_i <= 1/2}) xt_i]||_inf`
/// over `n_sim` draws of iid uniforms, with xt = (d, x). Columns with zero
/// loading (penalty-exempt) are excluded from the sup-norm.
pub fn pivotal_penalty_median(
    sample: &Sample,
    weights: &PenaltyWeights,
    gamma: f64,
    c0: f64,
    n_sim: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if n_sim < 100 {
        return Err(Error::InvalidInput(format!("n_sim must be >= 100, got {n_sim}")));
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if !(c0 > 1.0) {
        return Err(Error::InvalidInput(format!("c0 must exceed 1, got {c0}")));
    }
    let n = sample.n();
    let nf = n as f64;

    // Pre-scale columns by 1/(n psi_j); with g_i = +-1/2 the simulated norm is
    // max_j |sum_i sigma_i xt_ij| / (n psi_j), sigma_i = 2 g_i.
    let mut scaled: Vec<DVector<f64>> = Vec::new();
    if weights.psi[0] > 0.0 {
        scaled.push(sample.d() / (nf * weights.psi[0]));
    }
    for j in 0..sample.p() {
        let psi = weights.psi[j + 1];
        if psi > 0.0 {
            scaled.push(sample.x().column(j) / (nf * psi));
        }
    }
    if scaled.is_empty() {
        return Err(Error::InvalidInput("all columns penalty-exempt".into()));
    }

    let mut sims = Vec::with_capacity(n_sim);
    let mut signs = vec![0.0f64; n];
    for _ in 0..n_sim {
        for s in signs.iter_mut() {
            let u: f64 = rng.random();
            *s = if u <= 0.5 { -1.0 } else { 1.0 };
        }
        let mut best = 0.0f64;
        for col in &scaled {
            let mut acc = 0.0;
            for i in 0..n {
                acc += signs[i] * col[i];
            }
            best = best.max(acc.abs());
        }
        sims.push(best);
    }
    sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(c0 * nf * quantile_type7(&sims, 1.0 - gamma))
}

/// Keep the `m` largest-magnitude control coefficients (ties broken by lower
/// index), zero the rest, and recompute support and objective.
pub fn truncate_coefficients(
    sample: &Sample,
    weights: &PenaltyWeights,
    fit: &LadFit,
    m: usize,
) -> LadFit {
    assert!(m >= 1, "truncation size must be >= 1");
    if fit.support.len() <= m {
        return fit.clone();
    }
    let mut order: Vec<usize> = (0..fit.beta.len()).collect();
    order.sort_by(|&a, &b| {
        fit.beta[b]
            .abs()
            .partial_cmp(&fit.beta[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut beta = vec![0.0f64; fit.beta.len()];
    for &j in order.iter().take(m) {
        beta[j] = fit.beta[j];
    }
    finish_fit(sample, weights, fit.lambda, fit.alpha, beta, fit.solver_status, fit.dropped.clone())
}

/// Optimality certificate: the largest violation of nonnegativity among the
/// one-sided directional derivatives of the penalized objective at the fit,
/// over all +-coordinate directions. Nonpositive (up to tolerance) certifies
/// that 0 is in the subdifferential.
pub fn subgradient_violation(
    sample: &Sample,
    weights: &PenaltyWeights,
    lambda: f64,
    fit: &LadFit,
) -> f64 {
    let n = sample.n();
    let nf = n as f64;
    let res = fit.residuals(sample);
    let kink = 1e-7 * (1.0 + sample.y().amax());
    let dir_deriv = |col: &dyn Fn(usize) -> f64, coef: f64, psi: f64, sign: f64| -> f64 {
        // derivative of the data term along +sign * e_j
        let mut dd = 0.0;
        for i in 0..n {
            let w = sign * col(i);
            if res[i].abs() <= kink {
                dd += w.abs();
            } else if res[i] > 0.0 {
                dd -= w;
            } else {
                dd += w;
            }
        }
        dd /= nf;
        // penalty term: slope +psi at a kink or when moving away from zero,
        // -psi when moving toward it
        let pen = if coef == 0.0 || (sign > 0.0) == (coef > 0.0) { psi } else { -psi };
        dd + lambda / nf * pen
    };
    let mut worst = 0.0f64;
    {
        let d = sample.d();
        for sign in [1.0, -1.0] {
            let v = dir_deriv(&|i| d[i], fit.alpha, weights.psi[0], sign);
            worst = worst.max(-v);
        }
    }
    for j in 0..sample.p() {
        let col = sample.x().column(j);
        for sign in [1.0, -1.0] {
            let v = dir_deriv(&|i| col[i], fit.beta[j], weights.psi[j + 1], sign);
            worst = worst.max(-v);
        }
    }
    worst
}
