//! Orthogonal instrumental median regression: instruments, the projected
//! score statistic and its exact minimization over breakpoint plateaus, the
//! score-inverted confidence region, the one-step estimator, double
//! selection, and the full three-step pipelines.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{column_loadings, sign_score, PenaltyWeights, RngStream, Sample};
use crate::error::{Error, Result, StageExt};
use crate::lad::{
    self, default_gamma, lad_refit, pivotal_penalty_median, solve_l1_median,
    truncate_coefficients, LadFit, SolverStatus,
};
use crate::lasso::{self, iterated_lasso_exempt, post_lasso, LassoFit, PostLassoFit};
use crate::stats::chi2_1_quantile;
use crate::variance::{
    density_at_zero, estimate_variance, powell_bandwidth, sigma_homoscedastic, wald_ci,
    VarianceEstimate, DEFAULT_BANDWIDTH_SCALE,
};

/// Minimum mean squared instrument below which inference is impossible.
const INSTRUMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Post-selection refits in both nuisance steps.
    Alg1,
    /// Penalized fits in both nuisance steps.
    Alg2,
    /// Double selection: one refit on the union of selected controls.
    Alg3,
    /// One-step correction of the penalized estimator.
    OneStep,
}

/// Pipeline configuration; the defaults mirror the recommended choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthoConfig {
    pub algorithm: Algorithm,
    /// Tail probability for both penalty rules; `None` resolves to 0.1/log n.
    pub gamma: Option<f64>,
    /// Slack constant of the pivotal median-regression penalty.
    pub c0: f64,
    /// Slack constant of the lasso penalty.
    pub c: f64,
    /// Confidence level parameter: intervals cover with probability 1 - xi.
    pub xi: f64,
    pub pivotal_sims: usize,
    /// Loading-refinement rounds for the lasso (initial + refinements).
    pub lasso_rounds: usize,
    /// Half-width multiplier of the search interval (the "10" in 10/b).
    pub interval_scale: f64,
    /// Scale constant of the kernel bandwidth rule.
    pub bandwidth_scale: f64,
    /// Exempt an all-ones control column from the penalty.
    pub exempt_intercept: bool,
}

impl Default for OrthoConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Alg1,
            gamma: None,
            c0: lad::DEFAULT_C0,
            c: 1.1,
            xi: 0.05,
            pivotal_sims: 1000,
            lasso_rounds: lasso::DEFAULT_LOADING_ROUNDS,
            interval_scale: 10.0,
            bandwidth_scale: DEFAULT_BANDWIDTH_SCALE,
            exempt_intercept: false,
        }
    }
}

/// Search interval for the one-dimensional score minimization:
/// [center - s/b, center + s/b] with b = sqrt(E_n d^2) log n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
    pub b: f64,
}

impl SearchInterval {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, a: f64) -> bool {
        self.lo <= a && a <= self.hi
    }
}

/// Instrument residuals vhat = d - x theta.
pub fn build_instruments(sample: &Sample, theta: &DVector<f64>) -> Result<DVector<f64>> {
    if theta.len() != sample.p() {
        return Err(Error::InvalidInput("theta length must equal p".into()));
    }
    let vhat = sample.d() - sample.x() * theta;
    let msq = vhat.norm_squared() / sample.n() as f64;
    if msq < INSTRUMENT_TOL {
        return Err(Error::InstrumentDegenerate(msq));
    }
    Ok(vhat)
}

/// The suggested stochastic parameter space centered at a preliminary
/// estimate, with half-width `scale / b`, b = sqrt(E_n d^2) log n.
pub fn param_interval(alpha_hat: f64, sample: &Sample, scale: f64) -> SearchInterval {
    assert!(sample.n() >= 3, "interval rule needs n >= 3 so log n > 1");
    let n = sample.n() as f64;
    let b = (sample.d().norm_squared() / n).sqrt() * n.ln();
    SearchInterval { lo: alpha_hat - scale / b, hi: alpha_hat + scale / b, b }
}

/// The projected score statistic
/// L_n(alpha) = 4 |E_n[ phi(y - gfit - d alpha) vhat ]|^2 / E_n vhat^2.
pub fn score_statistic(
    alpha: f64,
    y: &DVector<f64>,
    d: &DVector<f64>,
    gfit: &DVector<f64>,
    vhat: &DVector<f64>,
) -> Result<f64> {
    let n = y.len();
    let denom = vhat.norm_squared() / n as f64;
    if denom < INSTRUMENT_TOL {
        return Err(Error::InstrumentDegenerate(denom));
    }
    let mut num = 0.0;
    for i in 0..n {
        num += sign_score(y[i] - gfit[i] - d[i] * alpha) * vhat[i];
    }
    num /= n as f64;
    Ok(4.0 * num * num / denom)
}

/// Exhaustive evaluation of the piecewise-constant score over an interval:
/// all residual-sign breakpoints inside it, the midpoints between consecutive
/// ones, and the endpoints.
#[derive(Debug, Clone)]
pub struct ScoreScan {
    /// Sorted plateau boundaries: lo, interior breakpoints, hi.
    points: Vec<f64>,
    /// Score exactly at each boundary point.
    point_values: Vec<f64>,
    /// Midpoint of each open plateau (points[i], points[i+1]).
    mids: Vec<f64>,
    /// Score on each open plateau, evaluated at its midpoint.
    plateau_values: Vec<f64>,
    interval: SearchInterval,
    n: usize,
}

impl ScoreScan {
    pub fn new(
        y: &DVector<f64>,
        d: &DVector<f64>,
        gfit: &DVector<f64>,
        vhat: &DVector<f64>,
        interval: &SearchInterval,
    ) -> Result<Self> {
        if !(interval.lo < interval.hi) {
            return Err(Error::InvalidInput("empty search interval".into()));
        }
        let n = y.len();
        let mut breaks: Vec<f64> = (0..n)
            .filter(|&i| d[i] != 0.0)
            .map(|i| (y[i] - gfit[i]) / d[i])
            .filter(|a| interval.lo < *a && *a < interval.hi)
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();

        let mut points = Vec::with_capacity(breaks.len() + 2);
        points.push(interval.lo);
        points.extend_from_slice(&breaks);
        points.push(interval.hi);

        let mut point_values = Vec::with_capacity(points.len());
        for &p in &points {
            point_values.push(score_statistic(p, y, d, gfit, vhat)?);
        }
        let mut mids = Vec::with_capacity(points.len() - 1);
        let mut plateau_values = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            mids.push(mid);
            plateau_values.push(score_statistic(mid, y, d, gfit, vhat)?);
        }
        Ok(Self { points, point_values, mids, plateau_values, interval: *interval, n })
    }

    /// Sampled trace of (alpha, n L_n(alpha)) over all evaluation points,
    /// ordered by alpha.
    pub fn trace(&self) -> Vec<(f64, f64)> {
        let nf = self.n as f64;
        let mut out = Vec::with_capacity(self.points.len() + self.mids.len());
        for i in 0..self.mids.len() {
            out.push((self.points[i], nf * self.point_values[i]));
            out.push((self.mids[i], nf * self.plateau_values[i]));
        }
        out.push((*self.points.last().unwrap(), nf * *self.point_values.last().unwrap()));
        out
    }

    /// The exact global minimizer. Among minimizing plateaus the plateau
    /// midpoint (or interval endpoint) closest to the interval center wins;
    /// an exact breakpoint is returned only when it is strictly below every
    /// plateau.
    pub fn minimize(&self) -> (f64, f64) {
        let center = self.interval.center();
        // (ln, breakpoint?, distance to center, alpha)
        let mut best = (f64::INFINITY, 1u8, f64::INFINITY, 0.0f64);
        let mut consider = |alpha: f64, ln: f64, is_break: bool| {
            let key = (ln, is_break as u8, (alpha - center).abs(), alpha);
            if key < best {
                best = key;
            }
        };
        for (i, &m) in self.mids.iter().enumerate() {
            consider(m, self.plateau_values[i], false);
        }
        consider(self.interval.lo, self.point_values[0], false);
        consider(self.interval.hi, *self.point_values.last().unwrap(), false);
        for i in 1..self.points.len() - 1 {
            consider(self.points[i], self.point_values[i], true);
        }
        (best.3, best.0)
    }

    /// Invert the score statistic at level 1-xi: the union of plateaus (and
    /// isolated breakpoints) where n L_n stays at or below the chi-squared
    /// quantile.
    pub fn region(&self, xi: f64) -> ScoreRegion {
        assert!(xi > 0.0 && xi < 1.0);
        let threshold = chi2_1_quantile(1.0 - xi);
        let nf = self.n as f64;
        let ok = |ln: f64| nf * ln <= threshold;

        // Alternating sweep over segments: point {p0}, plateau (p0,p1),
        // point {p1}, ... merging contiguous qualifying segments.
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        let feed = |qual: bool, a: f64, b: f64, open: &mut Option<(f64, f64)>,
                    intervals: &mut Vec<(f64, f64)>| {
            if qual {
                *open = match open.take() {
                    Some((oa, _)) => Some((oa, b)),
                    None => Some((a, b)),
                };
            } else if let Some(o) = open.take() {
                intervals.push(o);
            }
        };
        for i in 0..self.mids.len() {
            let p = self.points[i];
            feed(ok(self.point_values[i]), p, p, &mut open, &mut intervals);
            feed(
                ok(self.plateau_values[i]),
                self.points[i],
                self.points[i + 1],
                &mut open,
                &mut intervals,
            );
        }
        let last = *self.points.last().unwrap();
        feed(ok(*self.point_values.last().unwrap()), last, last, &mut open, &mut intervals);
        if let Some(o) = open {
            intervals.push(o);
        }

        let (alpha_min, ln_min) = self.minimize();
        let empty = intervals.is_empty();
        ScoreRegion {
            hull: if empty { None } else { Some((intervals[0].0, intervals.last().unwrap().1)) },
            disconnected: intervals.len() > 1,
            empty,
            alpha_min,
            n_ln_min: nf * ln_min,
            threshold,
            intervals,
        }
    }
}

/// The score-inverted region {alpha : n L_n(alpha) <= chi2_1 quantile}.
///
/// `intervals` is the exact union of qualifying plateaus (possibly
/// disconnected, possibly containing degenerate single points); `hull` is its
/// convex hull. An empty region is signaled, not an error, and reports the
/// minimizing alpha.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRegion {
    pub intervals: Vec<(f64, f64)>,
    pub hull: Option<(f64, f64)>,
    pub disconnected: bool,
    pub empty: bool,
    pub alpha_min: f64,
    pub n_ln_min: f64,
    pub threshold: f64,
}

impl ScoreRegion {
    pub fn contains(&self, a: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= a && a <= hi)
    }
}

/// Exact breakpoint minimization of the score statistic over the interval.
pub fn minimize_score(
    y: &DVector<f64>,
    d: &DVector<f64>,
    gfit: &DVector<f64>,
    vhat: &DVector<f64>,
    interval: &SearchInterval,
) -> Result<(f64, f64)> {
    Ok(ScoreScan::new(y, d, gfit, vhat, interval)?.minimize())
}

/// Score-inversion confidence region at level 1-xi.
pub fn score_region(
    y: &DVector<f64>,
    d: &DVector<f64>,
    gfit: &DVector<f64>,
    vhat: &DVector<f64>,
    interval: &SearchInterval,
    xi: f64,
) -> Result<ScoreRegion> {
    Ok(ScoreScan::new(y, d, gfit, vhat, interval)?.region(xi))
}

/// One-step estimator:
/// alpha + [E_n f vhat^2]^{-1} E_n[ phi(y - d alpha - gfit) vhat ].
pub fn one_step(
    alpha_hat: f64,
    y: &DVector<f64>,
    d: &DVector<f64>,
    gfit: &DVector<f64>,
    vhat: &DVector<f64>,
    f_eps0: f64,
) -> f64 {
    assert!(f_eps0 > 0.0, "one-step needs a positive density estimate");
    let n = y.len() as f64;
    let ev2 = vhat.norm_squared() / n;
    assert!(ev2 > 0.0);
    let mut score = 0.0;
    for i in 0..y.len() {
        score += sign_score(y[i] - d[i] * alpha_hat - gfit[i]) * vhat[i];
    }
    score /= n;
    alpha_hat + score / (f_eps0 * ev2)
}

/// Nuisance-stage outputs shared by every step-(iii) variant.
#[derive(Debug, Clone)]
pub struct PipelineParts {
    pub weights: PenaltyWeights,
    pub gamma: f64,
    pub lambda_median: f64,
    /// Penalized median-regression fit of step (i).
    pub pen: LadFit,
    /// Post-selection refit on the step-(i) support.
    pub refit: LadFit,
    /// Iterated heteroscedastic lasso of step (ii).
    pub lasso: LassoFit,
    /// Post-lasso refit on the step-(ii) support.
    pub post: PostLassoFit,
    pub warnings: Vec<String>,
}

/// Run steps (i) and (ii): penalized median regression with the pivotal
/// penalty plus refit, and the iterated lasso plus post-lasso.
pub fn fit_stage_nuisance(
    sample: &Sample,
    config: &OrthoConfig,
    rng: &mut impl Rng,
) -> Result<PipelineParts> {
    let n = sample.n();
    let mut warnings = Vec::new();
    let mut weights = column_loadings(sample).stage("step (i) penalty loadings")?;
    let mut exempt_cols: Vec<usize> = Vec::new();
    if config.exempt_intercept {
        match sample.intercept_column() {
            Some(j) => {
                weights.exempt_x_column(j);
                exempt_cols.push(j);
            }
            None => warnings.push("intercept exemption requested but no all-ones column".into()),
        }
    }
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(n));
    let lambda_median =
        pivotal_penalty_median(sample, &weights, gamma, config.c0, config.pivotal_sims, rng)
            .stage("step (i) pivotal penalty")?;
    let mut pen = solve_l1_median(sample, lambda_median, &weights)
        .stage("step (i) penalized median regression")?;
    if pen.solver_status == SolverStatus::IterationLimit {
        warnings.push("step (i) solver hit the iteration cap".into());
    }
    // Sparsity guard: a refit needs |support| + 1 well below n.
    let cap = n / 2 - 2;
    if pen.support.len() + 1 >= n / 2 && cap >= 1 {
        warnings.push(format!(
            "step (i) support {} truncated to {cap} for the refit",
            pen.support.len()
        ));
        pen = truncate_coefficients(sample, &weights, &pen, cap);
    }
    let refit =
        lad_refit(sample, &pen.support, true).stage("step (i) post-selection refit")?;
    if !refit.dropped.is_empty() {
        warnings.push(format!("step (i) refit dropped collinear columns {:?}", refit.dropped));
    }

    let lasso =
        iterated_lasso_exempt(sample, gamma, config.c, config.lasso_rounds, &exempt_cols)
            .stage("step (ii) lasso")?;
    let post = post_lasso(sample, &lasso.support).stage("step (ii) post-lasso")?;
    if post.rank_deficient {
        warnings.push("step (ii) post-lasso design rank deficient; pseudo-inverse used".into());
    }
    Ok(PipelineParts {
        weights,
        gamma,
        lambda_median,
        pen,
        refit,
        lasso,
        post,
        warnings,
    })
}

/// Full inference output for one target coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceResult {
    pub algorithm: Algorithm,
    pub alpha_check: f64,
    /// Standard deviation used for the Wald interval (robust form).
    pub sigma_hat: f64,
    /// Homoscedastic-efficiency form, reported for diagnostics.
    pub sigma_hat_homoscedastic: f64,
    pub wald_ci: (f64, f64),
    pub score_region: ScoreRegion,
    /// Sampled trace of (alpha, n L_n(alpha)).
    pub score_trace: Vec<(f64, f64)>,
    pub interval: SearchInterval,
    pub variance: VarianceEstimate,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gamma: f64,
    pub lambda_median: f64,
    pub lambda_lasso: f64,
    pub step1_support: Vec<usize>,
    pub step2_support: Vec<usize>,
    pub union_support: Option<Vec<usize>>,
    pub lasso_loading_rounds: usize,
    /// Numerical tolerance of the approximate-zero condition in step (iii);
    /// exact breakpoint search achieves 0.
    pub moment_tolerance: f64,
    pub warnings: Vec<String>,
}

/// Stage vectors kept out of the serialized result but needed by callers that
/// assemble influence functions.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    /// Fitted control part used in step (iii).
    pub gfit: DVector<f64>,
    /// Instrument residuals.
    pub vhat: DVector<f64>,
    /// Step-(iii) residuals y - d alpha_check - gfit.
    pub residuals: DVector<f64>,
}

/// Assemble step (iii) and the variance report for a given algorithm from
/// fitted nuisance parts.
pub fn assemble_inference(
    sample: &Sample,
    config: &OrthoConfig,
    algorithm: Algorithm,
    parts: &PipelineParts,
) -> Result<(InferenceResult, StageOutputs)> {
    let n = sample.n();
    let y = sample.y();
    let d = sample.d();
    let mut warnings = parts.warnings.clone();

    // Step-(iii) ingredients. Both algorithms keep the post-selection fitted
    // value x'beta from step (i); they differ in the step-(ii) instrument
    // (post-lasso for Alg1, penalized lasso for Alg2). The one-step variant
    // corrects the penalized coefficient, so it keeps the penalized fitted
    // value, but pairs it with the post-lasso instrument whose in-sample
    // orthogonality to the selected columns protects the correction.
    let (beta_fit, alpha_center, theta): (&LadFit, f64, DVector<f64>) = match algorithm {
        Algorithm::Alg1 => (&parts.refit, parts.refit.alpha, parts.post.theta_vector()),
        Algorithm::Alg2 => (&parts.refit, parts.pen.alpha, parts.lasso.theta_vector()),
        Algorithm::OneStep => (&parts.pen, parts.pen.alpha, parts.post.theta_vector()),
        Algorithm::Alg3 => {
            return double_selection_from_parts(sample, config, parts);
        }
    };
    let gfit = beta_fit.control_fit(sample);
    let vhat = build_instruments(sample, &theta).stage("step (ii) instruments")?;

    let mut interval = param_interval(alpha_center, sample, config.interval_scale);
    let alpha_check = match algorithm {
        Algorithm::OneStep => {
            let resid1 = parts.pen.residuals(sample);
            let h = powell_bandwidth(&resid1, config.bandwidth_scale);
            let f0 = density_at_zero(&resid1, h);
            if f0 <= 0.0 {
                return Err(Error::InvalidInput(
                    "one-step needs a positive density estimate".into(),
                )
                .in_stage("step (iii) one-step"));
            }
            let a = one_step(parts.pen.alpha, y, d, &gfit, &vhat, f0);
            // Keep the reporting interval consistent with alpha_check.
            if !interval.contains(a) {
                interval.lo = interval.lo.min(a);
                interval.hi = interval.hi.max(a);
                warnings.push("one-step estimate fell outside the suggested interval".into());
            }
            a
        }
        _ => {
            let scan = ScoreScan::new(y, d, &gfit, &vhat, &interval)
                .stage("step (iii) score minimization")?;
            scan.minimize().0
        }
    };
    let scan = ScoreScan::new(y, d, &gfit, &vhat, &interval).stage("step (iii) score scan")?;
    let region = scan.region(config.xi);
    let trace = scan.trace();

    let residuals = y - d * alpha_check - &gfit;
    let variance = estimate_variance(&residuals, d, &vhat, config.bandwidth_scale);
    let sigma2_hom = sigma_homoscedastic(variance.f_eps0.max(1e-300), &vhat);
    let sigma2_used = if !variance.j_degenerate {
        variance.sigma2
    } else if !variance.zero_density {
        warnings.push("robust variance degenerate; homoscedastic form used".into());
        sigma2_hom
    } else {
        return Err(Error::InvalidInput(
            "both variance estimates degenerate (no residuals near zero)".into(),
        )
        .in_stage("variance"));
    };
    let sigma_hat = sigma2_used.sqrt();
    let wald = wald_ci(alpha_check, sigma_hat, n, config.xi);

    let result = InferenceResult {
        algorithm,
        alpha_check,
        sigma_hat,
        sigma_hat_homoscedastic: sigma2_hom.sqrt(),
        wald_ci: wald,
        score_region: region,
        score_trace: trace,
        interval,
        variance,
        diagnostics: Diagnostics {
            gamma: parts.gamma,
            lambda_median: parts.lambda_median,
            lambda_lasso: parts.lasso.lambda,
            step1_support: parts.pen.support.clone(),
            step2_support: parts.lasso.support.clone(),
            union_support: None,
            lasso_loading_rounds: parts.lasso.iterations_of_loadings,
            moment_tolerance: 0.0,
            warnings,
        },
    };
    let outputs = StageOutputs { gfit, vhat, residuals };
    Ok((result, outputs))
}

fn double_selection_from_parts(
    sample: &Sample,
    config: &OrthoConfig,
    parts: &PipelineParts,
) -> Result<(InferenceResult, StageOutputs)> {
    let n = sample.n();
    let y = sample.y();
    let d = sample.d();
    let mut warnings = parts.warnings.clone();

    let mut union: Vec<usize> = parts
        .pen
        .support
        .iter()
        .chain(parts.lasso.support.iter())
        .copied()
        .collect();
    union.sort_unstable();
    union.dedup();
    if union.len() + 1 >= n / 2 {
        return Err(Error::UnionTooLarge { selected: union.len(), n })
            .stage("step (iii) double-selection refit");
    }
    let refit = lad_refit(sample, &union, true).stage("step (iii) double-selection refit")?;
    if !refit.dropped.is_empty() {
        warnings.push(format!("double-selection refit dropped columns {:?}", refit.dropped));
    }
    let alpha_check = refit.alpha;

    // Variance uses the instrument the double selection creates implicitly:
    // the post-lasso residual on the step-(ii) support.
    let vhat = build_instruments(sample, &parts.post.theta_vector())
        .stage("step (ii) instruments")?;
    let gfit = refit.control_fit(sample);
    let residuals = y - d * alpha_check - &gfit;
    let variance = estimate_variance(&residuals, d, &vhat, config.bandwidth_scale);
    let sigma2_hom = sigma_homoscedastic(variance.f_eps0.max(1e-300), &vhat);
    let sigma2_used = if !variance.j_degenerate {
        variance.sigma2
    } else if !variance.zero_density {
        warnings.push("robust variance degenerate; homoscedastic form used".into());
        sigma2_hom
    } else {
        return Err(Error::InvalidInput("both variance estimates degenerate".into())
            .in_stage("variance"));
    };
    let sigma_hat = sigma2_used.sqrt();
    let wald = wald_ci(alpha_check, sigma_hat, n, config.xi);

    let interval = param_interval(alpha_check, sample, config.interval_scale);
    let scan = ScoreScan::new(y, d, &gfit, &vhat, &interval).stage("step (iii) score scan")?;
    let region = scan.region(config.xi);
    let trace = scan.trace();

    let result = InferenceResult {
        algorithm: Algorithm::Alg3,
        alpha_check,
        sigma_hat,
        sigma_hat_homoscedastic: sigma2_hom.sqrt(),
        wald_ci: wald,
        score_region: region,
        score_trace: trace,
        interval,
        variance,
        diagnostics: Diagnostics {
            gamma: parts.gamma,
            lambda_median: parts.lambda_median,
            lambda_lasso: parts.lasso.lambda,
            step1_support: parts.pen.support.clone(),
            step2_support: parts.lasso.support.clone(),
            union_support: Some(union),
            lasso_loading_rounds: parts.lasso.iterations_of_loadings,
            moment_tolerance: 0.0,
            warnings,
        },
    };
    let outputs = StageOutputs { gfit, vhat, residuals };
    Ok((result, outputs))
}

/// Run the configured algorithm end to end and also return the stage vectors.
pub fn run_algorithm_detailed(
    sample: &Sample,
    config: &OrthoConfig,
    rng: &mut impl Rng,
) -> Result<(InferenceResult, StageOutputs)> {
    let parts = fit_stage_nuisance(sample, config, rng)?;
    assemble_inference(sample, config, config.algorithm, &parts)
}

/// Run the configured algorithm end to end.
pub fn run_algorithm(
    sample: &Sample,
    config: &OrthoConfig,
    rng: &mut impl Rng,
) -> Result<InferenceResult> {
    run_algorithm_detailed(sample, config, rng).map(|(r, _)| r)
}

/// Double selection (Algorithm 3) as a standalone entry point.
pub fn double_selection(
    sample: &Sample,
    config: &OrthoConfig,
    rng: &mut impl Rng,
) -> Result<InferenceResult> {
    let parts = fit_stage_nuisance(sample, config, rng)?;
    double_selection_from_parts(sample, config, &parts).map(|(r, _)| r)
}

/// Convenience: run with a reproducible stream.
pub fn run_algorithm_seeded(
    sample: &Sample,
    config: &OrthoConfig,
    stream: &RngStream,
) -> Result<InferenceResult> {
    run_algorithm(sample, config, &mut stream.rng())
}
