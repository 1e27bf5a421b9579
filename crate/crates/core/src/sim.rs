//! Monte Carlo harness: data generation over an (R2y, R2d) grid with AR(1)
//! correlated controls, a replication runner contrasting the naive
//! post-selection benchmark with the orthogonal estimators, and
//! rejection-rate / bias / SD / RMSE summaries.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RngStream, Sample};
use crate::error::{Error, Result};
use crate::ortho::{
    assemble_inference, fit_stage_nuisance, score_statistic, Algorithm, OrthoConfig,
    PipelineParts,
};
use crate::stats::normal_quantile;
use crate::variance::{density_at_zero, powell_bandwidth};

/// Coefficient profile of the data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaProfile {
    /// 1/j^2 on the first ten coefficients (intercept included), zero after.
    ExactSparse10,
    /// 1/j^2 on every coefficient: approximately sparse, never exactly.
    PolyDecayAll,
}

/// One simulation design: the model is
/// y = d alpha0 + x'(c_y theta0) + eps, d = x'(c_d theta0) + v,
/// x = (1, z')' with z AR(1)-correlated standard normals, eps and v standard
/// normal, and c_y, c_d chosen to hit the requested R-squareds exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub r2y: f64,
    pub r2d: f64,
    pub alpha0: f64,
    pub profile: ThetaProfile,
    pub seed: u64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidInput(format!("need n >= 10, got {}", self.n)));
        }
        if self.p < 2 {
            return Err(Error::InvalidInput("need p >= 2 (intercept plus controls)".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (-1,1), got {}", self.rho)));
        }
        for (name, r2) in [("r2y", self.r2y), ("r2d", self.r2d)] {
            if !(0.0..1.0).contains(&r2) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0,1), got {r2}")));
            }
        }
        Ok(())
    }
}

/// theta0 over the x columns (column 0 is the intercept): 1/j^2 in 1-based
/// indexing, truncated at ten terms for the exactly sparse profile.
pub fn theta_profile(profile: ThetaProfile, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| {
        if j == 0 {
            // the intercept column carries no signal; the decaying profile
            // runs over the stochastic controls z_1, z_2, ...
            return 0.0;
        }
        match profile {
            ThetaProfile::ExactSparse10 if j > 10 => 0.0,
            _ => 1.0 / (j as f64 * j as f64),
        }
    })
}

/// Closed-form lower Cholesky factor of the AR(1) Toeplitz covariance
/// Sigma_ij = rho^|i-j|: first column rho^i, then rho^{i-j} sqrt(1-rho^2).
pub fn toeplitz_cholesky(rho: f64, k: usize) -> DMatrix<f64> {
    let s = (1.0 - rho * rho).sqrt();
    DMatrix::from_fn(k, k, |i, j| {
        if j > i {
            0.0
        } else if j == 0 {
            rho.powi(i as i32)
        } else {
            rho.powi((i - j) as i32) * s
        }
    })
}

/// Signal scale c = sqrt(r2 / ((1 - r2) q)) with q = theta' Sigma theta, so
/// the population R-squared equals `r2` exactly under unit error variance.
pub fn scale_for_r2(theta_tail: &DVector<f64>, sigma: &DMatrix<f64>, r2: f64) -> f64 {
    assert!((0.0..1.0).contains(&r2));
    if r2 == 0.0 {
        return 0.0;
    }
    let q = (sigma * theta_tail).dot(theta_tail);
    assert!(q > 0.0, "signal profile has no variance");
    (r2 / ((1.0 - r2) * q)).sqrt()
}

/// Design with precomputed signal scales.
#[derive(Debug, Clone)]
pub struct CompiledDesign {
    pub spec: DesignSpec,
    pub theta0: DVector<f64>,
    pub c_y: f64,
    pub c_d: f64,
}

pub fn compile_design(spec: &DesignSpec) -> Result<CompiledDesign> {
    spec.validate()?;
    let theta0 = theta_profile(spec.profile, spec.p);
    let tail = DVector::from_fn(spec.p - 1, |j, _| theta0[j + 1]);
    // Dense Toeplitz quadratic form, built once per design.
    let k = spec.p - 1;
    let sigma = DMatrix::from_fn(k, k, |i, j| {
        spec.rho.powi((i as i32 - j as i32).abs())
    });
    let c_y = scale_for_r2(&tail, &sigma, spec.r2y);
    let c_d = scale_for_r2(&tail, &sigma, spec.r2d);
    Ok(CompiledDesign { spec: *spec, theta0, c_y, c_d })
}

/// Draw one sample. The AR(1) recursion applies the closed-form Cholesky
/// factor of the Toeplitz covariance row by row.
pub fn generate_compiled(design: &CompiledDesign, rng: &mut impl Rng) -> Sample {
    let n = design.spec.n;
    let p = design.spec.p;
    let rho = design.spec.rho;
    let s = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    let mut d = DVector::zeros(n);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        let mut prev = 0.0;
        for j in 1..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = if j == 1 { e } else { rho * prev + s * e };
            x[(i, j)] = prev;
        }
        let mut signal = 0.0;
        for j in 0..p {
            if design.theta0[j] != 0.0 {
                signal += x[(i, j)] * design.theta0[j];
            }
        }
        let v: f64 = rng.sample(StandardNormal);
        d[i] = design.c_d * signal + v;
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = d[i] * design.spec.alpha0 + design.c_y * signal + eps;
    }
    Sample::new(y, d, x).expect("generated sample is always valid")
}

/// Draw one sample from a design specification and a reproducible stream.
pub fn generate(spec: &DesignSpec, stream: &RngStream) -> Result<Sample> {
    let design = compile_design(spec)?;
    Ok(generate_compiled(&design, &mut stream.rng()))
}

/// Estimation methods contrasted by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Post-selection refit with the classical fixed-model LAD variance.
    NaivePost,
    OrthoAlg1,
    OrthoAlg2,
    DoubleSel,
    /// Score test of alpha = alpha0 at the chi-squared 95% critical value.
    ScoreTest,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::NaivePost => "naive-post",
            Method::OrthoAlg1 => "ortho-alg1",
            Method::OrthoAlg2 => "ortho-alg2",
            Method::DoubleSel => "double-selection",
            Method::ScoreTest => "score-test",
        }
    }
}

/// Outcome of one (replication, method) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub method: Method,
    pub rep: u64,
    pub alpha_est: f64,
    pub sigma_est: f64,
    /// 5%-level rejection of the true null alpha = alpha0.
    pub reject05: bool,
    /// Coverage of alpha0 by the 95% interval (region for the score test).
    pub covered95: bool,
    /// The raw test statistic: |t| for Wald methods, n L_n(alpha0) for the
    /// score test.
    pub statistic: f64,
    pub error: Option<String>,
}

fn failed(method: Method, rep: u64, msg: &str) -> ReplicationOutcome {
    ReplicationOutcome {
        method,
        rep,
        alpha_est: f64::NAN,
        sigma_est: f64::NAN,
        reject05: false,
        covered95: false,
        statistic: f64::NAN,
        error: Some(msg.to_string()),
    }
}

const Z975: f64 = 1.959963984540054;
const CHI2_95: f64 = 3.841458820694126;

fn wald_outcome(
    method: Method,
    rep: u64,
    alpha_est: f64,
    sigma_est: f64,
    n: usize,
    alpha0: f64,
) -> ReplicationOutcome {
    let stat = (alpha_est - alpha0).abs() * (n as f64).sqrt() / sigma_est;
    ReplicationOutcome {
        method,
        rep,
        alpha_est,
        sigma_est,
        reject05: stat > Z975,
        covered95: stat <= Z975,
        statistic: stat,
        error: None,
    }
}

/// Classical LAD sandwich for the naive benchmark, treating the selected
/// model as fixed: avar(sqrt n alpha) = [Q^{-1}]_dd / (4 f^2) with
/// Q = E_n w w' over the selected columns.
fn naive_sigma(sample: &Sample, parts: &PipelineParts, bandwidth_scale: f64) -> Result<f64> {
    let n = sample.n();
    let supp: Vec<usize> = parts
        .pen
        .support
        .iter()
        .copied()
        .filter(|j| !parts.refit.dropped.contains(j))
        .collect();
    let k = supp.len() + 1;
    let mut w = DMatrix::zeros(n, k);
    w.set_column(0, sample.d());
    for (slot, &j) in supp.iter().enumerate() {
        w.set_column(slot + 1, &sample.x().column(j).into_owned());
    }
    let q = w.tr_mul(&w) / n as f64;
    let mut e1 = DVector::zeros(k);
    e1[0] = 1.0;
    let qinv_dd = match Cholesky::new(q.clone()) {
        Some(chol) => chol.solve(&e1)[0],
        None => {
            let svd = q.svd(true, true);
            svd.solve(&e1, 1e-12)
                .map_err(|e| Error::InvalidInput(format!("naive variance solve failed: {e}")))?[0]
        }
    };
    let resid = parts.refit.residuals(sample);
    let h = powell_bandwidth(&resid, bandwidth_scale);
    let f = density_at_zero(&resid, h);
    if f <= 0.0 || qinv_dd <= 0.0 {
        return Err(Error::InvalidInput("naive variance degenerate".into()));
    }
    Ok((qinv_dd / (4.0 * f * f)).sqrt())
}

/// Run every requested method on one replication, sharing the nuisance fits.
pub fn run_replication(
    design: &CompiledDesign,
    rep: u64,
    methods: &[Method],
    config: &OrthoConfig,
) -> Vec<ReplicationOutcome> {
    let n = design.spec.n;
    let alpha0 = design.spec.alpha0;
    let stream = RngStream::new(design.spec.seed, rep);
    let mut rng = stream.rng();
    let sample = generate_compiled(design, &mut rng);

    let parts = match fit_stage_nuisance(&sample, config, &mut rng) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return methods.iter().map(|&m| failed(m, rep, &msg)).collect();
        }
    };

    let needs_alg1 =
        methods.iter().any(|m| matches!(m, Method::OrthoAlg1 | Method::ScoreTest));
    let alg1 = if needs_alg1 {
        Some(assemble_inference(&sample, config, Algorithm::Alg1, &parts))
    } else {
        None
    };

    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let outcome = match method {
            Method::NaivePost => match naive_sigma(&sample, &parts, config.bandwidth_scale) {
                Ok(sigma) => wald_outcome(method, rep, parts.refit.alpha, sigma, n, alpha0),
                Err(e) => failed(method, rep, &e.to_string()),
            },
            Method::OrthoAlg1 => match alg1.as_ref().unwrap() {
                Ok((r, _)) => wald_outcome(method, rep, r.alpha_check, r.sigma_hat, n, alpha0),
                Err(e) => failed(method, rep, &e.to_string()),
            },
            Method::ScoreTest => match alg1.as_ref().unwrap() {
                Ok((r, outputs)) => {
                    match score_statistic(
                        alpha0,
                        sample.y(),
                        sample.d(),
                        &outputs.gfit,
                        &outputs.vhat,
                    ) {
                        Ok(ln) => {
                            let n_ln = n as f64 * ln;
                            ReplicationOutcome {
                                method,
                                rep,
                                alpha_est: r.alpha_check,
                                sigma_est: r.sigma_hat,
                                reject05: n_ln > CHI2_95,
                                covered95: n_ln <= CHI2_95,
                                statistic: n_ln,
                                error: None,
                            }
                        }
                        Err(e) => failed(method, rep, &e.to_string()),
                    }
                }
                Err(e) => failed(method, rep, &e.to_string()),
            },
            Method::OrthoAlg2 => {
                match assemble_inference(&sample, config, Algorithm::Alg2, &parts) {
                    Ok((r, _)) => {
                        wald_outcome(method, rep, r.alpha_check, r.sigma_hat, n, alpha0)
                    }
                    Err(e) => failed(method, rep, &e.to_string()),
                }
            }
            Method::DoubleSel => {
                match assemble_inference(&sample, config, Algorithm::Alg3, &parts) {
                    Ok((r, _)) => {
                        wald_outcome(method, rep, r.alpha_check, r.sigma_hat, n, alpha0)
                    }
                    Err(e) => failed(method, rep, &e.to_string()),
                }
            }
        };
        out.push(outcome);
    }
    out
}

/// Summary metrics for one (design, method) cell. Failed replications are
/// excluded from every rate and counted in `failures`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub r2y: f64,
    pub r2d: f64,
    pub method: Method,
    pub reps: usize,
    pub failures: usize,
    pub reject_rate: f64,
    pub coverage95: f64,
    pub mean_bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

/// Compute the summary row from per-replication outcomes of one method.
pub fn summarize(outcomes: &[ReplicationOutcome], r2y: f64, r2d: f64, alpha0: f64) -> MetricsRow {
    let method = outcomes.first().map(|o| o.method).unwrap_or(Method::OrthoAlg1);
    let ok: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let m = ok.len();
    let failures = outcomes.len() - m;
    let (mut reject, mut cover) = (0usize, 0usize);
    let mut bias_acc = 0.0;
    for o in &ok {
        reject += o.reject05 as usize;
        cover += o.covered95 as usize;
        bias_acc += o.alpha_est - alpha0;
    }
    let mean_bias = if m > 0 { bias_acc / m as f64 } else { f64::NAN };
    let mean_est = mean_bias + alpha0;
    let mut var_acc = 0.0;
    let mut mse_acc = 0.0;
    for o in &ok {
        var_acc += (o.alpha_est - mean_est) * (o.alpha_est - mean_est);
        mse_acc += (o.alpha_est - alpha0) * (o.alpha_est - alpha0);
    }
    let sd = if m > 0 { (var_acc / m as f64).sqrt() } else { f64::NAN };
    let rmse = if m > 0 { (mse_acc / m as f64).sqrt() } else { f64::NAN };
    MetricsRow {
        r2y,
        r2d,
        method,
        reps: outcomes.len(),
        failures,
        reject_rate: if m > 0 { reject as f64 / m as f64 } else { f64::NAN },
        coverage95: if m > 0 { cover as f64 / m as f64 } else { f64::NAN },
        mean_bias,
        sd,
        rmse,
    }
}

/// All outcomes for one design cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub spec: DesignSpec,
    /// Outcomes in replication-major order; each inner slice holds one
    /// replication's outcomes in method order.
    pub outcomes: Vec<Vec<ReplicationOutcome>>,
}

impl CellResult {
    pub fn for_method(&self, method: Method) -> Vec<ReplicationOutcome> {
        self.outcomes
            .iter()
            .flat_map(|reps| reps.iter().filter(|o| o.method == method).cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTable {
    pub rows: Vec<MetricsRow>,
}

/// Grid runner: every (design, rep) pair is an independent task keyed by its
/// own stream, so the table is identical for any thread count.
pub fn run_grid(
    designs: &[DesignSpec],
    reps: u64,
    methods: &[Method],
    config: &OrthoConfig,
) -> Result<(GridTable, Vec<CellResult>)> {
    if reps < 1 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let mut cells = Vec::with_capacity(designs.len());
    let mut rows = Vec::new();
    for spec in designs {
        let design = compile_design(spec)?;
        let outcomes: Vec<Vec<ReplicationOutcome>> = (0..reps)
            .into_par_iter()
            .map(|rep| run_replication(&design, rep, methods, config))
            .collect();
        let cell = CellResult { spec: *spec, outcomes };
        for &method in methods {
            rows.push(summarize(&cell.for_method(method), spec.r2y, spec.r2d, spec.alpha0));
        }
        cells.push(cell);
    }
    Ok((GridTable { rows }, cells))
}

/// Wide CSV: one row per (design, method).
pub fn table_to_csv(table: &GridTable) -> String {
    let mut out = String::from(
        "r2y,r2d,method,reps,failures,reject_rate,coverage95,mean_bias,sd,rmse\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.r2y,
            r.r2d,
            r.method.label(),
            r.reps,
            r.failures,
            r.reject_rate,
            r.coverage95,
            r.mean_bias,
            r.sd,
            r.rmse
        ));
    }
    out
}

/// Long (plot-friendly) CSV: one row per (design, method, metric).
pub fn table_to_long_csv(table: &GridTable) -> String {
    let mut out = String::from("r2y,r2d,method,metric,value\n");
    for r in &table.rows {
        for (metric, value) in [
            ("reject_rate", r.reject_rate),
            ("coverage95", r.coverage95),
            ("mean_bias", r.mean_bias),
            ("sd", r.sd),
            ("rmse", r.rmse),
        ] {
            out.push_str(&format!(
                "{},{},{},{metric},{value}\n",
                r.r2y,
                r.r2d,
                r.method.label()
            ));
        }
    }
    out
}

/// The desk-scale default grid {0, 0.3, 0.5, 0.7, 0.9}^2 and the paper-scale
/// full grid {0, 0.1, ..., 0.9}^2.
pub fn grid_values(full: bool) -> Vec<f64> {
    if full {
        (0..10).map(|i| i as f64 / 10.0).collect()
    } else {
        vec![0.0, 0.3, 0.5, 0.7, 0.9]
    }
}

/// Build the grid of designs with deterministic per-design seeds.
pub fn build_grid(
    n: usize,
    p: usize,
    rho: f64,
    alpha0: f64,
    profile: ThetaProfile,
    base_seed: u64,
    full: bool,
) -> Vec<DesignSpec> {
    let vals = grid_values(full);
    let mut designs = Vec::with_capacity(vals.len() * vals.len());
    let mut idx = 0u64;
    for &r2y in &vals {
        for &r2d in &vals {
            designs.push(DesignSpec {
                n,
                p,
                rho,
                r2y,
                r2d,
                alpha0,
                profile,
                seed: base_seed.wrapping_add(idx),
            });
            idx += 1;
        }
    }
    designs
}

/// Two-sided 5% z-test critical value, exposed for the naive benchmark docs.
pub fn z_critical_5pct() -> f64 {
    normal_quantile(0.975)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_profiles() {
        let t = theta_profile(ThetaProfile::ExactSparse10, 15);
        assert_eq!(t[0], 0.0); // intercept unsignaled
        assert_eq!(t[1], 1.0);
        assert!((t[4] - 1.0 / 16.0).abs() < 1e-15);
        assert!((t[10] - 0.01).abs() < 1e-15);
        assert_eq!(t[11], 0.0);
        let t2 = theta_profile(ThetaProfile::PolyDecayAll, 15);
        assert!((t2[14] - 1.0 / 196.0).abs() < 1e-15);
    }

    #[test]
    fn toeplitz_cholesky_matches_dense_oracle() {
        let rho = 0.5;
        let k = 5;
        let l = toeplitz_cholesky(rho, k);
        // Dense factorization oracle.
        let sigma = DMatrix::from_fn(k, k, |i, j| rho.powi((i as i32 - j as i32).abs()));
        let chol = Cholesky::new(sigma.clone()).unwrap();
        let l_ref = chol.l();
        for i in 0..k {
            for j in 0..k {
                assert!(
                    (l[(i, j)] - l_ref[(i, j)]).abs() < 1e-10,
                    "L[{i},{j}] = {} vs {}",
                    l[(i, j)],
                    l_ref[(i, j)]
                );
            }
        }
        // And L L' reproduces Sigma.
        let back = &l * l.transpose();
        assert!((back - sigma).amax() < 1e-12);
    }

    #[test]
    fn scale_examples() {
        let sigma = DMatrix::identity(3, 3);
        let theta = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(scale_for_r2(&theta, &sigma, 0.0), 0.0);
        // q = 1, r2 = 0.5 -> c = 1
        assert!((scale_for_r2(&theta, &sigma, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn summarize_examples() {
        let make = |alpha: f64| ReplicationOutcome {
            method: Method::OrthoAlg1,
            rep: 0,
            alpha_est: alpha,
            sigma_est: 1.0,
            reject05: false,
            covered95: true,
            statistic: 0.0,
            error: None,
        };
        // All estimates equal to truth: bias 0, sd 0.
        let row = summarize(&[make(0.5), make(0.5)], 0.1, 0.2, 0.5);
        assert_eq!(row.mean_bias, 0.0);
        assert_eq!(row.sd, 0.0);
        assert_eq!(row.rmse, 0.0);
        // Estimates {0, 1} around truth 0.5: bias 0, sd 0.5, rmse 0.5.
        let row2 = summarize(&[make(0.0), make(1.0)], 0.1, 0.2, 0.5);
        assert!(row2.mean_bias.abs() < 1e-15);
        assert!((row2.sd - 0.5).abs() < 1e-15);
        assert!((row2.rmse - 0.5).abs() < 1e-15);
    }

    #[test]
    fn summarize_matches_naive_loop_and_identity() {
        let mut rng = RngStream::new(99, 0).rng();
        let alpha0 = 0.5;
        let outcomes: Vec<ReplicationOutcome> = (0..57)
            .map(|rep| ReplicationOutcome {
                method: Method::NaivePost,
                rep,
                alpha_est: alpha0 + rng.random::<f64>() - 0.5,
                sigma_est: 1.0,
                reject05: rng.random::<f64>() < 0.1,
                covered95: true,
                statistic: 0.0,
                error: None,
            })
            .collect();
        let row = summarize(&outcomes, 0.0, 0.0, alpha0);
        let ests: Vec<f64> = outcomes.iter().map(|o| o.alpha_est).collect();
        let mean = ests.iter().sum::<f64>() / 57.0;
        let bias = mean - alpha0;
        let var = ests.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 57.0;
        let mse = ests.iter().map(|e| (e - alpha0) * (e - alpha0)).sum::<f64>() / 57.0;
        assert!((row.mean_bias - bias).abs() < 1e-12);
        assert!((row.sd - var.sqrt()).abs() < 1e-12);
        assert!((row.rmse - mse.sqrt()).abs() < 1e-12);
        // RMSE^2 = bias^2 + SD^2
        assert!(
            (row.rmse * row.rmse - row.mean_bias * row.mean_bias - row.sd * row.sd).abs() < 1e-10
        );
    }

    #[test]
    fn failures_excluded_from_rates() {
        let ok = ReplicationOutcome {
            method: Method::OrthoAlg1,
            rep: 0,
            alpha_est: 1.0,
            sigma_est: 1.0,
            reject05: true,
            covered95: false,
            statistic: 3.0,
            error: None,
        };
        let bad = failed(Method::OrthoAlg1, 1, "boom");
        let row = summarize(&[ok, bad], 0.0, 0.0, 0.5);
        assert_eq!(row.failures, 1);
        assert_eq!(row.reps, 2);
        assert_eq!(row.reject_rate, 1.0);
    }
}
