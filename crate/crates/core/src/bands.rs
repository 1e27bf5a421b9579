//! Many-target inference: each column of a treatment block is estimated by
//! the full orthogonal pipeline with the remaining columns as controls, the
//! per-observation influence values are assembled, and a Gaussian multiplier
//! bootstrap of their maximum delivers simultaneous confidence bands.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sign_score, RngStream, Sample};
use crate::error::{Error, Result};
use crate::ortho::{run_algorithm_detailed, Algorithm, OrthoConfig};
use crate::stats::quantile_type7;
use rand_distr::StandardNormal;
use rand::Rng;

/// Default number of bootstrap draws.
pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 2000;

/// Per-target estimate from the orthogonal pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetFit {
    pub alpha: f64,
    pub sigma: f64,
    /// Estimated moment derivative (the Powell plug-in).
    pub gamma: f64,
    /// Failure message when the pipeline could not produce this target.
    pub error: Option<String>,
}

impl TargetFit {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetEstimates {
    pub targets: Vec<TargetFit>,
}

impl TargetEstimates {
    pub fn active(&self) -> Vec<usize> {
        self.targets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_ok())
            .map(|(j, _)| j)
            .collect()
    }
}

/// Estimated influence values phi_j(w_i) = -psi_ij / (sigma_j Gamma_j),
/// one column per target; failed targets hold a zero column and are excluded
/// from the bootstrap maximum.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    pub phi: DMatrix<f64>,
    pub active: Vec<bool>,
}

/// Fit every target: for target j the treatment is column j of `dmat` and the
/// controls are the remaining treatment columns followed by `umat`.
/// Failures are recorded per target, not fatal.
pub fn fit_all_targets(
    y: &DVector<f64>,
    dmat: &DMatrix<f64>,
    umat: &DMatrix<f64>,
    config: &OrthoConfig,
    stream: &RngStream,
) -> Result<(TargetEstimates, InfluenceMatrix)> {
    let n = y.len();
    let p1 = dmat.ncols();
    if p1 < 1 {
        return Err(Error::InvalidInput("need at least one target column".into()));
    }
    if dmat.nrows() != n || (umat.ncols() > 0 && umat.nrows() != n) {
        return Err(Error::InvalidInput("row mismatch across y, D, U".into()));
    }
    if p1 - 1 + umat.ncols() < 1 {
        return Err(Error::InvalidInput(
            "no controls: a single target needs at least one U column".into(),
        ));
    }
    let mut cfg = config.clone();
    cfg.algorithm = Algorithm::Alg1;

    let fits: Vec<(TargetFit, DVector<f64>)> = (0..p1)
        .into_par_iter()
        .map(|j| {
            let mut cols: Vec<DVector<f64>> = Vec::with_capacity(p1 - 1 + umat.ncols());
            for k in 0..p1 {
                if k != j {
                    cols.push(dmat.column(k).into_owned());
                }
            }
            for k in 0..umat.ncols() {
                cols.push(umat.column(k).into_owned());
            }
            let x = DMatrix::from_columns(&cols);
            let sample = match Sample::new(y.clone(), dmat.column(j).into_owned(), x) {
                Ok(s) => s,
                Err(e) => {
                    return (
                        TargetFit { alpha: f64::NAN, sigma: f64::NAN, gamma: f64::NAN, error: Some(e.to_string()) },
                        DVector::zeros(n),
                    )
                }
            };
            let mut rng = stream.substream(1 + j as u64).rng();
            match run_algorithm_detailed(&sample, &cfg, &mut rng) {
                Ok((result, outputs)) => {
                    let gamma = result.variance.j_hat;
                    let sigma = result.sigma_hat;
                    if !(sigma.is_finite() && sigma > 0.0) || gamma == 0.0 {
                        return (
                            TargetFit {
                                alpha: result.alpha_check,
                                sigma,
                                gamma,
                                error: Some("degenerate variance".into()),
                            },
                            DVector::zeros(n),
                        );
                    }
                    let scale = -1.0 / (sigma * gamma);
                    let phi = DVector::from_fn(n, |i, _| {
                        scale * sign_score(outputs.residuals[i]) * outputs.vhat[i]
                    });
                    (
                        TargetFit { alpha: result.alpha_check, sigma, gamma, error: None },
                        phi,
                    )
                }
                Err(e) => (
                    TargetFit { alpha: f64::NAN, sigma: f64::NAN, gamma: f64::NAN, error: Some(e.to_string()) },
                    DVector::zeros(n),
                ),
            }
        })
        .collect();

    let mut phi = DMatrix::zeros(n, p1);
    let mut targets = Vec::with_capacity(p1);
    let mut active = Vec::with_capacity(p1);
    for (j, (fit, col)) in fits.into_iter().enumerate() {
        phi.set_column(j, &col);
        active.push(fit.is_ok());
        targets.push(fit);
    }
    Ok((TargetEstimates { targets }, InfluenceMatrix { phi, active }))
}

/// Gaussian multiplier bootstrap: for each draw, one shared n-vector of
/// standard normals multiplies every influence column; the statistic is the
/// maximum over active targets of |n^{-1/2} sum_i xi_i phi_ij|. Returns the
/// level-`level` empirical quantile and all draws (draw-indexed streams keep
/// the result independent of thread count).
pub fn multiplier_bootstrap(
    influence: &InfluenceMatrix,
    b: usize,
    level: f64,
    stream: &RngStream,
) -> Result<(f64, Vec<f64>)> {
    if b < 200 {
        return Err(Error::InvalidInput(format!("need at least 200 draws, got {b}")));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidInput("quantile level must lie in (0,1)".into()));
    }
    let active: Vec<usize> =
        influence.active.iter().enumerate().filter(|(_, a)| **a).map(|(j, _)| j).collect();
    if active.is_empty() {
        return Err(Error::InvalidInput("no active targets for the bootstrap".into()));
    }
    let n = influence.phi.nrows();
    let scale = 1.0 / (n as f64).sqrt();

    let mut draws: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|bi| {
            let mut rng = stream.substream(1 + bi as u64).rng();
            let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let proj = influence.phi.tr_mul(&xi);
            active.iter().map(|&j| (proj[j] * scale).abs()).fold(0.0f64, f64::max)
        })
        .collect();
    let mut sorted = draws.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c_hat = quantile_type7(&sorted, level);
    draws.shrink_to_fit();
    Ok((c_hat, draws))
}

/// Per-target simultaneous bands alpha_j +- c_hat sigma_j / sqrt(n);
/// `None` for failed targets.
pub fn simultaneous_bands(
    estimates: &TargetEstimates,
    c_hat: f64,
    n: usize,
) -> Vec<Option<(f64, f64)>> {
    assert!(c_hat >= 0.0);
    let root_n = (n as f64).sqrt();
    estimates
        .targets
        .iter()
        .map(|t| {
            t.is_ok().then(|| {
                let half = c_hat * t.sigma / root_n;
                (t.alpha - half, t.alpha + half)
            })
        })
        .collect()
}
