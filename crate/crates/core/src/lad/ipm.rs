//! Primal-dual interior-point solver for the weighted l1-regression LP.
//!
//! The problem `min_t sum_i |y_i - (W t)_i| + sum_j w_j |t_j|` is written with
//! residual slack pairs (u+, u-) and, for each coefficient with a strictly
//! positive penalty weight, a coefficient slack pair (t+, t-):
//!
//! ```text
//!   min  1'(u+ + u-) + w_P'(tP+ + tP-)
//!   s.t. W_F f + W_P (tP+ - tP-) + u+ - u- = y,
//!        tP+, tP-, u+, u- >= 0,  f free
//! ```
//!
//! Zero-penalty coefficients stay free: splitting them would leave the dual
//! without a strictly interior point (their two slacks must sum to zero) and
//! the central path would not exist. With the free block eliminated through a
//! Schur complement, a Mehrotra predictor-corrector iteration factors
//! `Mz = W_P diag(g) W_P' + diag(e)` densely, via the Woodbury identity, or as
//! a pure diagonal when every coefficient is free (the refit case).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmConfig {
    /// Relative duality-gap and feasibility tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// Coefficient vector (length k, original column order).
    pub coef: DVector<f64>,
    #[allow(dead_code)]
    pub iterations: usize,
    pub converged: bool,
    /// Final relative duality gap.
    #[allow(dead_code)]
    pub rel_gap: f64,
}

enum MzFactor {
    Diagonal(DVector<f64>),
    Dense(Cholesky<f64, Dyn>),
    Woodbury { core: Cholesky<f64, Dyn>, e_inv: DVector<f64> },
}

struct Mz<'a> {
    wp: &'a DMatrix<f64>,
    g: DVector<f64>,
    e: DVector<f64>,
    factor: MzFactor,
}

impl<'a> Mz<'a> {
    fn factor(wp: &'a DMatrix<f64>, g: DVector<f64>, e: DVector<f64>) -> Result<Self> {
        let (n, kp) = (wp.nrows(), wp.ncols());
        if kp == 0 {
            return Ok(Self { wp, g, e: e.clone(), factor: MzFactor::Diagonal(e) });
        }
        let use_woodbury = 2 * kp <= n;
        let mut ridge = 0.0f64;
        for attempt in 0..4 {
            let factor = if use_woodbury {
                let e_inv = e.map(|v| 1.0 / v);
                let mut wr = wp.clone();
                for j in 0..kp {
                    let mut col = wr.column_mut(j);
                    for i in 0..n {
                        col[i] *= e_inv[i].sqrt();
                    }
                }
                let mut core = wr.tr_mul(&wr);
                for j in 0..kp {
                    core[(j, j)] += 1.0 / g[j] + ridge;
                }
                Cholesky::new(core).map(|c| MzFactor::Woodbury { core: c, e_inv })
            } else {
                let mut ws = wp.clone();
                for j in 0..kp {
                    ws.column_mut(j).scale_mut(g[j].sqrt());
                }
                let wst = ws.transpose();
                let mut m = wst.tr_mul(&wst);
                for i in 0..n {
                    m[(i, i)] += e[i] + ridge;
                }
                Cholesky::new(m).map(MzFactor::Dense)
            };
            if let Some(factor) = factor {
                return Ok(Self { wp, g, e, factor });
            }
            let scale = g.amax().max(e.amax()).max(1.0);
            ridge = if attempt == 0 { 1e-12 * scale } else { ridge * 1e4 };
        }
        Err(Error::InvalidInput("normal equations not positive definite".into()))
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.e.component_mul(v);
        if self.wp.ncols() > 0 {
            let t = self.g.component_mul(&self.wp.tr_mul(v));
            out += self.wp * t;
        }
        out
    }

    fn solve_once(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            MzFactor::Diagonal(e) => r.component_div(e),
            MzFactor::Dense(chol) => chol.solve(r),
            MzFactor::Woodbury { core, e_inv } => {
                let t1 = r.component_mul(e_inv);
                let t2 = self.wp.tr_mul(&t1);
                let t3 = core.solve(&t2);
                let t4 = self.wp * t3;
                t1 - t4.component_mul(e_inv)
            }
        }
    }

    /// Solve with iterative refinement; the scaling spans many orders of
    /// magnitude near convergence and a bare solve loses feasibility digits.
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_once(r);
        if matches!(self.factor, MzFactor::Diagonal(_)) {
            return x;
        }
        for _ in 0..2 {
            let resid = r - self.apply(&x);
            if resid.amax() <= 1e-14 * r.amax().max(1.0) {
                break;
            }
            x += self.solve_once(&resid);
        }
        x
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            a = a.min(-v[i] / dv[i]);
        }
    }
    a
}

/// Solve `min_t sum_i |y_i - (W t)_i| + sum_j penalty_j |t_j|`.
pub(crate) fn solve_l1_lp(
    w: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &DVector<f64>,
    cfg: &IpmConfig,
) -> Result<LpSolution> {
    let (n, k) = (w.nrows(), w.ncols());
    assert_eq!(y.len(), n);
    assert_eq!(penalty.len(), k);
    if penalty.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidInput("negative penalty weight".into()));
    }

    let free_cols: Vec<usize> = (0..k).filter(|&j| penalty[j] == 0.0).collect();
    let pen_cols: Vec<usize> = (0..k).filter(|&j| penalty[j] > 0.0).collect();
    let (kf, kp) = (free_cols.len(), pen_cols.len());
    let take = |ids: &[usize]| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, ids.len());
        for (slot, &j) in ids.iter().enumerate() {
            m.set_column(slot, &w.column(j).into_owned());
        }
        m
    };
    let wf = take(&free_cols);
    let wp = take(&pen_cols);
    let wpen = DVector::from_iterator(kp, pen_cols.iter().map(|&j| penalty[j]));
    let nz = 2 * kp + 2 * n;

    // z layout: [tP+ (kp) | tP- (kp) | u+ (n) | u- (n)]; c_z accordingly.
    let mut cz = DVector::from_element(nz, 1.0);
    for j in 0..kp {
        cz[j] = wpen[j];
        cz[kp + j] = wpen[j];
    }
    let az_mul = |z: &DVector<f64>| -> DVector<f64> {
        let zs = z.as_slice();
        let mut out = DVector::zeros(n);
        if kp > 0 {
            let t = DVector::from_fn(kp, |j, _| zs[j] - zs[kp + j]);
            out = &wp * t;
        }
        for i in 0..n {
            out[i] += zs[2 * kp + i] - zs[2 * kp + n + i];
        }
        out
    };
    let azt_mul = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(nz);
        if kp > 0 {
            let wt = wp.tr_mul(v);
            for j in 0..kp {
                out[j] = wt[j];
                out[kp + j] = -wt[j];
            }
        }
        for i in 0..n {
            out[2 * kp + i] = v[i];
            out[2 * kp + n + i] = -v[i];
        }
        out
    };

    // Starting point. The free coefficients start at a ridge least-squares
    // fit; the slack blocks start from the Mehrotra heuristic applied to the
    // remaining residual.
    let mut f = DVector::zeros(kf);
    if kf > 0 {
        let mut gram = wf.tr_mul(&wf);
        let ridge = 1e-10 * (gram.diagonal().amax().max(1.0));
        for j in 0..kf {
            gram[(j, j)] += ridge;
        }
        if let Some(chol) = Cholesky::new(gram) {
            f = chol.solve(&wf.tr_mul(y));
        }
    }
    let resid0 = y - &wf * &f;
    let aat = Mz::factor(&wp, DVector::from_element(kp, 2.0), DVector::from_element(n, 2.0))?;
    let mut z = azt_mul(&aat.solve(&resid0));
    let mut wdual = aat.solve(&az_mul(&cz));
    let mut s = &cz - azt_mul(&wdual);

    let dp = (-1.5 * z.min()).max(0.0);
    let dd = (-1.5 * s.min()).max(0.0);
    z.add_scalar_mut(dp);
    s.add_scalar_mut(dd);
    let mut zs = z.dot(&s);
    if zs <= 0.0 {
        z.add_scalar_mut(1.0);
        s.add_scalar_mut(1.0);
        zs = z.dot(&s);
    }
    z.add_scalar_mut(0.5 * zs / s.sum());
    s.add_scalar_mut(0.5 * zs / z.sum());

    let bnorm = y.amax().max(1.0);
    let cnorm = 1.0f64;

    // Track the best iterate seen; the endgame can lose feasibility when the
    // scaling matrix becomes extremely ill-conditioned.
    let mut best_score = f64::INFINITY;
    let mut best_z = z.clone();
    let mut best_f = f.clone();
    let mut best_gap = f64::INFINITY;
    let mut iterations = 0;

    let extract = |zv: &DVector<f64>, fv: &DVector<f64>| -> DVector<f64> {
        let mut coef = DVector::zeros(k);
        for (slot, &j) in free_cols.iter().enumerate() {
            coef[j] = fv[slot];
        }
        for (slot, &j) in pen_cols.iter().enumerate() {
            coef[j] = zv[slot] - zv[kp + slot];
        }
        coef
    };

    for iter in 0..cfg.max_iter {
        iterations = iter;
        let rp = y - &wf * &f - az_mul(&z);
        let rdf = -wf.tr_mul(&wdual);
        let rdz = &cz - azt_mul(&wdual) - &s;
        let obj_p = cz.dot(&z);
        let obj_d = y.dot(&wdual);
        let rel_gap = (obj_p - obj_d).abs() / (1.0 + obj_p.abs());
        let feas_p = rp.amax() / bnorm;
        let feas_d = rdz.amax().max(rdf.amax()) / cnorm;
        let score = rel_gap.max(feas_p).max(feas_d);
        if score < best_score {
            best_score = score;
            best_z.copy_from(&z);
            best_f.copy_from(&f);
            best_gap = rel_gap;
        }
        if best_score <= cfg.tol {
            return Ok(LpSolution {
                coef: extract(&best_z, &best_f),
                iterations: iter,
                converged: true,
                rel_gap: best_gap,
            });
        }
        // Numerical stall: feasibility degraded far beyond the best iterate
        // after the gap was already small; no further digits can be gained.
        if score > 1e3 * best_score && best_score < 1e-6 {
            break;
        }

        let mu = z.dot(&s) / nz as f64;
        let d = z.component_div(&s);
        let g = DVector::from_fn(kp, |j, _| d[j] + d[kp + j]);
        let e = DVector::from_fn(n, |i, _| d[2 * kp + i] + d[2 * kp + n + i]);
        let mz = Mz::factor(&wp, g, e)?;

        // Schur pieces for the free block: X = Mz^{-1} W_F, H = W_F' X.
        let (x_cols, h_chol) = if kf > 0 {
            let mut x = DMatrix::zeros(n, kf);
            for j in 0..kf {
                x.set_column(j, &mz.solve(&wf.column(j).into_owned()));
            }
            let mut h = wf.tr_mul(&x);
            let mut chol = Cholesky::new(h.clone());
            if chol.is_none() {
                let ridge = 1e-12 * h.diagonal().amax().max(1.0);
                for j in 0..kf {
                    h[(j, j)] += ridge;
                }
                chol = Cholesky::new(h);
            }
            let chol = chol.ok_or_else(|| {
                Error::InvalidInput("free-block Schur complement not positive definite".into())
            })?;
            (Some(x), Some(chol))
        } else {
            (None, None)
        };

        // Direction for given complementarity residual rc.
        let solve_dir = |rc: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
            let rc_over_s = rc.component_div(&s);
            let v1 = d.component_mul(&rdz) - &rc_over_s;
            let rhs1 = &rp + az_mul(&v1);
            let v = mz.solve(&rhs1);
            let (df, dwv) = if let (Some(x), Some(h)) = (&x_cols, &h_chol) {
                let target = wf.tr_mul(&v) - &rdf;
                let df = h.solve(&target);
                let dwv = v - x * &df;
                (df, dwv)
            } else {
                (DVector::zeros(0), v)
            };
            let ds = &rdz - azt_mul(&dwv);
            let dz = rc_over_s - d.component_mul(&ds);
            (df, dwv, dz, ds)
        };

        // Affine (predictor) direction: rc = -z.*s.
        let rc_aff = DVector::from_fn(nz, |i, _| -z[i] * s[i]);
        let (_, _, dz_aff, ds_aff) = solve_dir(&rc_aff);
        let ap_aff = max_step(z.as_slice(), dz_aff.as_slice()).min(1.0);
        let ad_aff = max_step(s.as_slice(), ds_aff.as_slice()).min(1.0);
        let mu_aff = (&z + &dz_aff * ap_aff).dot(&(&s + &ds_aff * ad_aff)) / nz as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector with centering.
        let rc =
            DVector::from_fn(nz, |i, _| sigma * mu - z[i] * s[i] - dz_aff[i] * ds_aff[i]);
        let (df, dw, dz, ds) = solve_dir(&rc);

        let eta = if mu < 1e-3 { 0.9995 } else { 0.995 };
        let ap = (eta * max_step(z.as_slice(), dz.as_slice())).min(1.0);
        let ad = (eta * max_step(s.as_slice(), ds.as_slice())).min(1.0);
        if !ap.is_finite() || !ad.is_finite() || ap <= 0.0 || ad <= 0.0 {
            break;
        }
        z += dz * ap;
        f += df * ap;
        s += ds * ad;
        wdual += dw * ad;
    }

    Ok(LpSolution {
        coef: extract(&best_z, &best_f),
        iterations,
        converged: best_score <= cfg.tol,
        rel_gap: best_gap,
    })
}
