//! End-to-end pipeline checks: double selection, degenerate-control edge
//! cases, and stage-labeled failures.

use nalgebra::{DMatrix, DVector};
use orthomed::data::{RngStream, Sample};
use orthomed::lad::lad_refit;
use orthomed::ortho::{double_selection, run_algorithm, Algorithm, OrthoConfig};
use orthomed::sim::{compile_design, run_replication, DesignSpec, Method, ThetaProfile};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[test]
fn double_selection_rejection_calibrated() {
    // Post-double-selection 5% test stays near nominal size on the
    // mid-signal design.
    let spec = DesignSpec {
        n: 250,
        p: 300,
        rho: 0.5,
        r2y: 0.5,
        r2d: 0.5,
        alpha0: 0.5,
        profile: ThetaProfile::ExactSparse10,
        seed: 4242,
    };
    let design = compile_design(&spec).unwrap();
    let cfg = OrthoConfig { bandwidth_scale: 2.5, lasso_rounds: 15, ..OrthoConfig::default() };
    let rejections: u32 = (0..200u64)
        .into_par_iter()
        .map(|rep| run_replication(&design, rep, &[Method::DoubleSel], &cfg)[0].reject05 as u32)
        .sum();
    let rate = rejections as f64 / 200.0;
    assert!(
        (0.01..=0.10).contains(&rate),
        "double-selection rejection rate {rate} outside [0.01, 0.10]"
    );
}

#[test]
fn double_selection_empty_supports_is_plain_lad() {
    // Pure-noise controls and a huge gamma force both selections empty; the
    // double-selection estimate is then the LAD of y on d alone.
    let n = 60;
    let mut rng = RngStream::new(51, 0).rng();
    let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = DMatrix::from_fn(n, 5, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| 2.0 * d[i] + rng.sample::<f64, _>(StandardNormal));
    let sample = Sample::new(y, d, x).unwrap();
    let cfg = OrthoConfig {
        // tiny gamma inflates both penalty levels so nothing is selected
        gamma: Some(1e-6),
        ..OrthoConfig::default()
    };
    let result = double_selection(&sample, &cfg, &mut RngStream::new(52, 0).rng()).unwrap();
    assert!(result.diagnostics.union_support.as_ref().unwrap().is_empty());
    let plain = lad_refit(&sample, &[], true).unwrap();
    assert_eq!(result.alpha_check, plain.alpha);
}

#[test]
fn double_selection_union_deduplicates() {
    let spec = DesignSpec {
        n: 120,
        p: 30,
        rho: 0.5,
        r2y: 0.6,
        r2d: 0.6,
        alpha0: 0.5,
        profile: ThetaProfile::ExactSparse10,
        seed: 77,
    };
    let design = compile_design(&spec).unwrap();
    let sample = orthomed::sim::generate_compiled(&design, &mut RngStream::new(77, 0).rng());
    let cfg = OrthoConfig::default();
    let result = double_selection(&sample, &cfg, &mut RngStream::new(78, 0).rng()).unwrap();
    let union = result.diagnostics.union_support.unwrap();
    let mut sorted = union.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(union, sorted, "union support must be sorted and duplicate-free");
}

#[test]
fn union_too_large_aborts() {
    // Feed step (iii) synthetic nuisance parts whose supports union to more
    // than half the sample size.
    let n = 30;
    let p = 40;
    let mut rng = RngStream::new(61, 0).rng();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| d[i] + rng.sample::<f64, _>(StandardNormal));
    let sample = Sample::new(y, d, x).unwrap();
    let cfg = OrthoConfig::default();
    let mut parts = orthomed::ortho::fit_stage_nuisance(
        &sample,
        &cfg,
        &mut RngStream::new(62, 0).rng(),
    )
    .unwrap();
    parts.pen.support = (0..10).collect();
    parts.lasso.support = (5..20).collect();
    match orthomed::ortho::assemble_inference(&sample, &cfg, Algorithm::Alg3, &parts) {
        Err(e) => {
            let msg = e.to_string();
            assert!(msg.contains("union too large"), "unexpected error: {msg}");
            assert!(msg.contains("step (iii)"), "stage label missing: {msg}");
        }
        Ok((r, _)) => panic!(
            "expected UnionTooLarge, got union of {:?}",
            r.diagnostics.union_support.map(|u| u.len())
        ),
    }
}

#[test]
fn intercept_only_controls_degenerate_to_classical_lad() {
    // With an all-ones control column and nothing else, the pipeline reduces
    // to classical LAD inference with instrument d - dbar.
    let n = 200;
    let mut rng = RngStream::new(71, 0).rng();
    let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) + 1.0);
    let x = DMatrix::from_element(n, 1, 1.0);
    let y = DVector::from_fn(n, |i, _| 0.5 * d[i] + 0.3 + rng.sample::<f64, _>(StandardNormal));
    let sample = Sample::new(y, d.clone(), x).unwrap();
    let cfg = OrthoConfig::default();
    let (result, outputs) = orthomed::ortho::run_algorithm_detailed(
        &sample,
        &cfg,
        &mut RngStream::new(72, 0).rng(),
    )
    .unwrap();
    // instrument is the centered treatment
    let dbar = d.mean();
    let expect = d.add_scalar(-dbar);
    let diff = (&outputs.vhat - &expect).amax();
    assert!(diff < 1e-8, "instrument differs from centered d by {diff}");
    assert!((result.alpha_check - 0.5).abs() < 3.0 * result.sigma_hat / (n as f64).sqrt());
}

#[test]
fn stage_labels_propagate() {
    // A treatment perfectly spanned by the controls must fail in step (ii)
    // with the instrument stage label.
    let n = 50;
    let mut rng = RngStream::new(81, 0).rng();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = DMatrix::from_columns(&[DVector::from_element(n, 1.0), z.clone()]);
    let d = &z * 2.0;
    let y = DVector::from_fn(n, |i, _| d[i] + rng.sample::<f64, _>(StandardNormal));
    let sample = Sample::new(y, d, x).unwrap();
    let cfg = OrthoConfig::default();
    match run_algorithm(&sample, &cfg, &mut RngStream::new(82, 0).rng()) {
        Err(e) => {
            let msg = e.to_string();
            assert!(msg.contains("instrument"), "message: {msg}");
        }
        Ok(r) => panic!("expected instrument degeneracy, got alpha {}", r.alpha_check),
    }
}

#[test]
fn one_step_runs_end_to_end() {
    let spec = DesignSpec {
        n: 250,
        p: 100,
        rho: 0.5,
        r2y: 0.5,
        r2d: 0.5,
        alpha0: 0.5,
        profile: ThetaProfile::ExactSparse10,
        seed: 91,
    };
    let design = compile_design(&spec).unwrap();
    let sample = orthomed::sim::generate_compiled(&design, &mut RngStream::new(91, 0).rng());
    let cfg = OrthoConfig { algorithm: Algorithm::OneStep, ..OrthoConfig::default() };
    let result = run_algorithm(&sample, &cfg, &mut RngStream::new(92, 0).rng()).unwrap();
    assert!(result.alpha_check.is_finite());
    assert!(result.sigma_hat > 0.0);
    assert!(result.interval.contains(result.alpha_check));
    // near the truth at this sample size
    assert!((result.alpha_check - 0.5).abs() < 0.5);
}

#[test]
fn alg2_close_to_alg1_on_shared_sample() {
    let spec = DesignSpec {
        n: 250,
        p: 150,
        rho: 0.5,
        r2y: 0.5,
        r2d: 0.5,
        alpha0: 0.5,
        profile: ThetaProfile::ExactSparse10,
        seed: 101,
    };
    let design = compile_design(&spec).unwrap();
    let cfg = OrthoConfig::default();
    let mut gaps: Vec<f64> = (0..40u64)
        .into_par_iter()
        .map(|rep| {
            let out =
                run_replication(&design, rep, &[Method::OrthoAlg1, Method::OrthoAlg2], &cfg);
            (out[0].alpha_est - out[1].alpha_est).abs() * (250f64).sqrt() / out[0].sigma_est
        })
        .collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(gaps[20] < 0.5, "median scaled Alg1-Alg2 gap {}", gaps[20]);
}
