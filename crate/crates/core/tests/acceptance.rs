//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use pfst_core::incremental::{augmented_delta, ScatterContext, SelectionState};
use pfst_core::io::{CsvOptions, LabelColumn};
use pfst_core::pfst::pfst_run;
use pfst_core::run::{run_select, select_on, Source};
use pfst_core::scatter::ols_sse;
use pfst_core::synth::{generate, SyntheticSpec};
use pfst_core::{
    compute_class_stats, forward_select, trace_criterion_direct, trace_criterion_mahalanobis, Method, PfstConfig, RunSpec,
    StopRule, DEFAULT_SINGULAR_TOL as TOL,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1001);
    let mut worst: f64 = 0.0;
    let trials = 200;
    for _ in 0..trials {
        let classes = r.random_range(2..=5);
        let p = r.random_range(1..=20);
        let n = r.random_range((p + classes + 2 * classes).max(2 * classes)..=200);
        let data = random_dataset(&mut r, n, p, classes);
        let stats = compute_class_stats(&data).map_err(|e| e.to_string())?;
        let k = r.random_range(1..=p);
        let subset = rand::seq::index::sample(&mut r, p, k).into_vec();
        let a = trace_criterion_direct(&data, &subset, TOL).map_err(|e| e.to_string())?;
        let b = trace_criterion_mahalanobis(&data, &stats, &subset, TOL).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(b, a));
    }
    ensure(worst <= 1e-10, || format!("max relative error {worst:.3e}"))?;
    within(started.elapsed(), 5.0)?;
    Ok(format!("{trials} instances, max relative error {worst:.2e}, {:.2}s", started.elapsed().as_secs_f64()))
}

fn incremental_oracle() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1002);
    let (mut worst, mut worst_residual): (f64, f64) = (0.0, 0.0);
    let mut trials = 0;
    while trials < 1200 {
        let classes = r.random_range(2..=5);
        let p = r.random_range(3..=24);
        let n = r.random_range(60..=200);
        let data = random_dataset(&mut r, n, p, classes);
        let ctx = ScatterContext::from_dataset(&data, TOL).map_err(|e| e.to_string())?;
        let k = r.random_range(1..p.min(21));
        let order = rand::seq::index::sample(&mut r, p, p).into_vec();
        let mut state = SelectionState::from_subset(&ctx, &order[..k]).map_err(|e| e.to_string())?;
        // a short random walk of committed updates, checking every delta on the way
        for _ in 0..4 {
            let t_r = direct(&data, state.subset());
            let outside: Vec<usize> = (0..p).filter(|f| !state.contains(*f)).collect();
            let add = !outside.is_empty() && (state.len() < 2 || (r.random_bool(0.5) && state.len() < 20));
            if add {
                let f = outside[r.random_range(0..outside.len())];
                let cand = state.evaluate_add(&ctx, f).map_err(|e| e.to_string())?;
                let mut with = state.subset().to_vec();
                with.push(f);
                worst = worst.max(rel_err(t_r + cand.delta, direct(&data, &with)));
                state.commit_add(&ctx, &cand).map_err(|e| e.to_string())?;
            } else {
                let f = state.subset()[r.random_range(0..state.len())];
                let change = state.evaluate_remove(f).map_err(|e| e.to_string())?;
                let without: Vec<usize> = state.subset().iter().copied().filter(|&g| g != f).collect();
                worst = worst.max(rel_err(t_r + change, direct(&data, &without)));
                state.commit_remove(&ctx, f).map_err(|e| e.to_string())?;
            }
            worst_residual = worst_residual.max(state.identity_residual());
            trials += 1;
        }
    }
    ensure(worst <= 1e-8, || format!("max relative error {worst:.3e}"))?;
    ensure(worst_residual <= 1e-8, || format!("identity residual {worst_residual:.3e}"))?;
    within(started.elapsed(), 30.0)?;
    Ok(format!(
        "{trials} trials, max relative error {worst:.2e}, max residual {worst_residual:.2e}, {:.2}s",
        started.elapsed().as_secs_f64()
    ))
}

fn lu_trace(s: &DMatrix<f64>, devs: &DMatrix<f64>, w: &[f64]) -> f64 {
    let sb = devs.transpose() * DMatrix::from_diagonal(&DVector::from_row_slice(w)) * devs;
    s.clone().lu().solve(&sb).map_or(f64::NAN, |m| m.trace())
}

fn sign_law() -> Outcome {
    let mut r = rng(1003);
    let (mut violations, mut pos, mut neg, mut mismatch): (usize, usize, usize, f64) = (0, 0, 0, 0.0);
    let tol = 1e-10;
    let mut check = |schur: f64, delta: f64| {
        if schur > tol {
            pos += 1;
            violations += usize::from(delta < -1e-10);
        } else if schur < -tol {
            neg += 1;
            violations += usize::from(delta >= 1e-10);
        }
    };

    // scatter matrices from data: the Schur complement is positive
    for _ in 0..600 {
        let p = r.random_range(2..=12);
        let (n, classes) = (r.random_range(40..=150), r.random_range(2..=4));
        let data = random_dataset(&mut r, n, p, classes);
        let ctx = ScatterContext::from_dataset(&data, TOL).map_err(|e| e.to_string())?;
        let k = r.random_range(1..p);
        let order = rand::seq::index::sample(&mut r, p, k + 1).into_vec();
        let state = SelectionState::from_subset(&ctx, &order[..k]).map_err(|e| e.to_string())?;
        let cand = state.evaluate_add(&ctx, order[k]).map_err(|e| e.to_string())?;
        check(cand.schur, cand.delta);
    }
    // symmetric matrices with the Schur complement pushed to either sign
    for _ in 0..1400 {
        let k = r.random_range(1..8);
        let classes = r.random_range(2..5);
        let a = DMatrix::from_fn(k + 3, k, |_, _| normal(&mut r));
        let s_r = a.tr_mul(&a) + DMatrix::identity(k, k) * 0.1;
        let s_inv = s_r.clone().try_inverse().ok_or("singular draw")?;
        let v = DVector::from_fn(k, |_, _| normal(&mut r));
        let base = v.dot(&(&s_inv * &v));
        let offset = 0.05 + r.random::<f64>();
        let u = if r.random_bool(0.5) { base + offset } else { base - offset };
        let devs = DMatrix::from_fn(classes, k, |_, _| normal(&mut r));
        let dev_f: Vec<f64> = (0..classes).map(|_| normal(&mut r)).collect();
        let w: Vec<f64> = (0..classes).map(|_| r.random_range(2..40) as f64).collect();
        let (schur, delta, _) = augmented_delta(&s_inv, &devs, &w, &v, u, &dev_f);

        let mut big = s_r.clone().insert_row(k, 0.0).insert_column(k, 0.0);
        for i in 0..k {
            big[(i, k)] = v[i];
            big[(k, i)] = v[i];
        }
        big[(k, k)] = u;
        let mut big_devs = devs.clone().insert_column(k, 0.0);
        for i in 0..classes {
            big_devs[(i, k)] = dev_f[i];
        }
        let oracle = lu_trace(&big, &big_devs, &w) - lu_trace(&s_r, &devs, &w);
        mismatch = mismatch.max((delta - oracle).abs() / (1.0 + oracle.abs()));
        check(schur, delta);
    }
    ensure(violations == 0, || format!("{violations} sign violations"))?;
    ensure(pos >= 1000 && neg >= 500, || format!("too few trials: {pos} positive, {neg} negative"))?;
    ensure(mismatch <= 1e-7, || format!("delta disagrees with LU oracle by {mismatch:.3e}"))?;
    Ok(format!("{} trials ({pos} positive, {neg} negative Schur complement), 0 violations", pos + neg))
}

fn sse_never_increases() -> Outcome {
    let mut r = rng(1004);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    let trials = 1000;
    for _ in 0..trials {
        let n = r.random_range(10..=80);
        let k = r.random_range(1..n / 2);
        let extra = r.random_range(1..=(n - k - 1).min(10));
        let x = DMatrix::from_fn(n, k, |_, _| normal(&mut r));
        let t = DMatrix::from_fn(n, extra, |_, _| normal(&mut r));
        let y = DVector::from_fn(n, |_, _| normal(&mut r) * 3.0);
        let mut u = x.clone().resize_horizontally(k + extra, 0.0);
        u.view_mut((0, k), (n, extra)).copy_from(&t);
        let sse_x = ols_sse(&x, &y, TOL).map_err(|e| e.to_string())?;
        let sse_u = ols_sse(&u, &y, TOL).map_err(|e| e.to_string())?;
        let excess = sse_u - sse_x;
        worst = worst.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} regressions grew SSE (worst {worst:.3e})"))?;
    Ok(format!("{trials} regressions, 0 violations, largest change {worst:.2e}"))
}

fn pfst_equals_forward() -> Outcome {
    let mut r = rng(1005);
    let instances = 30;
    for i in 0..instances {
        let p = r.random_range(3..=25);
        let (n, classes) = (r.random_range(80..=250), r.random_range(2..=5));
        let data = random_dataset(&mut r, n, p, classes);
        let ctx = ScatterContext::from_dataset(&data, TOL).map_err(|e| e.to_string())?;
        let alpha = 0.02;
        let config = PfstConfig {
            alpha,
            beta: 0.0,
            gamma: 0.0,
            blocks: Some(1),
            max_ref: 0,
            seed: i,
            ..PfstConfig::default()
        };
        let pfst = pfst_run(&ctx, &config).map_err(|e| e.to_string())?;
        let fwd = forward_select(&ctx, &StopRule::new(alpha, 0.0)).map_err(|e| e.to_string())?;
        ensure(pfst.selected == fwd.selected, || {
            format!("instance {i}: pfst {:?} vs forward {:?}", pfst.selected, fwd.selected)
        })?;
    }
    Ok(format!("{instances} instances, identical selected sets"))
}

fn breast_cancer_spec() -> RunSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/breast_cancer.csv");
    let source = Source::Csv {
        path,
        options: CsvOptions::new(LabelColumn::Name("diagnosis".into())),
    };
    let mut spec = RunSpec::new(source, Method::Pfst);
    spec.params.alpha = 0.05;
    spec.params.gamma = 0.05;
    spec.params.beta = 0.01;
    spec.params.standardize = true;
    spec.params.blocks = Some(1);
    spec.params.max_ref = 1;
    spec.cv_folds = Some(5);
    spec
}

fn breast_cancer() -> Outcome {
    let started = Instant::now();
    let doc = run_select(&breast_cancer_spec()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let k = doc.selection.selected.len();
    let err = doc.cv.as_ref().ok_or("no cross-validation result")?.mean_error;
    let summary = format!("{k} features {:?}, 5-fold error {err:.4}, {:.3}s", doc.selected_names, elapsed.as_secs_f64());
    ensure((2..=6).contains(&k), || format!("{k} features selected; {summary}"))?;
    ensure(err <= 0.08, || format!("error {err:.4} > 0.08; {summary}"))?;
    within(elapsed, 5.0)?;
    Ok(summary)
}

fn synthetic_instance() -> SyntheticSpec {
    SyntheticSpec {
        n: 1000,
        p: 500,
        classes: 2,
        informative: 5,
        seed: 7,
        ..SyntheticSpec::default()
    }
}

fn relative_speed() -> Outcome {
    let syn = generate(&synthetic_instance()).map_err(|e| e.to_string())?;
    let time = |method: Method| -> Result<(Vec<f64>, Vec<usize>), String> {
        let spec = RunSpec {
            cv_folds: None,
            ..RunSpec::new(Source::Synthetic(synthetic_instance()), method)
        };
        let mut seconds = Vec::new();
        let mut selected = Vec::new();
        for _ in 0..3 {
            let started = Instant::now();
            let doc = select_on(&syn.data, "synthetic", &spec).map_err(|e| e.to_string())?;
            seconds.push(started.elapsed().as_secs_f64());
            selected = doc.selection.selected;
        }
        Ok((seconds, selected))
    };
    let (pfst_s, pfst_sel) = time(Method::Pfst)?;
    let (back_s, _) = time(Method::Backward)?;
    let pfst_med = pfst_core::run::median(&pfst_s).unwrap_or(f64::NAN);
    let back_med = pfst_core::run::median(&back_s).unwrap_or(f64::NAN);
    let recall = syn.recall(&pfst_sel);
    let summary = format!("pfst median {pfst_med:.4}s, backward median {back_med:.4}s, recall {recall}/5");
    ensure(pfst_med < back_med, || format!("pfst not faster; {summary}"))?;
    ensure(recall >= 4, || format!("recall too low; {summary}"))?;
    Ok(summary)
}

fn determinism() -> Outcome {
    let spec = breast_cancer_spec();
    let a = run_select(&spec).map_err(|e| e.to_string())?;
    let b = run_select(&spec).map_err(|e| e.to_string())?;
    let key = |d: &pfst_core::ReportDocument| {
        serde_json::to_string(&(&d.selection.selected, &d.selected_names, &d.cv.as_ref().map(|c| &c.fold_errors)))
            .expect("serializable")
    };
    let (ka, kb) = (key(&a), key(&b));
    ensure(ka == kb, || format!("{ka} != {kb}"))?;
    Ok(format!("identical selection and fold errors: {ka}"))
}

fn scale_invariance() -> Outcome {
    let syn = generate(&synthetic_instance()).map_err(|e| e.to_string())?;
    let spec = RunSpec {
        cv_folds: None,
        ..RunSpec::new(Source::Synthetic(synthetic_instance()), Method::Pfst)
    };
    let base = select_on(&syn.data, "base", &spec).map_err(|e| e.to_string())?.selection.selected;
    let mut columns = vec![0, 250, 499];
    columns.extend(&syn.informative);
    for &col in &columns {
        let mut scaled = syn.data.features().clone();
        scaled.column_mut(col).scale_mut(1000.0);
        let scaled = syn.data.with_features(scaled).map_err(|e| e.to_string())?;
        let other = select_on(&scaled, "scaled", &spec).map_err(|e| e.to_string())?.selection.selected;
        ensure(other == base, || format!("column {col}: {other:?} vs {base:?}"))?;
    }
    Ok(format!("{} rescaled columns, selected set {base:?} unchanged", columns.len()))
}

fn main() {
    let criteria: [Check; 9] = [
        ("criterion oracle equivalence", oracle_equivalence),
        ("incremental update oracle", incremental_oracle),
        ("sign of the criterion change", sign_law),
        ("appended regressors never raise SSE", sse_never_increases),
        ("one-block PFST equals forward selection", pfst_equals_forward),
        ("breast cancer selection and error", breast_cancer),
        ("PFST faster than backward on p = 500", relative_speed),
        ("select is deterministic", determinism),
        ("selection ignores column scale", scale_invariance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
