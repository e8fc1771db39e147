//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Reference values are computed here, independently of the
//! library code paths under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use defer_lab_core::metrics::evaluation_report;
use defer_lab_core::oracle::minimize_conditional_numeric;
use defer_lab_core::{
    asym_softmax_multi, budgeted_error, clip_estimate, ece, estimate_ova, estimate_ssm, evaluate,
    grad, loss, loss_general, minimize_conditional, sample_synthetic, train, Architecture,
    ConditionalPoint, Decision, EvalReport, ExpertSpec, LossKind, MulticlassLoss, OptimizerKind,
    ProbEstimate, ScoreVector, ScorerModel, SyntheticSpec, TrainConfig,
};

type Outcome = Result<String, String>;

fn run(id: u32, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let result = match (result, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!(
            "runtime {:.2}s exceeds {:.0}s",
            elapsed.as_secs_f64(),
            l.as_secs_f64()
        )),
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!(
        "[{tag}] criterion {id:>2} {title} ({:.2}s): {detail}",
        elapsed.as_secs_f64()
    );
    result.is_ok()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn simplex(rng: &mut ChaCha8Rng, k: usize, lo: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        let eta: Vec<f64> = w.iter().map(|x| x / s).collect();
        if eta.iter().all(|&e| e >= lo) {
            return eta;
        }
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn flat(e: &ProbEstimate) -> Vec<f64> {
    e.class_probs.iter().chain(&e.expert_acc).copied().collect()
}

fn gradient_check(kind: LossKind, m: usize, seed: u64) -> Result<f64, String> {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &k in &[2usize, 5, 10] {
        let mut done = 0;
        while done < 100 {
            let u = uniform(&mut rng, k + m, -4.0, 4.0);
            if matches!(kind, LossKind::Asm | LossKind::AsmMulti) {
                // skip near-ties of the class maximum, where the loss has a kink
                let mut c = u[..k].to_vec();
                c.sort_by(|a, b| b.total_cmp(a));
                if c[0] - c[1] < 1e-3 {
                    continue;
                }
            }
            let y = rng.random_range(0..k);
            let preds: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
            let f = |v: &[f64]| {
                loss(
                    kind,
                    &ScoreVector::new(v.to_vec(), k, m).unwrap(),
                    y,
                    &preds,
                )
                .unwrap()
            };
            let g = grad(kind, &ScoreVector::new(u.clone(), k, m).unwrap(), y, &preds)
                .map_err(|e| e.to_string())?;
            for i in 0..u.len() {
                let mut plus = u.clone();
                let mut minus = u.clone();
                plus[i] += H;
                minus[i] -= H;
                let fd = (f(&plus) - f(&minus)) / (2.0 * H);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
                if rel >= 1e-5 {
                    return Err(format!(
                        "{kind}: K={k} u={u:?} y={y} m={preds:?} component {i}: analytic {} vs fd {fd}",
                        g[i]
                    ));
                }
                worst = worst.max(rel);
            }
            done += 1;
        }
    }
    Ok(worst)
}

fn boundedness_check(cases: usize, m: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_sum = 0.0f64;
    let mut unique = 0usize;
    for _ in 0..cases {
        let k = rng.random_range(2..=10);
        let u = uniform(&mut rng, k + m, -10.0, 10.0);
        let e = asym_softmax_multi(&ScoreVector::new(u.clone(), k, m).unwrap())
            .map_err(|e| e.to_string())?;
        let sum_err = (e.class_probs.iter().sum::<f64>() - 1.0).abs();
        ensure(sum_err < 1e-9, || {
            format!("simplex sum off by {sum_err} at {u:?}")
        })?;
        ensure(
            e.class_probs.iter().all(|v| (0.0..=1.0).contains(v)),
            || format!("class probability outside [0,1] at {u:?}"),
        )?;
        ensure(e.expert_acc.iter().all(|v| (0.0..=1.0).contains(v)), || {
            format!("expert accuracy outside [0,1] at {u:?}")
        })?;
        worst_sum = worst_sum.max(sum_err);
        let top = first_argmax(&u);
        if u.iter().enumerate().all(|(i, &v)| i == top || v < u[top]) {
            unique += 1;
            let out = flat(&e);
            ensure(first_argmax(&out) == top, || {
                format!("argmax moved from {top} for {u:?} -> {out:?}")
            })?;
        }
    }
    Ok(format!(
        "{cases} inputs, worst sum error {worst_sum:.1e}, argmax preserved on {unique}/{unique} unique-max inputs"
    ))
}

/// Closed-form minimizer of the asymmetric softmax conditional risk.
fn asm_minimizer(eta: &[f64], p: &[f64]) -> Vec<f64> {
    let max_eta = eta.iter().copied().fold(0.0, f64::max);
    eta.iter()
        .map(|e| e.ln())
        .chain(p.iter().map(|&pj| (pj * (1.0 - max_eta) / (1.0 - pj)).ln()))
        .collect()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Conditional surrogate risk of the single-expert asymmetric softmax loss,
/// in closed form.
fn asm_conditional_risk(u: &[f64], eta: &[f64], p: f64) -> f64 {
    let k = eta.len();
    let a = &u[..k];
    let b = u[k];
    let mx = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + a.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
    let top = first_argmax(a);
    let rest = mx
        + a.iter()
            .enumerate()
            .filter(|&(i, _)| i != top)
            .map(|(_, v)| (v - mx).exp())
            .sum::<f64>()
            .ln();
    let class_part: f64 = eta.iter().zip(a).map(|(e, ay)| e * (lse - ay)).sum();
    class_part + p * softplus(rest - b) + (1.0 - p) * softplus(b - rest)
}

fn excess_01(u: &[f64], eta: &[f64], p: f64) -> f64 {
    let k = eta.len();
    let max_eta = eta.iter().copied().fold(0.0, f64::max);
    let best = max_eta.max(p);
    let top = first_argmax(&u[..k]);
    let defer = u[k] > u[top];
    // risk of the induced decision against the Bayes risk, and the
    // classifier's own excess over the best class
    let induced = if defer { 1.0 - p } else { 1.0 - eta[top] };
    (induced - (1.0 - best)).max(max_eta - eta[top])
}

fn synthetic_spec(n: usize, seed: u64, experts: Vec<ExpertSpec>) -> SyntheticSpec {
    let side = 3.0;
    SyntheticSpec {
        k_classes: 3,
        feature_dim: 2,
        class_means: vec![
            vec![0.0, 0.0],
            vec![side, 0.0],
            vec![side / 2.0, side * 3f64.sqrt() / 2.0],
        ],
        sigma: 1.0,
        experts,
        n,
        seed,
    }
}

fn e2e_config(loss: LossKind, epochs: usize) -> TrainConfig {
    TrainConfig {
        loss,
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.001,
        epochs,
        batch_size: 128,
        weight_decay: 0.0,
        seed: 7,
    }
}

struct RunSummary {
    history: Vec<f64>,
    report: EvalReport,
}

fn train_and_report(
    spec_train: &SyntheticSpec,
    spec_test: &SyntheticSpec,
    cfg: &TrainConfig,
    hidden: usize,
) -> Result<RunSummary, String> {
    let err = |e: defer_lab_core::Error| e.to_string();
    let train_set = sample_synthetic(spec_train).map_err(err)?;
    let test_set = sample_synthetic(spec_test).map_err(err)?;
    let m = spec_train.experts.len();
    let init = ScorerModel::init(Architecture::Mlp { hidden }, 2, 3, m, cfg.seed).map_err(err)?;
    let out = train(&init, &train_set.samples, cfg).map_err(err)?;
    let eval = evaluate(&out.model, cfg.loss, &test_set.samples).map_err(err)?;
    let report = evaluation_report(
        &eval,
        &test_set.samples,
        Some(&test_set.truth),
        &[0.1, 0.2, 0.3],
        15,
    )
    .map_err(err)?;
    Ok(RunSummary {
        history: out.history,
        report,
    })
}

/// Reference for the budget rule: among all subsets of deferred samples of
/// the required size, un-defer the one whose sorted (estimate, index) list is
/// lexicographically smallest.
fn brute_force_budget(
    decisions: &[Decision],
    estimates: &[ProbEstimate],
    labels: &[usize],
    experts: &[Vec<usize>],
    budget: f64,
) -> f64 {
    let n = decisions.len();
    let deferred: Vec<usize> = (0..n).filter(|&i| decisions[i].is_defer()).collect();
    let allowed = (budget * n as f64 + 1e-9).floor() as usize;
    let remove = deferred.len().saturating_sub(allowed);
    let acc = |i: usize| match decisions[i] {
        Decision::Defer(j) => estimates[i].expert_acc[j],
        Decision::Predict(_) => unreachable!(),
    };
    let mut best: Option<(Vec<(f64, usize)>, u32)> = None;
    for mask in 0u32..(1 << deferred.len()) {
        if mask.count_ones() as usize != remove {
            continue;
        }
        let mut key: Vec<(f64, usize)> = (0..deferred.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| (acc(deferred[b]), deferred[b]))
            .collect();
        key.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let better = match &best {
            None => true,
            Some((bk, _)) => {
                key.iter()
                    .zip(bk)
                    .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                    .find(|o| o.is_ne())
                    == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some((key, mask));
        }
    }
    let mask = best.map(|b| b.1).unwrap_or(0);
    let mut wrong = 0usize;
    for i in 0..n {
        let undeferred = deferred
            .iter()
            .position(|&d| d == i)
            .is_some_and(|b| mask >> b & 1 == 1);
        let d = if undeferred {
            Decision::Predict(first_argmax(&estimates[i].class_probs))
        } else {
            decisions[i]
        };
        let ok = match d {
            Decision::Predict(c) => c == labels[i],
            Decision::Defer(j) => experts[i][j] == labels[i],
        };
        wrong += usize::from(!ok);
    }
    wrong as f64 / n as f64
}

fn criterion_gradients() -> Outcome {
    let mut worst = 0.0f64;
    for kind in [LossKind::Asm, LossKind::Ssm, LossKind::Aova, LossKind::Sova] {
        worst = worst.max(gradient_check(kind, 1, 100 + kind as u64)?);
    }
    worst = worst.max(gradient_check(LossKind::AsmMulti, 1, 200)?);
    Ok(format!(
        "5 losses x K in {{2,5,10}} x 100 cases, worst relative error {worst:.1e} (< 1e-5)"
    ))
}

fn criterion_boundedness() -> Outcome {
    boundedness_check(100_000, 1, 2)
}

fn criterion_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<(Vec<f64>, f64)> = (0..1000)
        .map(|_| {
            let k = rng.random_range(2..=4);
            (simplex(&mut rng, k, 0.05), rng.random_range(0.05..0.95))
        })
        .collect();
    let errs: Vec<Result<[f64; 4], String>> = points
        .par_iter()
        .map(|(eta, p)| {
            let c = ConditionalPoint::new(eta.clone(), vec![*p]).map_err(|e| e.to_string())?;
            let truth: Vec<f64> = eta.iter().copied().chain([*p]).collect();
            let reference = asm_minimizer(eta, &[*p]);

            let closed = minimize_conditional(LossKind::Asm, &c).map_err(|e| e.to_string())?;
            let e_closed = linf(&flat(&asym_softmax_multi(&closed).unwrap()), &truth);

            let num = minimize_conditional_numeric(LossKind::Asm, &c).map_err(|e| e.to_string())?;
            let e_num = linf(&centered(num.values()), &centered(&reference));

            let ssm = minimize_conditional(LossKind::Ssm, &c).map_err(|e| e.to_string())?;
            let e_ssm = linf(
                &flat(&estimate_ssm(&ssm).map_err(|e| e.to_string())?),
                &truth,
            );

            let ova = minimize_conditional(LossKind::Aova, &c).map_err(|e| e.to_string())?;
            let e_ova = linf(&estimate_ova(&ova).raw, &truth);
            Ok([e_closed, e_num, e_ssm, e_ova])
        })
        .collect();
    let mut worst = [0.0f64; 4];
    for (r, (eta, p)) in errs.into_iter().zip(&points) {
        let r = r.map_err(|e| format!("eta={eta:?} p={p}: {e}"))?;
        let limits = [1e-4, 1e-3, 1e-3, 1e-3];
        for i in 0..4 {
            ensure(r[i] < limits[i], || {
                format!("eta={eta:?} p={p}: error {:?} exceeds {:?}", r, limits)
            })?;
            worst[i] = worst[i].max(r[i]);
        }
    }
    Ok(format!(
        "1000 points, worst L-inf: closed {:.1e}, numeric vs closed {:.1e}, ssm {:.1e}, aova {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn criterion_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=10);
        let u = uniform(&mut rng, k + 1, -10.0, 10.0);
        let y = rng.random_range(0..k);
        let m = rng.random_range(0..k);
        let sv = ScoreVector::single(u.clone()).unwrap();
        let d_asm = (loss_general(MulticlassLoss::PhiAsm, &sv, y, m).unwrap()
            - loss(LossKind::Asm, &sv, y, &[m]).unwrap())
        .abs();
        let d_ova = (loss_general(MulticlassLoss::PhiOva, &sv, y, m).unwrap()
            - loss(LossKind::Aova, &sv, y, &[m]).unwrap())
        .abs();
        ensure(d_asm < 1e-9 && d_ova < 1e-9, || {
            format!("u={u:?} y={y} m={m}: differences {d_asm:e}, {d_ova:e}")
        })?;
        worst = worst.max(d_asm).max(d_ova);
    }
    Ok(format!("10000 cases, worst difference {worst:.1e}"))
}

fn criterion_regret() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tightest = f64::INFINITY;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=4);
        let eta = simplex(&mut rng, k, 1e-3);
        let p = rng.random_range(0.01..0.99);
        let u = uniform(&mut rng, k + 1, -5.0, 5.0);
        let star = asm_minimizer(&eta, &[p]);
        let surrogate_excess =
            (asm_conditional_risk(&u, &eta, p) - asm_conditional_risk(&star, &eta, p)).max(0.0);
        let lhs = excess_01(&u, &eta, p);
        let rhs = (2.0 * surrogate_excess).sqrt();
        ensure(lhs <= rhs + 1e-9, || {
            format!("eta={eta:?} p={p} u={u:?}: {lhs} > sqrt(2*{surrogate_excess})")
        })?;
        let c = ConditionalPoint::new(eta.clone(), vec![p]).unwrap();
        let lib = defer_lab_core::check_regret_bound(&ScoreVector::single(u.clone()).unwrap(), &c)
            .map_err(|e| e.to_string())?;
        ensure(lib.holds && (lib.lhs - lhs).abs() < 1e-12, || {
            format!("library check disagrees at eta={eta:?} p={p} u={u:?}")
        })?;
        tightest = tightest.min(rhs + 1e-9 - lhs);
    }
    Ok(format!("10000 cases hold, smallest slack {tightest:.2e}"))
}

fn criterion_unbounded() -> Outcome {
    let u = ScoreVector::single(vec![0.0, 0.0, 4f64.ln()]).unwrap();
    let e = estimate_ssm(&u).map_err(|e| e.to_string())?;
    ensure(e.expert_acc[0] == 2.0, || {
        format!("expert_acc = {}", e.expert_acc[0])
    })?;
    ensure(!e.bounded, || "estimate flagged as bounded".into())?;
    let c = clip_estimate(&e);
    ensure(c.expert_acc[0] == 1.0, || {
        format!("clipped = {}", c.expert_acc[0])
    })?;
    Ok("estimate_ssm gives 2.0, clipped to 1.0".into())
}

fn criterion_metrics() -> Outcome {
    let hand = (0.9f64 - 0.75).abs();
    let got = ece(&[0.9; 4], &[true, true, true, false], 15).map_err(|e| e.to_string())?;
    ensure(got == hand, || format!("ece {got} vs hand-computed {hand}"))?;
    ensure((got - 0.15).abs() < 1e-15, || format!("ece {got}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_deferred = 0;
    for case in 0..100 {
        let n = rng.random_range(4..=24);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let mut decisions = Vec::with_capacity(n);
        let mut estimates = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut experts = Vec::with_capacity(n);
        let mut n_def = 0;
        for _ in 0..n {
            let d = if n_def < 12 && rng.random_bool(0.5) {
                n_def += 1;
                Decision::Defer(rng.random_range(0..m))
            } else {
                Decision::Predict(rng.random_range(0..k))
            };
            decisions.push(d);
            // coarse grid so that ties in the estimate occur
            let acc: Vec<f64> = (0..m)
                .map(|_| rng.random_range(0..5) as f64 / 4.0)
                .collect();
            estimates.push(ProbEstimate {
                class_probs: simplex(&mut rng, k, 0.0),
                expert_acc: acc,
                bounded: true,
            });
            labels.push(rng.random_range(0..k));
            experts.push((0..m).map(|_| rng.random_range(0..k)).collect::<Vec<_>>());
        }
        max_deferred = max_deferred.max(n_def);
        for budget in [0.0, 0.1, 0.2, 0.3, 0.5, 1.0] {
            let lib = budgeted_error(&decisions, &estimates, &labels, &experts, budget)
                .map_err(|e| e.to_string())?;
            let oracle = brute_force_budget(&decisions, &estimates, &labels, &experts, budget);
            ensure(lib == oracle, || {
                format!("instance {case} budget {budget}: {lib} vs brute force {oracle}")
            })?;
        }
    }
    Ok(format!(
        "ece = {got}; budgeted_error matches brute force on 100 instances (up to {max_deferred} deferred)"
    ))
}

fn criterion_end_to_end() -> Outcome {
    let experts = vec![ExpertSpec { k: 2, p: 0.75 }];
    let spec_train = synthetic_spec(5000, 11, experts.clone());
    let spec_test = synthetic_spec(5000, 12, experts);
    let bayes = sample_synthetic(&spec_test)
        .map_err(|e| e.to_string())?
        .bayes_risk;
    let (asm, ssm) = std::thread::scope(|s| {
        let a = s.spawn(|| {
            train_and_report(&spec_train, &spec_test, &e2e_config(LossKind::Asm, 200), 32)
        });
        let b = s.spawn(|| {
            train_and_report(&spec_train, &spec_test, &e2e_config(LossKind::Ssm, 200), 32)
        });
        (a.join(), b.join())
    });
    let asm = asm.map_err(|_| "asm run panicked".to_string())??.report;
    let ssm = ssm.map_err(|_| "ssm run panicked".to_string())??.report;
    let summary = format!(
        "bayes {bayes:.4}; asm error {:.4} cov {:.4} ece {:.4}; ssm error {:.4} cov {:.4} ece {:.4}",
        asm.error, asm.coverage, asm.ece, ssm.error, ssm.coverage, ssm.ece
    );
    ensure((asm.error - bayes).abs() <= 0.03, || {
        format!("error gap too large: {summary}")
    })?;
    ensure(asm.ece < 0.05, || format!("asm ece too large: {summary}"))?;
    ensure(asm.coverage >= ssm.coverage, || {
        format!("coverage ordering: {summary}")
    })?;
    ensure(asm.ece <= ssm.ece, || format!("ece ordering: {summary}"))?;
    Ok(summary)
}

fn criterion_multi_expert() -> Outcome {
    let worst_grad = gradient_check(LossKind::AsmMulti, 2, 9)?;
    boundedness_check(100_000, 2, 19)?;

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..1000)
        .map(|_| {
            let k = rng.random_range(2..=4);
            (simplex(&mut rng, k, 0.05), uniform(&mut rng, 2, 0.05, 0.95))
        })
        .collect();
    let errs: Vec<Result<f64, String>> = points
        .par_iter()
        .map(|(eta, p)| {
            let c = ConditionalPoint::new(eta.clone(), p.clone()).map_err(|e| e.to_string())?;
            let u =
                minimize_conditional_numeric(LossKind::AsmMulti, &c).map_err(|e| e.to_string())?;
            let e = asym_softmax_multi(&u).map_err(|e| e.to_string())?;
            let truth: Vec<f64> = eta.iter().chain(p).copied().collect();
            // the numerical minimizer also agrees with the per-expert closed form
            let shift = linf(&centered(u.values()), &centered(&asm_minimizer(eta, p)));
            ensure(shift < 1e-3, || {
                format!("minimizer off closed form by {shift}")
            })?;
            Ok(linf(&flat(&e), &truth))
        })
        .collect();
    let mut worst = 0.0f64;
    for (r, (eta, p)) in errs.into_iter().zip(&points) {
        let r = r.map_err(|e| format!("eta={eta:?} p={p:?}: {e}"))?;
        ensure(r < 1e-3, || {
            format!("eta={eta:?} p={p:?}: recovery error {r}")
        })?;
        worst = worst.max(r);
    }
    Ok(format!(
        "M=2: gradient worst {worst_grad:.1e}; 1e5 bounded inputs; 1000 recoveries, worst {worst:.1e}"
    ))
}

fn criterion_determinism() -> Outcome {
    let experts = vec![ExpertSpec { k: 2, p: 0.75 }, ExpertSpec { k: 1, p: 0.9 }];
    let spec_train = synthetic_spec(1000, 21, experts.clone());
    let spec_test = synthetic_spec(1000, 22, experts);
    for (loss, opt) in [
        (LossKind::AsmMulti, OptimizerKind::Adam),
        (LossKind::AsmMulti, OptimizerKind::SgdCosine),
    ] {
        let mut cfg = e2e_config(loss, 15);
        cfg.optimizer = opt;
        cfg.batch_size = 64;
        let a = train_and_report(&spec_train, &spec_test, &cfg, 16)?;
        let b = train_and_report(&spec_train, &spec_test, &cfg, 16)?;
        let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(bits(&a.history) == bits(&b.history), || {
            format!("{opt:?}: histories differ")
        })?;
        let ja = serde_json::to_string(&a.report).unwrap();
        let jb = serde_json::to_string(&b.report).unwrap();
        ensure(a.report == b.report && ja == jb, || {
            format!("{opt:?}: reports differ")
        })?;
    }
    Ok("two optimizers, history and EvalReport bit-identical across repeated runs".into())
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        run(1, "gradient correctness", secs(10), criterion_gradients),
        run(
            2,
            "asymmetric softmax boundedness",
            secs(5),
            criterion_boundedness,
        ),
        run(3, "minimizer recovery", secs(120), criterion_recovery),
        run(
            4,
            "generic formulation equivalence",
            secs(5),
            criterion_equivalence,
        ),
        run(5, "regret transfer bound", secs(120), criterion_regret),
        run(
            6,
            "symmetric estimator unboundedness",
            None,
            criterion_unbounded,
        ),
        run(7, "metric oracles", None, criterion_metrics),
        run(
            8,
            "end-to-end synthetic trend",
            secs(120),
            criterion_end_to_end,
        ),
        run(9, "multi-expert analogues", None, criterion_multi_expert),
        run(10, "determinism", None, criterion_determinism),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
