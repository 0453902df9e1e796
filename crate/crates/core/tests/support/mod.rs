//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the code paths it is used to check.
#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xraycnn_core::nn::layers::*;
use xraycnn_core::nn::network::ForwardTrace;
use xraycnn_core::nn::{self, Head, NetworkSpec, ParamSet};
use xraycnn_core::training::{bce_loss, head_loss, hinge_loss, one_hot, signed_targets};
use xraycnn_core::{Label, Tensor};

pub const FD_STEP: f64 = 1e-4;

/// Relative error with a small absolute floor so vanishing components do not divide by ~0.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` along coordinate `i`.
pub fn central_difference(x: &mut [f64], i: usize, h: f64, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Direct quadruple loop: `out[k,i,j] = b[k] + sum_{c,u,v} x[c,i+u,j+v] * w[k,c,u,v]`.
pub fn brute_conv(x: &[f64], c: usize, h: usize, w: usize, kern: &[f64], kc: usize, ks: usize, bias: &[f64]) -> Vec<f64> {
    let (ho, wo) = (h - ks + 1, w - ks + 1);
    let mut out = vec![0.0; kc * ho * wo];
    for k in 0..kc {
        for i in 0..ho {
            for j in 0..wo {
                let mut acc = bias[k];
                for ch in 0..c {
                    for u in 0..ks {
                        for v in 0..ks {
                            acc += x[ch * h * w + (i + u) * w + (j + v)] * kern[((k * c + ch) * ks + u) * ks + v];
                        }
                    }
                }
                out[k * ho * wo + i * wo + j] = acc;
            }
        }
    }
    out
}

/// O(n^2) Mann-Whitney estimate: fraction of (positive, negative) pairs ordered correctly, ties 1/2.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != Label::Positive {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != Label::Negative {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Accuracy, sensitivity, precision, F1, specificity recounted from raw pairs
/// as exact rationals `(numerator, denominator)`; a zero denominator maps to 0.
pub fn recount_rates(pred: &[Label], actual: &[Label]) -> [(u64, u64); 5] {
    let count = |p: Label, a: Label| pred.iter().zip(actual).filter(|&(&x, &y)| x == p && y == a).count() as u64;
    let tp = count(Label::Positive, Label::Positive);
    let tn = count(Label::Negative, Label::Negative);
    let fp = count(Label::Positive, Label::Negative);
    let fn_ = count(Label::Negative, Label::Positive);
    [
        (tp + tn, pred.len() as u64),
        (tp, tp + fn_),
        (tp, tp + fp),
        (2 * tp, 2 * tp + fp + fn_),
        (tn, tn + fp),
    ]
}

pub fn rational_to_f64((n, d): (u64, u64)) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// ReLU on/off pattern and pool winners: identical signatures on both sides of
/// a finite-difference step mean no kink was crossed.
pub fn kink_signature(trace: &ForwardTrace<f64>) -> Vec<u64> {
    let mut sig = Vec::new();
    for s in &trace.samples {
        for c in &s.conv {
            sig.extend(c.pre_activation.data().iter().map(|&v| (v > 0.0) as u64));
            sig.extend(c.pool.argmax.iter().map(|&i| i as u64));
        }
        for d in &s.dense {
            if let Some(pre) = &d.pre_activation {
                sig.extend(pre.data().iter().map(|&v| (v > 0.0) as u64));
            }
        }
    }
    sig
}

#[derive(Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel: f64,
    pub worst: String,
}

fn flatten(p: &ParamSet<f64>) -> Vec<f64> {
    p.tensors().flat_map(|t| t.data().iter().copied()).collect()
}

/// Compares the backward pass (through the head loss) against central
/// differences of the loss for a batch of one in training mode, re-seeding
/// the dropout RNG on every evaluation so masks stay fixed.
///
/// `sample` limits the check to that many randomly chosen components; `None` checks all.
pub fn network_gradcheck(spec: &NetworkSpec, seed: u64, sample: Option<usize>) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: ParamSet<f64> = nn::init_params(spec, seed).unwrap();
    // lift biases off zero so their gradients are exercised away from symmetric points
    let mut params = params;
    for l in params.layers.iter_mut() {
        for b in l.bias.data_mut() {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    let side = spec.input_side;
    let image = Tensor::from_vec(&[1, 1, side, side], random_vec(&mut rng, side * side, 0.0, 1.0)).unwrap();
    let labels = [if seed.is_multiple_of(2) { Label::Positive } else { Label::Negative }];
    let dropout_seed = seed ^ 0xD0;

    let run = |p: &ParamSet<f64>| {
        let mut r = ChaCha8Rng::seed_from_u64(dropout_seed);
        nn::forward(spec, p, &image, true, &mut r).unwrap()
    };
    let (out, trace) = run(&params);
    let (_, grad) = head_loss(spec.head, &out, &labels).unwrap();
    let analytic = flatten(&nn::backward(spec, &params, &trace, &grad).unwrap());
    let base_sig = kink_signature(&trace);

    let mut x = flatten(&params);
    let indices: Vec<usize> = match sample {
        None => (0..x.len()).collect(),
        Some(n) => (0..n).map(|_| rng.gen_range(0..x.len())).collect(),
    };
    let mut report = GradCheckReport::default();
    for i in indices {
        let mut crossed = false;
        let mut f = |v: &[f64]| {
            let p = ParamSet::from_flat(spec, v).unwrap();
            let (o, t) = run(&p);
            if kink_signature(&t) != base_sig {
                crossed = true;
            }
            head_loss(spec.head, &o, &labels).unwrap().0
        };
        let numeric = central_difference(&mut x, i, FD_STEP, &mut f);
        if crossed {
            report.skipped_kinks += 1;
            continue;
        }
        report.checked += 1;
        let e = rel_err(analytic[i], numeric);
        if e > report.max_rel {
            report.max_rel = e;
            report.worst = format!("component {i}: analytic {} numeric {numeric}", analytic[i]);
        }
    }
    report
}

/// Narrow network used for exhaustive end-to-end gradient checks.
pub fn gradcheck_spec(head: Head) -> NetworkSpec {
    NetworkSpec::with_widths(12, &[3, 4], &[6, 5, 4], head)
}

pub struct OverfitRun {
    pub fit_accuracy: f64,
    pub history: xraycnn_core::RunHistory,
    pub seconds: f64,
}

/// 10 edge-dense positives and 10 smooth negatives at side 32, tiny spec,
/// 200 epochs; accuracy is re-measured in inference mode on the fitted subset.
pub fn overfit_run(head: Head, seed: u64) -> OverfitRun {
    use xraycnn_core::imaging::to_network_input;
    use xraycnn_core::synthetic;
    use xraycnn_core::training::{evaluate, train_fold};
    use xraycnn_core::TrainConfig;

    let start = std::time::Instant::now();
    let ds = synthetic::dataset(10, 32, seed, synthetic::edge_density_image);
    let spec = NetworkSpec::tiny(32, head);
    let cfg = TrainConfig { epochs: 200, seed, ..Default::default() };
    let out = train_fold(&spec, &cfg, &ds.samples, &[], 0).unwrap();
    let x: Vec<Tensor<f32>> = out.fit_indices.iter().map(|&i| to_network_input(&ds.samples[i].image, false).unwrap()).collect();
    let y: Vec<Label> = out.fit_indices.iter().map(|&i| ds.samples[i].label).collect();
    let eval = evaluate(&spec, &out.params, &x, &y).unwrap();
    OverfitRun { fit_accuracy: eval.accuracy, history: out.history, seconds: start.elapsed().as_secs_f64() }
}

/// Pooled accuracy of the four arms (head x Sobel) under 3-fold CV, 20 epochs,
/// on 100 + 100 edge-plus-nuisance images at side 32, identical seeds throughout.
pub fn direction_of_effect(seed: u64) -> Vec<(Head, bool, f64)> {
    use xraycnn_core::evaluation::cross_validate;
    use xraycnn_core::synthetic;
    use xraycnn_core::TrainConfig;

    let ds = synthetic::dataset(100, 32, seed, synthetic::edge_with_nuisance_image);
    let mut out = Vec::new();
    for head in [Head::Sigmoid, Head::Svm] {
        for sobel in [false, true] {
            let spec = NetworkSpec::tiny(32, head);
            let cfg = TrainConfig { epochs: 20, folds: 3, seed, sobel, ..Default::default() };
            let cv = cross_validate(&spec, &cfg, &ds, 3).unwrap();
            out.push((head, sobel, cv.pooled.accuracy));
        }
    }
    out
}

// ---- per-layer finite-difference checks ----

pub fn t(shape: &[usize], d: Vec<f64>) -> Tensor<f64> {
    Tensor::from_vec(shape, d).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max relative error of `analytic` against FD of `f` over all coordinates of `x`.
pub fn check_all(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut x = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let n = central_difference(&mut x, i, FD_STEP, &mut f);
        worst = worst.max(rel_err(analytic[i], n));
    }
    worst
}

/// Worst relative error over input, kernel and bias gradients of random conv instances.
pub fn conv_grad_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (c, h, w, kc) = (2, 6, 7, 3);
        let x = random_vec(&mut rng, c * h * w, -1.0, 1.0);
        let k = random_vec(&mut rng, kc * c * 9, -1.0, 1.0);
        let b = random_vec(&mut rng, kc, -1.0, 1.0);
        let r = random_vec(&mut rng, kc * (h - 2) * (w - 2), -1.0, 1.0);
        let shape_x = [c, h, w];
        let shape_k = [kc, c, 3, 3];
        let g = conv2d_backward(&t(&shape_x, x.clone()), &t(&shape_k, k.clone()), &t(&[kc, h - 2, w - 2], r.clone())).unwrap();
        let obj = |x: &[f64], k: &[f64], b: &[f64]| {
            dot(&conv2d_forward(&t(&shape_x, x.to_vec()), &t(&shape_k, k.to_vec()), &t(&[kc], b.to_vec())).unwrap().into_data(), &r)
        };
        worst = worst
            .max(check_all(&x, g.input.data(), |v| obj(v, &k, &b)))
            .max(check_all(&k, g.kernels.data(), |v| obj(&x, v, &b)))
            .max(check_all(&b, g.bias.data(), |v| obj(&x, &k, v)));
    }
    worst
}

/// Max-pool gradient on distinct values spaced far beyond the FD step, so no window changes winner.
pub fn maxpool_grad_error() -> f64 {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut vals: Vec<f64> = (0..2 * 6 * 6).map(|i| i as f64 * 0.01).collect();
    vals.shuffle(&mut rng);
    let r = random_vec(&mut rng, 2 * 3 * 3, -1.0, 1.0);
    let (_, idx) = maxpool2d_forward(&t(&[2, 6, 6], vals.clone()), 2).unwrap();
    let g = maxpool2d_backward(&idx, &t(&[2, 3, 3], r.clone())).unwrap();
    check_all(&vals, g.data(), |v| dot(maxpool2d_forward(&t(&[2, 6, 6], v.to_vec()), 2).unwrap().0.data(), &r))
}

pub fn dense_grad_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, n) = (5, 7);
    let x = random_vec(&mut rng, n, -1.0, 1.0);
    let wt = random_vec(&mut rng, m * n, -1.0, 1.0);
    let b = random_vec(&mut rng, m, -1.0, 1.0);
    let r = random_vec(&mut rng, m, -1.0, 1.0);
    let g = dense_backward(&t(&[n], x.clone()), &t(&[m, n], wt.clone()), &t(&[m], r.clone())).unwrap();
    let obj = |x: &[f64], w: &[f64], b: &[f64]| {
        dot(dense_forward(&t(&[n], x.to_vec()), &t(&[m, n], w.to_vec()), &t(&[m], b.to_vec())).unwrap().data(), &r)
    };
    check_all(&x, g.input.data(), |v| obj(v, &wt, &b))
        .max(check_all(&wt, g.weights.data(), |v| obj(&x, v, &b)))
        .max(check_all(&b, g.bias.data(), |v| obj(&x, &wt, v)))
}

/// `(relu, dropout with a fixed mask, sigmoid)` worst relative errors.
pub fn activation_grad_errors() -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // keep inputs at least 0.05 away from the ReLU kink
    let x: Vec<f64> = random_vec(&mut rng, 40, 0.05, 2.0)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { v } else { -v })
        .collect();
    let r = random_vec(&mut rng, 40, -1.0, 1.0);
    let g = relu_backward(&t(&[40], x.clone()), &t(&[40], r.clone())).unwrap();
    let relu_err = check_all(&x, g.data(), |v| dot(relu(&t(&[40], v.to_vec())).data(), &r));

    let mut mrng = ChaCha8Rng::seed_from_u64(9);
    let (_, mask) = dropout(&t(&[40], x.clone()), 0.2, true, &mut mrng).unwrap();
    let g = dropout_backward(&mask, 0.2, &t(&[40], r.clone())).unwrap();
    let dropout_err = check_all(&x, g.data(), |v| {
        let mut mrng = ChaCha8Rng::seed_from_u64(9);
        dot(dropout(&t(&[40], v.to_vec()), 0.2, true, &mut mrng).unwrap().0.data(), &r)
    });

    let s = sigmoid(&t(&[40], x.clone()));
    let analytic: Vec<f64> = s.data().iter().zip(&r).map(|(&y, &ri)| ri * y * (1.0 - y)).collect();
    let sigmoid_err = check_all(&x, &analytic, |v| dot(sigmoid(&t(&[40], v.to_vec())).data(), &r));
    (relu_err, dropout_err, sigmoid_err)
}

/// `(bce, hinge)` worst relative errors over random batches, hinge scores kept off the kink.
pub fn loss_grad_errors() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels = [Label::Positive, Label::Negative, Label::Negative, Label::Positive];
    let (mut bce_worst, mut hinge_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let p = random_vec(&mut rng, 8, 0.05, 0.95);
        let targets = one_hot::<f64>(&labels);
        let (_, g) = bce_loss(&t(&[4, 2], p.clone()), &targets).unwrap();
        bce_worst = bce_worst.max(check_all(&p, g.data(), |v| bce_loss(&t(&[4, 2], v.to_vec()), &targets).unwrap().0));

        let s: Vec<f64> = random_vec(&mut rng, 8, -2.0, 2.0)
            .into_iter()
            .map(|v| if (v.abs() - 1.0).abs() < 0.05 { v * 1.2 } else { v })
            .collect();
        let targets = signed_targets::<f64>(&labels);
        let (_, g) = hinge_loss(&t(&[4, 2], s.clone()), &targets).unwrap();
        hinge_worst = hinge_worst.max(check_all(&s, g.data(), |v| hinge_loss(&t(&[4, 2], v.to_vec()), &targets).unwrap().0));
    }
    (bce_worst, hinge_worst)
}
