//! Independent scalar oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use relaxbayes::rng::seeded;
use relaxbayes::metrics::{self, MetricsReport};
use relaxbayes::nn::{Activation, Batch, ModelSpec};
use relaxbayes::optim::{
    step, step_msharp, FnModel, Noise, OptimizerConfig, OptimizerKind, OptimizerState, Schedule,
};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean logistic loss gradient for the bias-free two-class model:
/// `p(y=0|x) = sigmoid(w.x)`.
fn logreg_grad(w: &[f64], xs: &[[f64; 2]], ys: &[usize]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (x, &y) in xs.iter().zip(ys) {
        let p0 = sigmoid(w[0] * x[0] + w[1] * x[1]);
        let r = p0 - if y == 0 { 1.0 } else { 0.0 };
        g[0] += r * x[0];
        g[1] += r * x[1];
    }
    let n = xs.len() as f64;
    [g[0] / n, g[1] / n]
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bsam_config() -> OptimizerConfig {
    OptimizerConfig {
        lr: 0.05,
        beta1: 0.9,
        beta2: 0.999,
        delta: 0.01,
        rho: 0.05,
        gamma: 0.1,
        n_train: 10,
        ..OptimizerConfig::new(OptimizerKind::Bsam)
    }
}

/// Hand execution of one bSAM step over `m` splits with pinned noise.
struct HandStep {
    theta: Vec<[f64; 2]>,
    g: [f64; 2],
    eps: Vec<[f64; 2]>,
    g_eps: [f64; 2],
    g_m: [f64; 2],
    s: [f64; 2],
    omega: [f64; 2],
}

fn hand_bsam(
    cfg: &OptimizerConfig,
    omega: [f64; 2],
    g_m: [f64; 2],
    s: [f64; 2],
    splits: &[(Vec<[f64; 2]>, Vec<usize>)],
    z: &[[f64; 2]],
) -> HandStep {
    let n = cfg.n_train as f64;
    let m = splits.len() as f64;
    let mut out = HandStep {
        theta: vec![],
        g: [0.0; 2],
        eps: vec![],
        g_eps: [0.0; 2],
        g_m: [0.0; 2],
        s: [0.0; 2],
        omega: [0.0; 2],
    };
    for ((xs, ys), z) in splits.iter().zip(z) {
        let sd = [(1.0 / (n * s[0])).sqrt(), (1.0 / (n * s[1])).sqrt()];
        let theta = [omega[0] + sd[0] * z[0], omega[1] + sd[1] * z[1]];
        let g = logreg_grad(&theta, xs, ys);
        let eps = [cfg.rho * g[0] / s[0], cfg.rho * g[1] / s[1]];
        let ge = logreg_grad(&[omega[0] + eps[0], omega[1] + eps[1]], xs, ys);
        for i in 0..2 {
            out.g[i] += g[i] / m;
            out.g_eps[i] += ge[i] / m;
        }
        out.theta.push(theta);
        out.eps.push(eps);
    }
    for i in 0..2 {
        out.g_m[i] = cfg.beta1 * g_m[i] + (1.0 - cfg.beta1) * (out.g_eps[i] + cfg.delta * omega[i]);
        out.s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * (s[i].sqrt() * out.g[i].abs() + cfg.delta + cfg.gamma);
        out.omega[i] = omega[i] - cfg.lr * out.g_m[i] / out.s[i];
    }
    out
}

fn batch_of(xs: &[[f64; 2]], ys: &[usize]) -> Batch {
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    Batch::from_rows(&rows, ys.to_vec(), 2).unwrap()
}

fn compare_step(hand: &HandStep, info: &relaxbayes::optim::StepInfo, st: &OptimizerState) -> f64 {
    let mut err: f64 = 0.0;
    for (a, b) in hand.theta.iter().zip(&info.theta) {
        err = err.max(max_abs_diff(a, b));
    }
    for (a, b) in hand.eps.iter().zip(&info.eps) {
        err = err.max(max_abs_diff(a, b));
    }
    err.max(max_abs_diff(&hand.g, &info.g))
        .max(max_abs_diff(&hand.g_eps, &info.g_eps))
        .max(max_abs_diff(&hand.g_m, &st.g_m))
        .max(max_abs_diff(&hand.s, &st.s))
        .max(max_abs_diff(&hand.omega, &st.omega))
}

/// Largest deviation of a single bSAM step on a two-point logistic problem
/// from its hand-executed trace.
pub fn bsam_single_step_error() -> f64 {
    let xs = [[1.0, 0.5], [-0.3, 2.0]];
    let ys = [0, 1];
    let cfg = bsam_config();
    let (omega, g_m, s) = ([0.2, -0.1], [0.1, -0.2], [2.0, 0.5]);
    let z = [0.3, -1.2];
    let mut st = OptimizerState::new(cfg.kind, omega.to_vec());
    st.g_m = g_m.to_vec();
    st.s = s.to_vec();
    let model = ModelSpec::logreg(2, 2).unwrap();
    let info = step(&cfg, &mut st, &model, &batch_of(&xs, &ys), &Noise::Pinned(vec![z.to_vec()])).unwrap();
    let hand = hand_bsam(&cfg, omega, g_m, s, &[(xs.to_vec(), ys.to_vec())], &[z]);
    compare_step(&hand, &info, &st)
}

/// As [`bsam_single_step_error`] with `m = 2` on a four-example batch.
pub fn msharp_two_split_error() -> f64 {
    let xs = [[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1], [-1.5, 0.2]];
    let ys = [0, 1, 1, 0];
    let cfg = OptimizerConfig { m: 2, ..bsam_config() };
    let (omega, g_m, s) = ([-0.4, 0.3], [0.0, 0.05], [1.5, 0.8]);
    let z = [[0.9, 0.1], [-0.5, 1.7]];
    let mut st = OptimizerState::new(cfg.kind, omega.to_vec());
    st.g_m = g_m.to_vec();
    st.s = s.to_vec();
    let model = ModelSpec::logreg(2, 2).unwrap();
    let pinned = Noise::Pinned(z.iter().map(|z| z.to_vec()).collect());
    let info = step_msharp(&cfg, &mut st, &model, &batch_of(&xs, &ys), &pinned).unwrap();
    let splits = [
        (xs[..2].to_vec(), ys[..2].to_vec()),
        (xs[2..].to_vec(), ys[2..].to_vec()),
    ];
    let hand = hand_bsam(&cfg, omega, g_m, s, &splits, &z);
    compare_step(&hand, &info, &st)
}

fn small_mlp_problem(seed: u64) -> (ModelSpec, Batch, Vec<f64>) {
    let model = ModelSpec::mlp(3, &[5], 3, Activation::Tanh).unwrap();
    let mut rng = seeded(seed);
    let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels = (0..8).map(|i| i % 3).collect();
    let params = model.init_params(&mut rng);
    (model, Batch::from_rows(&rows, labels, 3).unwrap(), params)
}

/// `step_msharp` with `m = 1` against `step` over ten steps for every optimizer.
pub fn m1_identity_holds() -> bool {
    let (model, batch, p0) = small_mlp_problem(11);
    [
        OptimizerKind::Sgd,
        OptimizerKind::Adam,
        OptimizerKind::SamSgd,
        OptimizerKind::SamAdam,
        OptimizerKind::Bsam,
    ]
    .into_iter()
    .all(|kind| {
        let cfg = OptimizerConfig { n_train: 8, seed: 5, ..OptimizerConfig::new(kind) };
        let mut a = OptimizerState::new(kind, p0.clone());
        let mut b = a.clone();
        (0..10).all(|_| {
            let ia = step(&cfg, &mut a, &model, &batch, &Noise::Stream).unwrap();
            let ib = step_msharp(&cfg, &mut b, &model, &batch, &Noise::Stream).unwrap();
            ia == ib && a == b
        })
    })
}

fn trajectory(cfg: &OptimizerConfig, steps: usize) -> Vec<OptimizerState> {
    let (model, batch, p0) = small_mlp_problem(3);
    let mut st = OptimizerState::new(cfg.kind, p0);
    (0..steps)
        .map(|_| {
            step(cfg, &mut st, &model, &batch, &Noise::Stream).unwrap();
            st.clone()
        })
        .collect()
}

/// SAM variants with `rho = 0` reproduce their base optimizers bit for bit, and
/// bSAM without noise, radius, momentum or scale updates is plain gradient descent.
pub fn rho_zero_reductions_hold() -> bool {
    let schedule = Schedule::Cosine { total_steps: 20 };
    let pair = |base: OptimizerKind, sam: OptimizerKind| {
        let a = OptimizerConfig { schedule: schedule.clone(), ..OptimizerConfig::new(base) };
        let b = OptimizerConfig { rho: 0.0, ..OptimizerConfig { kind: sam, ..a.clone() } };
        trajectory(&a, 20) == trajectory(&b, 20)
    };
    let sam_ok = pair(OptimizerKind::Sgd, OptimizerKind::SamSgd) && pair(OptimizerKind::Adam, OptimizerKind::SamAdam);

    let (model, batch, p0) = small_mlp_problem(4);
    let cfg = OptimizerConfig {
        noisy_linearization: false,
        rho: 0.0,
        beta1: 0.0,
        beta2: 1.0,
        lr: 0.2,
        ..OptimizerConfig::new(OptimizerKind::Bsam)
    };
    let mut st = OptimizerState::new(cfg.kind, p0);
    let bsam_ok = (0..10).all(|_| {
        let w = st.omega.clone();
        let g = model.grad(&w, &batch).unwrap();
        step(&cfg, &mut st, &model, &batch, &Noise::Stream).unwrap();
        let expect: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - 0.2 * g).collect();
        max_abs_diff(&expect, &st.omega) <= 1e-15 && st.s.iter().all(|&s| s == 1.0)
    });
    sam_ok && bsam_ok
}

/// Five Adam steps on `l(t) = (t - 3)^2 / 2 + t^4 / 40` against the textbook
/// recurrence, returning the largest iterate deviation.
pub fn adam_five_step_error() -> f64 {
    let f = |t: f64| (t - 3.0) + t.powi(3) / 10.0;
    let model = FnModel { dim: 1, f: move |p: &[f64]| (0.0, vec![f(p[0])]) };
    let cfg = OptimizerConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, gamma: 1e-8, ..OptimizerConfig::new(OptimizerKind::Adam) };
    let dummy = Batch::from_rows(&[vec![0.0]], vec![0], 2).unwrap();
    let mut st = OptimizerState::new(cfg.kind, vec![0.5]);
    let (mut t, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
    let mut err: f64 = 0.0;
    for k in 1..=5 {
        let g = f(t);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(k));
        let vh = v / (1.0 - 0.999f64.powi(k));
        t -= 0.1 * mh / (vh.sqrt() + 1e-8);
        step(&cfg, &mut st, &model, &dummy, &Noise::Stream).unwrap();
        err = err.max((st.omega[0] - t).abs());
    }
    // At the first step the bias-corrected update is lr * g / (|g| + eps).
    let mut first = OptimizerState::new(cfg.kind, vec![0.5]);
    step(&cfg, &mut first, &model, &dummy, &Noise::Stream).unwrap();
    let g0 = f(0.5);
    err.max((first.omega[0] - (0.5 - 0.1 * g0 / (g0.abs() + 1e-8))).abs())
}

/// One random (model, params, batch) draw for the gradient check.
pub fn random_case(seed: u64) -> (ModelSpec, Vec<f64>, Batch) {
    let mut rng = seeded(seed);
    let family = seed % 3;
    let d = rng.random_range(1..5);
    let c = rng.random_range(2..5);
    let model = match family {
        0 => ModelSpec::logreg(d, c).unwrap(),
        1 => ModelSpec::mlp(d, &[rng.random_range(2..7)], c, Activation::Tanh).unwrap(),
        _ => {
            let h1 = rng.random_range(2..6);
            let h2 = rng.random_range(2..6);
            ModelSpec::mlp(d, &[h1, h2], c, Activation::Relu).unwrap()
        }
    };
    let b = rng.random_range(1..9);
    let rows: Vec<Vec<f64>> = (0..b).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels = (0..b).map(|_| rng.random_range(0..c)).collect();
    let params = (0..model.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
    (model, params, Batch::from_rows(&rows, labels, c).unwrap())
}

/// Normwise relative error `max|g - fd| / max(max|fd|, 1e-8)` between the
/// analytic gradient and central differences at step `1e-4`, over up to 24
/// coordinates (all of them for small models).
pub fn gradient_rel_error(model: &ModelSpec, params: &[f64], batch: &Batch, seed: u64) -> f64 {
    let g = model.grad(params, batch).unwrap();
    let p = params.len();
    let mut rng = seeded(seed ^ 0x5151);
    let coords: Vec<usize> = if p <= 24 { (0..p).collect() } else { (0..24).map(|_| rng.random_range(0..p)).collect() };
    let h = 1e-4;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for i in coords {
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fd = (model.loss(&plus, batch).unwrap() - model.loss(&minus, batch).unwrap()) / (2.0 * h);
        diff = diff.max((g[i] - fd).abs());
        scale = scale.max(fd.abs());
    }
    diff / scale.max(1e-8)
}

/// Largest gradient relative error over `cases` random draws.
pub fn gradient_suite(cases: u64) -> f64 {
    (0..cases)
        .map(|s| {
            let (model, params, batch) = random_case(s);
            gradient_rel_error(&model, &params, &batch, s)
        })
        .fold(0.0, f64::max)
}

/// Dense GGN `sum_n J_n^T H_n J_n` with Jacobian columns from forward-mode
/// products along unit tangents and `H = diag(p) - p p^T` on the first `C-1` logits.
pub fn dense_ggn(model: &ModelSpec, params: &[f64], batch: &Batch) -> DMatrix<f64> {
    let p = params.len();
    let k = model.output_dim();
    let b = batch.len();
    let mut jac = vec![DMatrix::<f64>::zeros(k, p); b];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let (_, dz) = model.jvp(params, &e, &batch.inputs).unwrap();
        for n in 0..b {
            for o in 0..k {
                jac[n][(o, j)] = dz[(n, o)];
            }
        }
    }
    let logits = model.logits(params, &batch.inputs).unwrap();
    let mut ggn = DMatrix::zeros(p, p);
    for n in 0..b {
        let mut denom = 1.0;
        for o in 0..k {
            denom += logits[(n, o)].exp();
        }
        let probs: Vec<f64> = (0..k).map(|o| logits[(n, o)].exp() / denom).collect();
        let h = DMatrix::from_fn(k, k, |a, c| if a == c { probs[a] } else { 0.0 } - probs[a] * probs[c]);
        ggn += jac[n].transpose() * h * &jac[n];
    }
    ggn
}

/// Largest absolute difference between `diag_ggn` and the dense oracle over
/// hand-chosen logistic points and random small models (`P <= 50`), plus the
/// smallest diagonal entry seen.
pub fn ggn_suite() -> (f64, f64) {
    let mut cases = vec![{
        let model = ModelSpec::logreg(2, 2).unwrap();
        let batch = Batch::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![2.0, -1.0]], vec![0, 1, 1], 2).unwrap();
        (model, vec![0.4, -0.7], batch)
    }];
    cases.extend((0..60).map(random_case).filter(|(m, _, _)| m.num_params() <= 50));
    let mut err: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    for (model, params, batch) in &cases {
        let diag = model.diag_ggn(params, batch).unwrap();
        let dense = dense_ggn(model, params, batch);
        for (i, d) in diag.iter().enumerate() {
            err = err.max((d - dense[(i, i)]).abs());
            min_entry = min_entry.min(*d);
        }
    }
    (err, min_entry)
}

/// Hand value of the two-point logistic loss `{x=(1,0),y=1; x=(0,1),y=0}` at `(1,-1)`.
pub fn logreg_two_point_loss() -> (f64, f64) {
    let model = ModelSpec::logreg(2, 2).unwrap();
    let batch = Batch::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 0], 2).unwrap();
    let hand = -0.5 * ((1.0 - sigmoid(1.0)).ln() + sigmoid(-1.0).ln());
    (model.loss(&[1.0, -1.0], &batch).unwrap(), hand)
}

/// Named pass/fail results of the exact metric identities.
pub fn metric_identities() -> Vec<(&'static str, bool)> {
    let perfect = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let labels = [0, 1, 2];
    let r = MetricsReport::compute(&perfect, &labels).unwrap();
    let uniform = DMatrix::from_element(4, 5, 0.2);
    let over = DMatrix::from_row_slice(4, 2, &[0.8, 0.2, 0.8, 0.2, 0.8, 0.2, 0.8, 0.2]);
    let over_labels = [0, 1, 0, 1];
    vec![
        ("perfect accuracy is 1", r.accuracy == 1.0),
        ("perfect NLL is 0", r.nll == 0.0),
        ("perfect ECE is 0", r.ece == 0.0),
        ("uniform NLL is ln C", metrics::nll(&uniform, &[0, 1, 2, 3]).unwrap() == 5f64.ln()),
        (
            "single-bin ECE is |acc - conf|",
            (metrics::ece(&over, &over_labels, 10).unwrap() - 0.3).abs() < 1e-15,
        ),
        (
            "separated scores give AUROC 1",
            metrics::auroc(&[false, false, true, true], &[0.1, 0.2, 0.8, 0.9]).unwrap() == 1.0,
        ),
        ("tied scores give AUROC 0.5", metrics::auroc(&[false, true, true, false], &[0.5; 4]).unwrap() == 0.5),
    ]
}

/// Equal-width bin loop over (confidence, correct) pairs.
pub fn ece_oracle(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let idx: Vec<usize> = (0..conf.len())
            .filter(|&i| conf[i] >= lo && (conf[i] < hi || (b + 1 == bins && conf[i] <= 1.0)))
            .collect();
        if idx.is_empty() {
            continue;
        }
        let k = idx.len() as f64;
        let acc = idx.iter().filter(|&&i| correct[i]).count() as f64 / k;
        let avg = idx.iter().map(|&i| conf[i]).sum::<f64>() / k;
        total += k / n * (acc - avg).abs();
    }
    total
}

/// O(n^2) pairwise AUROC: the fraction of (positive, negative) pairs ordered correctly, ties counting half.
pub fn auroc_oracle(positive: &[bool], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Largest deviation of the derived metric hand cases from their oracles.
pub fn metric_hand_cases_error() -> f64 {
    // Three-bin ECE: confidences spread over bins [0.33, 0.67) and [0.67, 1].
    let probs = DMatrix::from_row_slice(
        6,
        2,
        &[0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.45, 0.55, 0.7, 0.3, 0.35, 0.65],
    );
    let labels = [0, 0, 0, 1, 1, 1];
    let (conf, correct) = metrics::confidences(&probs, &labels).unwrap();
    let ece = metrics::ece(&probs, &labels, 3).unwrap();
    let e1 = (ece - ece_oracle(&conf, &correct, 3)).abs();

    let pos = [true, false, true, false, true, false];
    let scores = [0.3, 0.3, 0.7, 0.1, 0.7, 0.7];
    let e2 = (metrics::auroc(&pos, &scores).unwrap() - auroc_oracle(&pos, &scores)).abs();

    let nll_probs = DMatrix::from_row_slice(2, 3, &[0.5, 0.25, 0.25, 0.1, 0.6, 0.3]);
    let hand = -(0.5f64.ln() + 0.3f64.ln()) / 2.0;
    let e3 = (metrics::nll(&nll_probs, &[0, 2]).unwrap() - hand).abs();
    e1.max(e2).max(e3)
}

/// Number of random score vectors (out of `count`) whose AUROC is unchanged,
/// bit for bit, under three strictly increasing maps, and that agree with the
/// pairwise oracle to 1e-12.
pub fn auroc_invariance(count: u64) -> u64 {
    (0..count)
        .filter(|&seed| {
            let mut rng = seeded(seed);
            let n = rng.random_range(4..60);
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..1.0f64) * 20.0).round() / 20.0).collect();
            let mut pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            pos[0] = true;
            pos[1] = false;
            let base = metrics::auroc(&pos, &scores).unwrap();
            let maps: [fn(f64) -> f64; 3] = [|s| s.exp(), |s| 3.0 * s - 7.0, |s| s.powi(3) + s];
            maps.iter().all(|f| {
                let t: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
                metrics::auroc(&pos, &t).unwrap() == base
            }) && (base - auroc_oracle(&pos, &scores)).abs() < 1e-12
        })
        .count() as u64
}

/// Distances between successive cutting-plane solutions `lambda'` for nested
/// anchor prefixes of the given sizes on a two-dimensional logistic problem.
pub fn cutting_plane_distances(sizes: &[usize], seed: u64) -> Vec<f64> {
    use relaxbayes::conjugate::{biconjugate_gradient_cp_with, BinaryLogreg, Covariance, ExpFamCoords};
    let data = relaxbayes::data::logreg2d_synthetic(30, 0.1, seed).unwrap();
    let problem = BinaryLogreg::from_batch(&data).unwrap();
    let loss = |t: &DVector<f64>| problem.loss_grad(t);
    let coords = ExpFamCoords::new(
        DVector::from_vec(vec![1.0, 0.5]),
        Covariance::Full(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3])),
    )
    .unwrap();
    let mut rng = seeded(seed);
    let max = *sizes.iter().max().unwrap();
    let z: Vec<DVector<f64>> = (0..max)
        .map(|_| DVector::from_vec(relaxbayes::rng::normal_vec(&mut rng, 2)))
        .collect();
    let sols: Vec<DVector<f64>> = sizes
        .iter()
        .map(|&l| {
            let s = biconjugate_gradient_cp_with(&loss, &coords, &z[..l]).unwrap();
            let mut v = s.lambda1.as_slice().to_vec();
            v.extend_from_slice(s.lambda2.as_slice());
            DVector::from_vec(v)
        })
        .collect();
    sols.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect()
}
