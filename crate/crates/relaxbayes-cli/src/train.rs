//! Dataset preparation and the train/eval loop.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use relaxbayes::data::{load_idx, logreg2d_synthetic, two_moons};
use relaxbayes::metrics::MetricsReport;
use relaxbayes::nn::{Batch, ModelSpec};
use relaxbayes::optim::{save_checkpoint, step_msharp, Noise, OptimizerConfig, OptimizerKind, OptimizerState};
use relaxbayes::posterior::{bsam_posterior, predictive};
use relaxbayes::rng::stream;
use serde::Serialize;

use crate::config::{DatasetSpec, Normalization, RunConfig};
use crate::error::{Error, Result};
use crate::output::{num, opt_num, write_text, Table};

/// Stream ids reserved for initialization, shuffling and evaluation; optimizer
/// steps use ids from zero upwards.
const INIT_STREAM: u64 = 1 << 62;
const SHUFFLE_STREAM: u64 = 2 << 62;
const EVAL_STREAM: u64 = 3 << 62;

/// Offset between the training and test seeds of the synthetic datasets.
pub const TEST_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub model: ModelSpec,
    pub train: Batch,
    pub test: Batch,
    pub num_classes: usize,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<(Batch, Batch, usize)> {
    Ok(match spec {
        DatasetSpec::Logreg2d { n, margin, seed, n_test } => (
            logreg2d_synthetic(*n, *margin, *seed)?,
            logreg2d_synthetic(n_test.unwrap_or(*n), *margin, seed.wrapping_add(TEST_SEED_OFFSET))?,
            2,
        ),
        DatasetSpec::TwoMoons { n, noise, seed, n_test } => (
            two_moons(*n, *noise, *seed)?,
            two_moons(n_test.unwrap_or(*n), *noise, seed.wrapping_add(TEST_SEED_OFFSET))?,
            2,
        ),
        DatasetSpec::IdxFiles {
            train_images,
            train_labels,
            test_images,
            test_labels,
            num_classes,
            normalization,
        } => {
            let tr = load_idx(train_images, train_labels)?;
            let te = load_idx(test_images, test_labels)?;
            if tr.rows * tr.cols != te.rows * te.cols {
                return Err(Error::Config(format!(
                    "train images are {}x{}, test images {}x{}",
                    tr.rows, tr.cols, te.rows, te.cols
                )));
            }
            let mut train = Batch::new(tr.images, tr.labels, *num_classes).map_err(label_error)?;
            let mut test = Batch::new(te.images, te.labels, *num_classes).map_err(label_error)?;
            if *normalization == Normalization::Standardize {
                let n = train.inputs.len() as f64;
                let mean = train.inputs.sum() / n;
                let sd = (train.inputs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
                train.inputs.apply(|x| *x = (*x - mean) / sd);
                test.inputs.apply(|x| *x = (*x - mean) / sd);
            }
            (train, test, *num_classes)
        }
    })
}

fn label_error(e: relaxbayes::Error) -> Error {
    Error::Config(format!("labels do not match the model head: {e}"))
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (train, test, num_classes) = load_dataset(&cfg.dataset)?;
    let model = cfg.model.build(train.inputs.ncols(), num_classes)?;
    Ok(Prepared {
        model,
        train,
        test,
        num_classes,
    })
}

/// Minibatch index lists for one epoch; each batch is trimmed to a multiple of `m`.
pub fn epoch_batches(n: usize, batch_size: usize, m: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if batch_size < n {
        idx.shuffle(&mut stream(seed, SHUFFLE_STREAM, epoch));
    }
    idx.chunks(batch_size)
        .map(|c| c[..c.len() / m * m].to_vec())
        .filter(|c| !c.is_empty())
        .collect()
}

pub fn steps_per_epoch(n: usize, batch_size: usize, m: usize) -> u64 {
    let full = n / batch_size;
    let rest = n % batch_size / m * m;
    (full + usize::from(rest > 0)) as u64
}

/// Metrics of the bSAM predictive with `samples` draws, or of the plug-in
/// prediction at the iterate for point optimizers and `samples = 0`.
pub fn evaluate(
    model: &ModelSpec,
    opt: &OptimizerConfig,
    state: &OptimizerState,
    data: &Batch,
    samples: usize,
    rng_key: (u64, u64),
) -> Result<MetricsReport> {
    let probs = if opt.kind == OptimizerKind::Bsam && samples > 0 {
        let q = bsam_posterior(state, opt.n_train)?;
        let mut rng = stream(rng_key.0, EVAL_STREAM, rng_key.1);
        predictive(model, &q, &data.inputs, samples, &mut rng)?
    } else {
        model.probs(&state.omega, &data.inputs)?
    };
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite predictive probabilities".into()));
    }
    Ok(MetricsReport::compute(&probs, &data.labels)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub epoch: u64,
    pub split: Split,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub opt: OptimizerConfig,
    pub state: OptimizerState,
    pub trace: Vec<EvalRow>,
    /// Seconds since the start of training at each evaluation epoch.
    pub wall_s: Vec<(u64, f64)>,
}

impl TrainOutcome {
    pub fn final_test(&self) -> &MetricsReport {
        &self
            .trace
            .iter()
            .rev()
            .find(|r| r.split == Split::Test)
            .expect("the initial model is always evaluated")
            .report
    }
}

/// A run that stopped early; `last_good` is the state before the failing step.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub last_good: Option<OptimizerState>,
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        Self { error, last_good: None }
    }
}

impl From<relaxbayes::Error> for TrainFailure {
    fn from(e: relaxbayes::Error) -> Self {
        Error::from(e).into()
    }
}

pub fn initial_state(cfg: &RunConfig, model: &ModelSpec) -> OptimizerState {
    let omega = model.init_params(&mut stream(cfg.seed, INIT_STREAM, 0));
    OptimizerState::new(cfg.optimizer.kind.into(), omega)
}

pub fn optimizer_for(cfg: &RunConfig, n_train: usize) -> OptimizerConfig {
    let spe = steps_per_epoch(n_train, cfg.batch_size, cfg.optimizer.m);
    cfg.optimizer.to_optimizer(n_train, spe, cfg.epochs, cfg.seed)
}

pub fn train(cfg: &RunConfig, data: &Prepared) -> std::result::Result<TrainOutcome, TrainFailure> {
    let n = data.train.len();
    let opt = optimizer_for(cfg, n);
    opt.validate()?;
    let mut state = initial_state(cfg, &data.model);
    let start = Instant::now();
    let mut trace = Vec::new();
    let mut wall_s = Vec::new();
    let mut eval = |epoch: u64, state: &OptimizerState, trace: &mut Vec<EvalRow>| -> Result<()> {
        for (k, (split, batch)) in [(Split::Train, &data.train), (Split::Test, &data.test)].into_iter().enumerate() {
            let report = evaluate(&data.model, &opt, state, batch, cfg.mc_samples, (cfg.seed, 2 * epoch + k as u64))?;
            trace.push(EvalRow { epoch, split, report });
        }
        wall_s.push((epoch, start.elapsed().as_secs_f64()));
        Ok(())
    };
    eval(0, &state, &mut trace)?;
    for epoch in 1..=cfg.epochs {
        for idx in epoch_batches(n, cfg.batch_size, opt.m, cfg.seed, epoch) {
            let last_good = state.clone();
            let batch = data.train.select(&idx);
            let stepped = step_msharp(&opt, &mut state, &data.model, &batch, &Noise::Stream);
            let failure = match stepped {
                Err(e) => Some(Error::from(e)),
                Ok(_) if state.omega.iter().any(|w| !w.is_finite()) => {
                    Some(Error::Numerical(format!("non-finite parameters after step {}", state.step_count)))
                }
                Ok(_) => None,
            };
            if let Some(error) = failure {
                let error = match error {
                    Error::Lib(relaxbayes::Error::Numerical(msg)) => Error::Numerical(msg),
                    e => e,
                };
                return Err(TrainFailure {
                    error,
                    last_good: Some(last_good),
                });
            }
        }
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            eval(epoch, &state, &mut trace)?;
        }
    }
    Ok(TrainOutcome {
        opt,
        state,
        trace,
        wall_s,
    })
}

pub const TRACE_COLUMNS: [&str; 7] = ["epoch", "split", "accuracy", "nll", "ece", "auroc", "n_examples"];

pub fn trace_table(trace: &[EvalRow]) -> Table {
    let mut t = Table::new(&TRACE_COLUMNS);
    for r in trace {
        t.push(vec![
            r.epoch.to_string(),
            r.split.name().into(),
            num(r.report.accuracy),
            num(r.report.nll),
            num(r.report.ece),
            opt_num(r.report.auroc),
            r.report.n_examples.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    config_hash: &'a str,
    epochs: u64,
    steps: u64,
    accuracy: f64,
    nll: f64,
    ece: f64,
    auroc: Option<f64>,
    n_examples: usize,
}

fn write_checkpoint(path: &Path, state: &OptimizerState) -> Result<()> {
    let mut buf = Vec::new();
    save_checkpoint(state, &mut buf)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Train, then write `trace.csv`, `timing.csv`, `report.json` and
/// `checkpoint.bin` into `out`. On a numerical abort the last good state is
/// written to `checkpoint.bin` before the error is returned.
pub fn run_train(cfg: &RunConfig, out: &Path) -> Result<TrainOutcome> {
    let data = prepare(cfg)?;
    let hash = cfg.hash();
    let outcome = match train(cfg, &data) {
        Ok(o) => o,
        Err(TrainFailure { error, last_good }) => {
            if let Some(state) = last_good {
                write_checkpoint(&out.join("checkpoint.bin"), &state)?;
            }
            return Err(error);
        }
    };
    trace_table(&outcome.trace).write(&out.join("trace.csv"), &hash)?;
    let mut timing = Table::new(&["epoch", "wall_s"]);
    for (e, s) in &outcome.wall_s {
        timing.push(vec![e.to_string(), num(*s)]);
    }
    timing.write(&out.join("timing.csv"), &hash)?;
    let fin = outcome.final_test();
    let report = ReportJson {
        config_hash: &hash,
        epochs: cfg.epochs,
        steps: outcome.state.step_count,
        accuracy: fin.accuracy,
        nll: fin.nll,
        ece: fin.ece,
        auroc: fin.auroc,
        n_examples: fin.n_examples,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out.join("report.json"), &(json + "\n"))?;
    write_checkpoint(&out.join("checkpoint.bin"), &outcome.state)?;
    Ok(outcome)
}
