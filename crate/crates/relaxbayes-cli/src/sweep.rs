//! Hyperparameter sweeps; grid points and seeds run in parallel.

use std::path::Path;

use rayon::prelude::*;
use relaxbayes::metrics::MetricsReport;

use crate::config::{DatasetSpec, RunConfig, SweepKind, SweepSpec};
use crate::error::{Error, Result};
use crate::output::{num, opt_num, Table};
use crate::train::{evaluate, prepare, trace_table, train, Prepared};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub noisy_linearization: bool,
    pub mc_samples: usize,
    pub result: std::result::Result<MetricsReport, String>,
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "kind",
    "value",
    "seed",
    "noisy_linearization",
    "mc_samples",
    "accuracy",
    "nll",
    "ece",
    "auroc",
    "error",
    "run_hash",
];

fn kind_name(k: SweepKind) -> &'static str {
    match k {
        SweepKind::RhoSensitivity => "rho_sensitivity",
        SweepKind::Msharpness => "msharpness",
        SweepKind::McSamples => "mc_samples",
        SweepKind::NoiseAblation => "noise_ablation",
    }
}

/// The run configuration of one grid point; `None` for the S sweep, which
/// trains once per seed and only varies the evaluation.
pub fn variant(base: &RunConfig, kind: SweepKind, value: f64, seed: u64) -> RunConfig {
    let mut c = base.clone();
    if base.sweep.as_ref().is_some_and(|s| s.reseed_data) {
        match &mut c.dataset {
            DatasetSpec::Logreg2d { seed: s, .. } | DatasetSpec::TwoMoons { seed: s, .. } => *s = seed,
            DatasetSpec::IdxFiles { .. } => {}
        }
    }
    c.sweep = None;
    c.out = None;
    c.seed = seed;
    match kind {
        SweepKind::RhoSensitivity => c.optimizer.rho = Some(value),
        SweepKind::Msharpness => c.optimizer.m = value as usize,
        SweepKind::McSamples => c.mc_samples = value as usize,
        SweepKind::NoiseAblation => c.optimizer.noisy_linearization = value != 0.0,
    }
    c
}

fn grid(spec: &SweepSpec) -> Vec<f64> {
    match spec.kind {
        SweepKind::NoiseAblation => vec![1.0, 0.0],
        _ => spec.values.clone(),
    }
}

/// Run every grid point for every seed. Failed points are recorded in their
/// row and do not stop the sweep. Each run writes its trace into
/// `out/runs/<value>_seed<seed>/` when `out` is given.
pub fn run_sweep(base: &RunConfig, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let spec = base
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no sweep section".into()))?;
    base.validate()?;
    let values = grid(spec);
    let shared = if spec.reseed_data { None } else { Some(prepare(base)?) };
    let jobs: Vec<(f64, u64)> = match spec.kind {
        SweepKind::McSamples => spec.seeds.iter().map(|&s| (f64::NAN, s)).collect(),
        _ => values.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect(),
    };
    let results: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let data = match &shared {
                Some(d) => Ok(d.clone()),
                None => prepare(&variant(base, spec.kind, value, seed)),
            };
            match (spec.kind, data) {
                (SweepKind::McSamples, Ok(d)) => mc_rows(base, &d, &values, seed),
                (kind, Ok(d)) => vec![point_row(base, &d, kind, value, seed, out)],
                (kind, Err(e)) => failed_rows(base, kind, &values, value, seed, &e.to_string()),
            }
        })
        .collect();
    let rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    if let Some(out) = out {
        sweep_table(spec.kind, base, &rows).write(&out.join("sweep.csv"), &base.hash())?;
    }
    Ok(rows)
}

fn failed_rows(base: &RunConfig, kind: SweepKind, values: &[f64], value: f64, seed: u64, err: &str) -> Vec<SweepRow> {
    let points = if kind == SweepKind::McSamples { values.to_vec() } else { vec![value] };
    points
        .into_iter()
        .map(|v| {
            let cfg = variant(base, kind, v, seed);
            SweepRow {
                value: v,
                seed,
                noisy_linearization: cfg.optimizer.noisy_linearization,
                mc_samples: cfg.mc_samples,
                result: Err(err.to_string()),
            }
        })
        .collect()
}

fn point_row(base: &RunConfig, data: &Prepared, kind: SweepKind, value: f64, seed: u64, out: Option<&Path>) -> SweepRow {
    let cfg = variant(base, kind, value, seed);
    let result = (|| {
        cfg.validate()?;
        let o = train(&cfg, data).map_err(|f| f.error)?;
        if let Some(out) = out {
            let dir = out.join("runs").join(format!("{}_seed{seed}", num(value)));
            trace_table(&o.trace).write(&dir.join("trace.csv"), &cfg.hash())?;
        }
        Ok::<_, Error>(o.final_test().clone())
    })();
    SweepRow {
        value,
        seed,
        noisy_linearization: cfg.optimizer.noisy_linearization,
        mc_samples: cfg.mc_samples,
        result: result.map_err(|e| e.to_string()),
    }
}

fn mc_rows(base: &RunConfig, data: &Prepared, values: &[f64], seed: u64) -> Vec<SweepRow> {
    let cfg = variant(base, SweepKind::McSamples, 0.0, seed);
    let trained = train(&cfg, data).map_err(|f| f.error.to_string());
    values
        .iter()
        .map(|&v| {
            let s = v as usize;
            let result = trained.as_ref().map_err(Clone::clone).and_then(|o| {
                // Same evaluation key as the final test evaluation of a plain run.
                evaluate(&data.model, &o.opt, &o.state, &data.test, s, (seed, 2 * cfg.epochs + 1)).map_err(|e| e.to_string())
            });
            SweepRow {
                value: v,
                seed,
                noisy_linearization: cfg.optimizer.noisy_linearization,
                mc_samples: s,
                result,
            }
        })
        .collect()
}

pub fn sweep_table(kind: SweepKind, base: &RunConfig, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for r in rows {
        let run_hash = variant(base, kind, r.value, r.seed).hash();
        let (metrics, err) = match &r.result {
            Ok(m) => ([num(m.accuracy), num(m.nll), num(m.ece), opt_num(m.auroc)], String::new()),
            Err(e) => (Default::default(), e.clone()),
        };
        let mut row = vec![
            kind_name(kind).to_string(),
            num(r.value),
            r.seed.to_string(),
            r.noisy_linearization.to_string(),
            r.mc_samples.to_string(),
        ];
        row.extend(metrics);
        row.push(err);
        row.push(run_hash);
        t.push(row);
    }
    t
}
