//! Figure data (CSV) and renderings (SVG). Every SVG is drawn from the
//! hash-checked CSV written next to it.

use std::path::Path;

use nalgebra::DMatrix;
use relaxbayes::conjugate::{blr_full_gaussian, expected_loss_at, smoothed_curves, Biconjugate, BinaryLogreg, BlrMode, BlrOptions, DEFAULT_ORDER};
use relaxbayes::data::logreg2d_synthetic;
use relaxbayes::losses::Loss1D;
use relaxbayes::metrics::MetricsReport;
use relaxbayes::nn::ModelSpec;
use relaxbayes::posterior::{exact_bayes_2d, laplace_at, predictive_with, GridSpec, PredictiveRule, Prior};
use relaxbayes::rng::stream;
use serde::{Deserialize, Serialize};

use crate::config::{
    config_hash, default_logreg_n, default_margin, default_moons_n, default_moons_noise, ActivationName, DatasetSpec,
    ModelConfig, OptimizerName, OptimizerSection, RunConfig, ScheduleConfig,
};
use crate::error::{Error, Result};
use crate::output::{heatmaps, num, write_text, HeatPanel, LinePlot, Series, Table};
use crate::train::{prepare, train};

const FIGURE_STREAM: u64 = 5 << 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Fig1b,
    Fig2,
    Fig5,
    Moons,
    Tightbound,
}

impl std::str::FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Config(format!("unknown figure {s}; expected fig1b, fig2, fig5, moons or tightbound")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FigureConfig {
    Fig1b {
        #[serde(default = "fig1b_variances")]
        variances: Vec<f64>,
        #[serde(default = "omega_range")]
        omega_range: (f64, f64),
        #[serde(default = "fig1b_points")]
        points: usize,
    },
    Fig2 {
        #[serde(default = "omega_range")]
        omega_range: (f64, f64),
        #[serde(default = "fig2_v_range")]
        v_range: (f64, f64),
        #[serde(default = "fig2_points")]
        points: usize,
    },
    Fig5(Fig5Config),
    Moons(MoonsConfig),
    Tightbound(TightboundConfig),
}

fn fig1b_variances() -> Vec<f64> {
    vec![0.5, 2.0, 4.0]
}

fn omega_range() -> (f64, f64) {
    (-6.0, 6.0)
}

fn fig1b_points() -> usize {
    121
}

fn fig2_v_range() -> (f64, f64) {
    (0.05, 4.0)
}

fn fig2_points() -> usize {
    40
}

impl FigureConfig {
    pub fn kind(&self) -> FigureKind {
        match self {
            FigureConfig::Fig1b { .. } => FigureKind::Fig1b,
            FigureConfig::Fig2 { .. } => FigureKind::Fig2,
            FigureConfig::Fig5(_) => FigureKind::Fig5,
            FigureConfig::Moons(_) => FigureKind::Moons,
            FigureConfig::Tightbound(_) => FigureKind::Tightbound,
        }
    }

    pub fn default_for(kind: FigureKind) -> Self {
        let json = format!("{{\"kind\": {}}}", serde_json::to_string(&kind).expect("kind serializes"));
        serde_json::from_str(&json).expect("every figure has defaults")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig5Config {
    #[serde(default = "default_logreg_n")]
    pub n: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Each seed draws its own dataset and optimizer noise.
    #[serde(default = "five_seeds")]
    pub seeds: Vec<u64>,
    /// Inputs on a `grid_points x grid_points` grid over `[-input_range, input_range]^2`.
    #[serde(default = "fig5_grid")]
    pub grid_points: usize,
    #[serde(default = "fig5_range")]
    pub input_range: f64,
    #[serde(default = "fig5_steps")]
    pub steps: u64,
    #[serde(default = "mc32")]
    pub mc_samples: usize,
    #[serde(default = "fig5_bsam")]
    pub bsam: OptimizerSection,
    #[serde(default = "fig5_sam")]
    pub sam: OptimizerSection,
}

fn five_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn fig5_grid() -> usize {
    20
}

fn fig5_range() -> f64 {
    4.0
}

fn fig5_steps() -> u64 {
    8000
}

fn mc32() -> usize {
    32
}

fn fig5_bsam() -> OptimizerSection {
    OptimizerSection {
        rho: Some(0.05),
        gamma: Some(0.1),
        n_delta: 1.0,
        schedule: ScheduleConfig::Cosine {},
        ..OptimizerSection::new(OptimizerName::Bsam, 0.1)
    }
}

fn fig5_sam() -> OptimizerSection {
    OptimizerSection {
        rho: Some(1.0),
        n_delta: 1.0,
        schedule: ScheduleConfig::Cosine {},
        ..OptimizerSection::new(OptimizerName::SamSgd, 0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoonsConfig {
    #[serde(default = "default_moons_n")]
    pub n: usize,
    #[serde(default = "default_moons_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "moons_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: ActivationName,
    #[serde(default = "moons_epochs")]
    pub epochs: u64,
    #[serde(default = "moons_batch")]
    pub batch_size: usize,
    #[serde(default = "mc32")]
    pub mc_samples: usize,
    #[serde(default = "moons_grid")]
    pub grid_points: usize,
    #[serde(default = "moons_bsam")]
    pub bsam: OptimizerSection,
    #[serde(default = "moons_sam")]
    pub sam: OptimizerSection,
}

fn moons_hidden() -> Vec<usize> {
    vec![24, 12, 12]
}

fn moons_epochs() -> u64 {
    400
}

fn moons_batch() -> usize {
    50
}

fn moons_grid() -> usize {
    40
}

fn moons_bsam() -> OptimizerSection {
    OptimizerSection {
        rho: Some(0.05),
        gamma: Some(0.1),
        n_delta: 1.0,
        schedule: ScheduleConfig::Cosine {},
        ..OptimizerSection::new(OptimizerName::Bsam, 0.1)
    }
}

fn moons_sam() -> OptimizerSection {
    OptimizerSection {
        rho: Some(0.05),
        n_delta: 1.0,
        schedule: ScheduleConfig::Cosine {},
        ..OptimizerSection::new(OptimizerName::SamSgd, 0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightboundConfig {
    #[serde(default = "default_logreg_n")]
    pub n: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit")]
    pub prior_precision: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "tight_iters")]
    pub iters: usize,
    #[serde(default = "tight_anchors")]
    pub anchors: usize,
}

fn unit() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn tight_iters() -> usize {
    40
}

fn tight_anchors() -> usize {
    64
}

/// Figure outputs; paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub enum FigureReport {
    Fig1b { rows: usize, min_gap: f64 },
    Fig2 { rows: usize, max_violation: f64 },
    Fig5(Fig5Summary),
    Moons { test: Vec<(String, MetricsReport)> },
    Tightbound(TightboundSummary),
}

pub fn run_figure(cfg: &FigureConfig, out: &Path) -> Result<FigureReport> {
    let hash = config_hash(cfg);
    match cfg {
        FigureConfig::Fig1b {
            variances,
            omega_range,
            points,
        } => fig1b(variances, *omega_range, *points, out, &hash),
        FigureConfig::Fig2 {
            omega_range,
            v_range,
            points,
        } => fig2(*omega_range, *v_range, *points, out, &hash),
        FigureConfig::Fig5(c) => fig5(c, out, &hash).map(FigureReport::Fig5),
        FigureConfig::Moons(c) => moons(c, out, &hash),
        FigureConfig::Tightbound(c) => tightbound(c, out, &hash).map(FigureReport::Tightbound),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn check_grid(points: usize, lo: f64, hi: f64) -> Result<()> {
    if points < 2 || !(hi > lo) {
        return Err(Error::Config(format!("grid needs at least 2 points and hi > lo (got {points}, {lo}, {hi})")));
    }
    Ok(())
}

fn fig1b(variances: &[f64], (lo, hi): (f64, f64), points: usize, out: &Path, hash: &str) -> Result<FigureReport> {
    check_grid(points, lo, hi)?;
    if variances.is_empty() || variances.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("fig1b needs positive variances".into()));
    }
    let loss = Loss1D::three_minima();
    let omega = linspace(lo, hi, points);
    let rows = smoothed_curves(&loss, variances, &omega)?;
    let mut t = Table::new(&["omega", "v", "loss", "expected_loss", "relaxation"]);
    for r in &rows {
        t.push(vec![num(r.omega), num(r.v), num(loss.value(r.omega)), num(r.expected_loss), num(r.relaxation)]);
    }
    let csv = out.join("fig1b.csv");
    t.write(&csv, hash)?;

    let t = Table::read_checked(&csv, hash)?;
    let (w, v, l, e, r) = (t.column("omega")?, t.column("v")?, t.column("loss")?, t.column("expected_loss")?, t.column("relaxation")?);
    let mut series = vec![Series {
        name: "loss".into(),
        points: w.iter().zip(&l).take(points).map(|(a, b)| (*a, *b)).collect(),
    }];
    for &var in variances {
        let sel: Vec<usize> = (0..w.len()).filter(|&i| v[i] == var).collect();
        series.push(Series {
            name: format!("E[loss], v={var}"),
            points: sel.iter().map(|&i| (w[i], e[i])).collect(),
        });
        series.push(Series {
            name: format!("relaxation, v={var}"),
            points: sel.iter().map(|&i| (w[i], r[i])).collect(),
        });
    }
    let plot = LinePlot {
        title: "Smoothed objectives of the three-minima loss".into(),
        x_label: "omega".into(),
        y_label: "objective".into(),
        series,
    };
    write_text(&out.join("fig1b.svg"), &plot.render())?;
    let min_gap = r.iter().zip(&e).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    Ok(FigureReport::Fig1b { rows: t.rows.len(), min_gap })
}

fn fig2((wlo, whi): (f64, f64), (vlo, vhi): (f64, f64), points: usize, out: &Path, hash: &str) -> Result<FigureReport> {
    check_grid(points, wlo, whi)?;
    check_grid(points, vlo, vhi)?;
    if vlo <= 0.0 {
        return Err(Error::Config("fig2 variances must be positive".into()));
    }
    let loss = Loss1D::three_minima();
    let engine = Biconjugate::new(&loss);
    let mut t = Table::new(&["omega", "v", "f", "f_biconjugate"]);
    for &w in &linspace(wlo, whi, points) {
        for &v in &linspace(vlo, vhi, points) {
            let f = -expected_loss_at(&loss, w, v, DEFAULT_ORDER)?;
            let fss = engine.eval(w, v)?.value;
            t.push(vec![num(w), num(v), num(f), num(fss)]);
        }
    }
    let csv = out.join("fig2.csv");
    t.write(&csv, hash)?;

    let t = Table::read_checked(&csv, hash)?;
    let (f, fss) = (t.column("f")?, t.column("f_biconjugate")?);
    let lo = f.iter().chain(&fss).copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().chain(&fss).copied().fold(f64::NEG_INFINITY, f64::max);
    let panel = |title: &str, values: Vec<f64>| HeatPanel {
        title: title.into(),
        nx: points,
        ny: points,
        values,
    };
    let svg = heatmaps(
        "f and its biconjugate over (omega, v); omega across, v up",
        &[panel("f", f.clone()), panel("f**", fss.clone())],
        lo,
        hi,
    );
    write_text(&out.join("fig2.svg"), &svg)?;
    let max_violation = fss.iter().zip(&f).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(FigureReport::Fig2 {
        rows: t.rows.len(),
        max_violation,
    })
}

/// Inputs on a square grid, `x0` varying slowest.
pub fn input_grid(points: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let axis = |i: usize| lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
    DMatrix::from_fn(points * points, 2, |k, c| if c == 0 { axis(k / points) } else { axis(k % points) })
}

fn point_run(opt: &OptimizerSection, model: ModelConfig, dataset: DatasetSpec, epochs: u64, batch_size: usize, seed: u64) -> RunConfig {
    RunConfig {
        model,
        optimizer: opt.clone(),
        dataset,
        epochs,
        batch_size,
        eval_every: epochs.max(1),
        mc_samples: 0,
        seed,
        out: None,
        sweep: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig5Summary {
    /// Mean `|p - p_exact|` over the input grid for bSAM, SAM and SAM + Laplace, per seed.
    pub per_seed: Vec<(u64, [f64; 3])>,
    pub mean: [f64; 3],
}

pub const FIG5_METHODS: [&str; 3] = ["bsam", "sam_point", "sam_laplace"];

fn fig5(c: &Fig5Config, out: &Path, hash: &str) -> Result<Fig5Summary> {
    if c.seeds.is_empty() || c.grid_points == 0 || c.steps == 0 {
        return Err(Error::Config("fig5 needs seeds, a grid and at least one step".into()));
    }
    let grid = input_grid(c.grid_points, -c.input_range, c.input_range);
    let mut t = Table::new(&["seed", "x0", "x1", "exact", "bsam", "sam_point", "sam_laplace"]);
    let mut summary = Table::new(&["seed", "mae_bsam", "mae_sam_point", "mae_sam_laplace"]);
    let mut per_seed = Vec::new();
    for &seed in &c.seeds {
        let dataset = DatasetSpec::Logreg2d {
            n: c.n,
            margin: c.margin,
            seed,
            n_test: None,
        };
        let run = |opt: &OptimizerSection| point_run(opt, ModelConfig::Logreg {}, dataset.clone(), c.steps, c.n, seed);
        let bsam_cfg = run(&c.bsam);
        let data = prepare(&bsam_cfg)?;
        let model = &data.model;
        let prior = Prior::new(c.bsam.n_delta.max(f64::MIN_POSITIVE))?;
        let exact = exact_bayes_2d(model, Some(&data.train), &prior, GridSpec::default())?;
        let p_exact = exact.predictive(model, &grid)?;

        let bsam = train(&bsam_cfg, &data).map_err(|f| f.error)?;
        let q = relaxbayes::posterior::bsam_posterior(&bsam.state, data.train.len())?;
        let mut rng = stream(seed, FIGURE_STREAM, 0);
        let p_bsam = predictive_with(model, &q, &grid, c.mc_samples, PredictiveRule::Sampled, &mut rng)?;

        let sam = train(&run(&c.sam), &data).map_err(|f| f.error)?;
        let p_sam = model.probs(&sam.state.omega, &grid)?;
        let lap = laplace_at(model, &sam.state.omega, &Prior::new(c.sam.n_delta.max(f64::MIN_POSITIVE))?, &data.train)?;
        let p_lap = predictive_with(model, &lap, &grid, c.mc_samples, PredictiveRule::Linearized, &mut rng)?;

        let mae = |p: &DMatrix<f64>| (0..grid.nrows()).map(|i| (p[(i, 1)] - p_exact[(i, 1)]).abs()).sum::<f64>() / grid.nrows() as f64;
        let e = [mae(&p_bsam), mae(&p_sam), mae(&p_lap)];
        for i in 0..grid.nrows() {
            t.push(vec![
                seed.to_string(),
                num(grid[(i, 0)]),
                num(grid[(i, 1)]),
                num(p_exact[(i, 1)]),
                num(p_bsam[(i, 1)]),
                num(p_sam[(i, 1)]),
                num(p_lap[(i, 1)]),
            ]);
        }
        summary.push(vec![seed.to_string(), num(e[0]), num(e[1]), num(e[2])]);
        per_seed.push((seed, e));
    }
    let csv = out.join("fig5.csv");
    t.write(&csv, hash)?;
    summary.write(&out.join("fig5_summary.csv"), hash)?;

    let t = Table::read_checked(&csv, hash)?;
    let seeds = t.column("seed")?;
    let first = c.seeds[0] as f64;
    let panels: Vec<HeatPanel> = ["exact", "bsam", "sam_point", "sam_laplace"]
        .iter()
        .map(|name| {
            let col = t.column(name)?;
            Ok(HeatPanel {
                title: (*name).into(),
                nx: c.grid_points,
                ny: c.grid_points,
                values: col.iter().zip(&seeds).filter(|(_, s)| **s == first).map(|(v, _)| *v).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let title = format!("p(y = 1 | x) on the logistic-regression clone, seed {}", c.seeds[0]);
    write_text(&out.join("fig5.svg"), &heatmaps(&title, &panels, 0.0, 1.0))?;

    let k = per_seed.len() as f64;
    let mut mean = [0.0; 3];
    for (_, e) in &per_seed {
        for j in 0..3 {
            mean[j] += e[j] / k;
        }
    }
    Ok(Fig5Summary { per_seed, mean })
}

fn moons(c: &MoonsConfig, out: &Path, hash: &str) -> Result<FigureReport> {
    if c.grid_points == 0 {
        return Err(Error::Config("moons needs a grid".into()));
    }
    let model = ModelConfig::Mlp {
        hidden: c.hidden.clone(),
        activation: c.activation,
    };
    let dataset = DatasetSpec::TwoMoons {
        n: c.n,
        noise: c.noise,
        seed: c.seed,
        n_test: None,
    };
    let run = |opt: &OptimizerSection| point_run(opt, model.clone(), dataset.clone(), c.epochs, c.batch_size, c.seed);
    let bsam_cfg = run(&c.bsam);
    let data = prepare(&bsam_cfg)?;
    let m = &data.model;
    let n = c.grid_points;
    let axis = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let grid = DMatrix::from_fn(n * n, 2, |k, col| if col == 0 { axis(k / n, -1.5, 2.5) } else { axis(k % n, -1.0, 1.5) });
    let mut rng = stream(c.seed, FIGURE_STREAM, 1);

    let bsam = train(&bsam_cfg, &data).map_err(|f| f.error)?;
    let q = relaxbayes::posterior::bsam_posterior(&bsam.state, data.train.len())?;
    let p_bsam = predictive_with(m, &q, &grid, c.mc_samples, PredictiveRule::Sampled, &mut rng)?;
    let sam_cfg = run(&c.sam);
    let sam = train(&sam_cfg, &data).map_err(|f| f.error)?;
    let p_sam = m.probs(&sam.state.omega, &grid)?;
    let lap = laplace_at(m, &sam.state.omega, &Prior::new(c.sam.n_delta.max(f64::MIN_POSITIVE))?, &data.train)?;
    let p_lap = predictive_with(m, &lap, &grid, c.mc_samples, PredictiveRule::Linearized, &mut rng)?;

    let mut t = Table::new(&["x0", "x1", "bsam", "sam_point", "sam_laplace"]);
    for i in 0..grid.nrows() {
        t.push(vec![num(grid[(i, 0)]), num(grid[(i, 1)]), num(p_bsam[(i, 1)]), num(p_sam[(i, 1)]), num(p_lap[(i, 1)])]);
    }
    let csv = out.join("moons.csv");
    t.write(&csv, hash)?;

    let mut test = Vec::new();
    let mut metrics = Table::new(&["method", "accuracy", "nll", "ece"]);
    let test_probs = [
        ("bsam", predictive_with(m, &q, &data.test.inputs, c.mc_samples, PredictiveRule::Sampled, &mut rng)?),
        ("sam_point", m.probs(&sam.state.omega, &data.test.inputs)?),
        ("sam_laplace", predictive_with(m, &lap, &data.test.inputs, c.mc_samples, PredictiveRule::Linearized, &mut rng)?),
    ];
    for (name, p) in test_probs {
        let r = MetricsReport::compute(&p, &data.test.labels)?;
        metrics.push(vec![name.into(), num(r.accuracy), num(r.nll), num(r.ece)]);
        test.push((name.to_string(), r));
    }
    metrics.write(&out.join("moons_metrics.csv"), hash)?;

    let t = Table::read_checked(&csv, hash)?;
    let panels: Vec<HeatPanel> = ["bsam", "sam_point", "sam_laplace"]
        .iter()
        .map(|name| {
            Ok(HeatPanel {
                title: (*name).into(),
                nx: n,
                ny: n,
                values: t.column(name)?,
            })
        })
        .collect::<Result<_>>()?;
    write_text(&out.join("moons.svg"), &heatmaps("p(y = 1 | x) on two moons", &panels, 0.0, 1.0))?;
    Ok(FigureReport::Moons { test })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightboundSummary {
    pub elbo_bayes: f64,
    /// Exact ELBO at the relaxed solution.
    pub elbo_relaxed: f64,
    /// Relaxed objective (plane model) at the last relaxed iterate.
    pub relaxed_bound: f64,
    pub exact_mean: [f64; 2],
    pub mean_bayes: [f64; 2],
    pub mean_relaxed: [f64; 2],
}

impl TightboundSummary {
    pub fn distances(&self) -> (f64, f64) {
        let d = |m: &[f64; 2]| (m[0] - self.exact_mean[0]).hypot(m[1] - self.exact_mean[1]);
        (d(&self.mean_bayes), d(&self.mean_relaxed))
    }
}

fn tightbound(c: &TightboundConfig, out: &Path, hash: &str) -> Result<TightboundSummary> {
    let batch = logreg2d_synthetic(c.n, c.margin, c.seed)?;
    let problem = BinaryLogreg::from_batch(&batch)?;
    let prior = Prior::new(c.prior_precision)?;
    let model = ModelSpec::logreg(2, 2)?;
    let exact = exact_bayes_2d(&model, Some(&batch), &prior, GridSpec::default())?;
    let opts = BlrOptions {
        alpha: c.alpha,
        iters: c.iters,
        anchors: c.anchors,
        ..Default::default()
    };
    let mut rng = stream(c.seed, FIGURE_STREAM, 2);
    let bayes = blr_full_gaussian(&problem, &prior, BlrMode::Bayes, &opts, &mut rng)?;
    let relaxed = blr_full_gaussian(&problem, &prior, BlrMode::Relaxed, &opts, &mut rng)?;

    let mut t = Table::new(&["iter", "elbo_bayes", "elbo_relaxed", "relaxed_bound"]);
    for i in 0..bayes.elbo_trace.len() {
        // The relaxed bound is taken before each update, so it lags by one iterate.
        let bound = if i < relaxed.relaxed_trace.len() { num(relaxed.relaxed_trace[i]) } else { String::new() };
        t.push(vec![i.to_string(), num(bayes.elbo_trace[i]), num(relaxed.elbo_trace[i]), bound]);
    }
    let csv = out.join("tightbound.csv");
    t.write(&csv, hash)?;
    let mut post = Table::new(&["method", "mean0", "mean1", "cov00", "cov01", "cov11"]);
    let ec = exact.covariance();
    let em = exact.mean();
    post.push(vec!["exact".into(), num(em[0]), num(em[1]), num(ec[(0, 0)]), num(ec[(0, 1)]), num(ec[(1, 1)])]);
    for (name, run) in [("bayes", &bayes), ("relaxed", &relaxed)] {
        let cov = run.posterior.cov_matrix();
        let m = &run.posterior.mean;
        post.push(vec![name.into(), num(m[0]), num(m[1]), num(cov[(0, 0)]), num(cov[(0, 1)]), num(cov[(1, 1)])]);
    }
    post.write(&out.join("tightbound_posteriors.csv"), hash)?;

    let t = Table::read_checked(&csv, hash)?;
    let iter = t.column("iter")?;
    let series = ["elbo_bayes", "elbo_relaxed", "relaxed_bound"]
        .iter()
        .map(|name| {
            let col = t.column(name)?;
            Ok(Series {
                name: (*name).into(),
                points: iter.iter().zip(&col).skip(1).map(|(a, b)| (*a, *b)).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let plot = LinePlot {
        title: "ELBO of Bayes and relaxed-Bayes learning-rule iterates".into(),
        x_label: "iteration".into(),
        y_label: "ELBO".into(),
        series,
    };
    write_text(&out.join("tightbound.svg"), &plot.render())?;

    let last = |v: &[f64]| *v.last().expect("non-empty trace");
    Ok(TightboundSummary {
        elbo_bayes: last(&bayes.elbo_trace),
        elbo_relaxed: last(&relaxed.elbo_trace),
        relaxed_bound: relaxed.relaxed_trace.last().copied().unwrap_or(f64::NAN),
        exact_mean: em,
        mean_bayes: [bayes.posterior.mean[0], bayes.posterior.mean[1]],
        mean_relaxed: [relaxed.posterior.mean[0], relaxed.posterior.mean[1]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_exist_for_every_kind() {
        for kind in [FigureKind::Fig1b, FigureKind::Fig2, FigureKind::Fig5, FigureKind::Moons, FigureKind::Tightbound] {
            assert_eq!(FigureConfig::default_for(kind).kind(), kind);
        }
        assert!("fig9".parse::<FigureKind>().is_err());
        assert_eq!("tightbound".parse::<FigureKind>().unwrap(), FigureKind::Tightbound);
    }

    #[test]
    fn unknown_figure_keys_rejected() {
        assert!(FigureConfig::from_json(r#"{"kind": "fig5", "sedes": [1]}"#).is_err());
        assert!(FigureConfig::from_json(r#"{"kind": "fig5", "bsam": {"kind": "bsam", "lr": 0.1, "x": 1}}"#).is_err());
        let c = FigureConfig::from_json(r#"{"kind": "fig5", "seeds": [3]}"#).unwrap();
        match c {
            FigureConfig::Fig5(f) => {
                assert_eq!(f.seeds, vec![3]);
                assert_eq!(f.sam.rho, Some(1.0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn input_grid_layout() {
        let g = input_grid(2, -1.0, 1.0);
        assert_eq!(g.as_slice(), &[-0.5, -0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5]);
    }
}
