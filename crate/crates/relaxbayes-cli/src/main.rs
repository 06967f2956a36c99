use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relaxbayes_cli::config::RunConfig;
use relaxbayes_cli::figures::{run_figure, FigureConfig, FigureKind, FigureReport};
use relaxbayes_cli::score::run_metrics;
use relaxbayes_cli::sweep::run_sweep;
use relaxbayes_cli::train::run_train;
use relaxbayes_cli::verify::{run_verify, VerifyConfig};
use relaxbayes_cli::{Error, Result};

#[derive(Parser)]
#[command(name = "relaxbayes", version, about = "SAM, bSAM and relaxed variational Bayes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write trace.csv, timing.csv, report.json and checkpoint.bin.
    Train(Common),
    /// Write the CSV data and SVG rendering of a figure.
    Figures {
        /// fig1b, fig2, fig5, moons or tightbound; may be omitted when the config names it.
        #[arg(long)]
        kind: Option<FigureKind>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the sweep section of a config and write sweep.csv.
    Sweep(Common),
    /// Run the duality and theorem suites.
    Verify(Common),
    /// Score a predictions CSV with columns label,p0,...,p(C-1).
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run_config(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, from_config: Option<&PathBuf>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| from_config.cloned())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(common) => {
            let cfg = run_config(&common)?;
            let out = out_dir(&common, cfg.out.as_ref());
            let o = run_train(&cfg, &out)?;
            let r = o.final_test();
            println!(
                "test accuracy {:.4} nll {:.4} ece {:.4} auroc {} ({} steps) -> {}",
                r.accuracy,
                r.nll,
                r.ece,
                r.auroc.map_or("n/a".into(), |a| format!("{a:.4}")),
                o.state.step_count,
                out.display()
            );
            Ok(true)
        }
        Command::Figures { kind, common } => {
            let mut cfg = match (&common.config, kind) {
                (Some(p), k) => {
                    let c = FigureConfig::from_json(&read(p)?)?;
                    if k.is_some_and(|k| k != c.kind()) {
                        return Err(Error::Config("--kind disagrees with the config".into()));
                    }
                    c
                }
                (None, Some(k)) => FigureConfig::default_for(k),
                (None, None) => return Err(Error::Config("pass --kind or --config".into())),
            };
            if let Some(seed) = common.seed {
                match &mut cfg {
                    FigureConfig::Fig5(c) => c.seeds = vec![seed],
                    FigureConfig::Moons(c) => c.seed = seed,
                    FigureConfig::Tightbound(c) => c.seed = seed,
                    _ => {}
                }
            }
            let out = out_dir(&common, None);
            match run_figure(&cfg, &out)? {
                FigureReport::Fig1b { rows, min_gap } => {
                    println!("fig1b: {rows} rows, min(relaxation - expected loss) = {min_gap:.3e}")
                }
                FigureReport::Fig2 { rows, max_violation } => {
                    println!("fig2: {rows} rows, max(f** - f) = {max_violation:.3e}")
                }
                FigureReport::Fig5(s) => println!(
                    "fig5: mean |p - p_exact| bsam {:.4} sam {:.4} laplace {:.4}",
                    s.mean[0], s.mean[1], s.mean[2]
                ),
                FigureReport::Moons { test } => {
                    for (name, r) in test {
                        println!("moons {name}: accuracy {:.4} nll {:.4} ece {:.4}", r.accuracy, r.nll, r.ece);
                    }
                }
                FigureReport::Tightbound(s) => println!(
                    "tightbound: ELBO bayes {:.4} relaxed {:.4} (relaxed bound {:.4})",
                    s.elbo_bayes, s.elbo_relaxed, s.relaxed_bound
                ),
            }
            println!("-> {}", out.display());
            Ok(true)
        }
        Command::Sweep(common) => {
            let cfg = run_config(&common)?;
            let out = out_dir(&common, cfg.out.as_ref());
            if let Some(n) = common.threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            let rows = run_sweep(&cfg, Some(&out))?;
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("{} rows ({failed} failed) -> {}", rows.len(), out.join("sweep.csv").display());
            Ok(true)
        }
        Command::Verify(common) => {
            let mut cfg = match &common.config {
                Some(p) => VerifyConfig::from_json(&read(p)?)?,
                None => VerifyConfig::default(),
            };
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let out = out_dir(&common, None);
            let o = run_verify(&cfg, Some(&out))?;
            for r in &o.duality {
                println!(
                    "duality {}: max(f** - f) {:.2e}, convexity {:.2e}, limit {:.2e} [{}]",
                    r.loss,
                    r.max_violation,
                    r.max_convexity_violation,
                    r.max_limit_error,
                    if r.passes() { "ok" } else { "FAIL" }
                );
            }
            if !o.theorem1.is_empty() {
                let worst = o.theorem1.iter().map(|r| r.gap).fold(0.0, f64::max);
                println!("theorem1: {} dual points, max gap {worst:.2e}", o.theorem1.len());
            }
            for (loss, r) in &o.theorem2 {
                println!(
                    "theorem2 {loss} rho={} delta={}: gap {:.2e} residuals {:.1e} {:.1e} {:.1e} {:?}",
                    r.rho, r.delta, r.gap, r.residual_sam, r.residual_relaxed, r.residual_prox, r.status
                );
            }
            Ok(o.passes())
        }
        Command::Metrics { predictions, common } => {
            let r = run_metrics(&predictions, common.out.as_deref())?;
            println!(
                "accuracy {} nll {} ece {} auroc {} n {}",
                r.accuracy,
                r.nll,
                r.ece,
                r.auroc.map_or("n/a".into(), |a| a.to_string()),
                r.n_examples
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
