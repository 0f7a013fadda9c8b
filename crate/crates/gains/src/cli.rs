use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gains_core::data::Split;
use gains_core::discovery::{classify_knowledge, compute_diffs, Thresholds};
use gains_core::metrics;
use gains_core::orchestrator::{
    build_federation, prepare, run_ablation_afm, run_prepared, run_sequential, FederationConfig,
    Method, ThresholdSource,
};
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{load_config, to_toml, Preset};
use crate::dataset::{load_dataset, load_idx_pair};
use crate::report::emit_report;
use crate::{AppError, AppResult};

#[derive(Debug, Parser)]
#[command(
    name = "gains",
    version,
    about = "Federated domain adaptation for newly joining clients"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML run configuration; overrides --preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration used when no --config is given.
    #[arg(long, value_enum, default_value = "medium", global = true)]
    pub preset: Preset,
    /// Replaces the configuration's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> AppResult<FederationConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => self.preset.config(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("gains-out"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gains,
    GainsNoAfm,
    Fedavg,
    Fedprox,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap, admit the target and adapt; writes a full report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Defaults to the configuration's method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Proximal strength for --method fedprox.
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
    },
    /// Pre-train the source federation and save the global checkpoint.
    Bootstrap {
        #[command(flatten)]
        common: Common,
    },
    /// Compare two checkpoints on the public set and print the verdict.
    Discover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Dataset container; defaults to the configuration's public set.
        #[arg(long)]
        public: Option<PathBuf>,
        #[arg(long, requires = "t_c")]
        t_f: Option<f64>,
        #[arg(long, requires = "t_f")]
        t_c: Option<f64>,
    },
    /// Paired runs with and without the anti-forgetting term.
    AblateAfm {
        #[command(flatten)]
        common: Common,
    },
    /// Admit the configured arrivals one after another.
    Sequential {
        #[command(flatten)]
        common: Common,
    },
    /// Bootstrap and derive discovery thresholds from probe joiners.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on the configured clients or on IDX files.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, requires = "labels")]
        images: Option<PathBuf>,
        #[arg(long, requires = "images")]
        labels: Option<PathBuf>,
    },
    /// Print a configuration as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let p = dir.join(name);
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    fs::write(&p, s).map_err(|e| AppError::io(&p, e))
}

fn method(arg: MethodArg, mu: f64) -> Method {
    match arg {
        MethodArg::Gains => Method::Gains,
        MethodArg::GainsNoAfm => Method::GainsNoAfm,
        MethodArg::Fedavg => Method::FedAvg,
        MethodArg::Fedprox => Method::FedProx { mu },
    }
}

pub fn execute(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Run {
            common,
            method: m,
            mu,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(m) = m {
                cfg.method = method(m, mu);
            }
            cfg.validate()?;
            let prep = prepare(&cfg)?;
            let outcome = run_prepared(&cfg, &prep, cfg.method)?;
            let dir = common.out_dir();
            emit_report(&dir, &cfg, &outcome.log)?;
            save_checkpoint(&dir.join("global.ckpt.json"), &outcome.global)?;
            let log = &outcome.log;
            println!(
                "{} verdict={:?} bootstrap_rounds={} rounds={}",
                cfg.method.name(),
                log.verdict.kind,
                log.bootstrap_rounds,
                log.rounds.len()
            );
            if let Some(f) = log.final_metrics() {
                println!(
                    "final t_acc={:.6} s_acc={:.6} g_acc={:.6}",
                    f.t_acc, f.s_acc, f.g_acc
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Bootstrap { common } => {
            let cfg = common.resolve()?;
            let prep = prepare(&cfg)?;
            let dir = common.out_dir();
            fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
            save_checkpoint(&dir.join("source.ckpt.json"), &prep.bootstrap.global)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                rounds: usize,
                history: &'a [f64],
                thresholds: Thresholds,
                digest: String,
            }
            write_json(
                &dir,
                "bootstrap.json",
                &Summary {
                    rounds: prep.bootstrap.rounds,
                    history: &prep.bootstrap.history,
                    thresholds: prep.thresholds,
                    digest: prep.bootstrap.global.digest(),
                },
            )?;
            println!(
                "bootstrap rounds={} source_acc={:.6}",
                prep.bootstrap.rounds,
                prep.bootstrap.history.last().copied().unwrap_or(0.0)
            );
        }
        Command::Discover {
            common,
            source,
            target,
            public,
            t_f,
            t_c,
        } => {
            let cfg = common.resolve()?;
            let ws = load_checkpoint(&source)?;
            let wt = load_checkpoint(&target)?;
            let public = match public {
                Some(p) => load_dataset(&p)?,
                None => build_federation(&cfg)?.public,
            };
            let th = match (t_f, t_c, cfg.thresholds) {
                (Some(f), Some(c), _) => Thresholds::new(f, c)?,
                (_, _, ThresholdSource::Preset { t_f, t_c }) => Thresholds::new(t_f, t_c)?,
                (_, _, ThresholdSource::Calibrated { .. }) => prepare(&cfg)?.thresholds,
            };
            let verdict = classify_knowledge(compute_diffs(&ws, &wt, &public)?, th);
            let r = verdict.report;
            println!(
                "diff_f={:.6} diff_c={:.6} diff_e={:.6}",
                r.diff_f, r.diff_c, r.diff_e
            );
            println!("thresholds t_f={:.6} t_c={:.6}", th.t_f, th.t_c);
            println!("verdict {:?}", verdict.kind);
            if let Some(dir) = &common.out {
                write_json(dir, "discover.json", &(verdict, th))?;
            }
        }
        Command::AblateAfm { common } => {
            let cfg = common.resolve()?;
            let report = run_ablation_afm(&cfg)?;
            let dir = common.out_dir();
            emit_report(&dir.join("with_afm"), &cfg, &report.with_afm)?;
            emit_report(&dir.join("without_afm"), &cfg, &report.without_afm)?;
            write_json(&dir, "ablation.json", &report)?;
            println!("s_acc delta (afm - no afm) = {:.6}", report.s_acc_delta);
        }
        Command::Sequential { common } => {
            let cfg = common.resolve()?;
            if cfg.arrivals.is_empty() {
                return Err(AppError::Config("configuration lists no arrivals".into()));
            }
            let logs = run_sequential(&cfg, &cfg.arrivals)?;
            let dir = common.out_dir();
            for (k, log) in logs.iter().enumerate() {
                emit_report(&dir.join(format!("arrival-{}", k + 1)), &cfg, log)?;
                match log.final_metrics() {
                    Some(f) => println!(
                        "arrival {} {:?}: t_acc={:.6} s_acc={:.6} (before {:.6})",
                        k + 1,
                        log.verdict.kind,
                        f.t_acc,
                        f.s_acc,
                        log.source_acc_before
                    ),
                    None => println!("arrival {} {:?}", k + 1, log.verdict.kind),
                }
            }
        }
        Command::Calibrate { common } => {
            let mut cfg = common.resolve()?;
            if let ThresholdSource::Preset { .. } = cfg.thresholds {
                cfg.thresholds = ThresholdSource::Calibrated { probes: 3 };
            }
            let prep = prepare(&cfg)?;
            println!(
                "t_f={:.6} t_c={:.6}",
                prep.thresholds.t_f, prep.thresholds.t_c
            );
            if let Some(dir) = &common.out {
                write_json(dir, "thresholds.json", &prep.thresholds)?;
            }
        }
        Command::Eval {
            common,
            checkpoint,
            images,
            labels,
        } => {
            let model = load_checkpoint(&checkpoint)?;
            if let (Some(i), Some(l)) = (images, labels) {
                let ds = load_idx_pair(&i, &l, Split::Test)?;
                let acc = metrics::accuracy(&model, &ds)?;
                println!("samples={} accuracy={acc:.6}", ds.len());
                return Ok(());
            }
            let cfg = common.resolve()?;
            let fed = build_federation(&cfg)?;
            let mut clients: Vec<_> = fed.sources.iter().collect();
            clients.push(&fed.target);
            let m = metrics::evaluate(&model, &clients, 0)?;
            println!(
                "t_acc={:.6} s_acc={:.6} s_acc_weighted={:.6} g_acc={:.6} global_loss={:.6} grad_norm={:.6}",
                m.t_acc, m.s_acc, m.s_acc_weighted, m.g_acc, m.global_loss, m.grad_norm
            );
            if let Some(dir) = &common.out {
                write_json(dir, "eval.json", &m)?;
            }
        }
        Command::Config { common } => {
            print!("{}", to_toml(&common.resolve()?)?);
        }
    }
    Ok(())
}
