//! Federation driver: bootstrap the source federation, admit a newcomer,
//! discover what it brings and adapt the global model to it.

mod config;
mod scenario;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use config::{
    ArrivalSpec, BootstrapConfig, DataConfig, FederationConfig, Method, ModelConfig, Scenario,
    ThresholdSource, TrainingConfig, CONFIG_SCHEMA_VERSION, DEFAULT_LAMBDA,
};
pub use scenario::{arrival_client, build_federation, layout, shape, Federation};

use crate::aggregation::{
    aggregate_class_classifier, aggregate_class_encoder, aggregate_domain, aggregate_fedavg,
    classifier_contributions, encoder_contributions, target_fraction, ContributionSet,
};
use crate::data::LabeledDataset;
use crate::discovery::{
    calibrate_thresholds, classify_knowledge, compute_diffs, per_client_diffs, DiscoveryCost,
    KnowledgeKind, KnowledgeVerdict, LabeledReport, Thresholds,
};
use crate::metrics::{self, RoundMetrics};
use crate::nn::SplitModel;
use crate::rng::derive_seed;
use crate::training::{
    local_sgd, snapshot_memory, train_proximal, train_source_local, train_target_local,
    ClientState, Role,
};
use crate::{Error, Result};

/// Pre-trained source federation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    /// `W^S`.
    pub global: SplitModel,
    /// Every client holds its last local model `W_n^S(0,0)` as both model
    /// and memory model.
    pub sources: Vec<ClientState>,
    pub rounds: usize,
    /// Pooled source test accuracy after every round.
    pub history: Vec<f64>,
}

/// Result of the discovery phase for one newcomer.
#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub verdict: KnowledgeVerdict,
    /// `W^T` after `Q` local epochs from `W^S`.
    pub target_model: SplitModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub method: Method,
    pub scenario: Scenario,
    pub seed: u64,
    pub bootstrap_rounds: usize,
    pub thresholds: Thresholds,
    pub verdict: KnowledgeVerdict,
    /// No new knowledge: the original model serves the newcomer as is and
    /// `rounds` holds a single evaluation of it.
    pub early_stop: bool,
    /// S-Acc of the global model before the newcomer arrived.
    pub source_acc_before: f64,
    pub rounds: Vec<RoundMetrics>,
    pub contributions: Vec<ContributionSet>,
    pub discovery_cost: DiscoveryCost,
    /// SHA-256 of the final global model.
    pub final_digest: String,
}

impl RunLog {
    pub fn final_metrics(&self) -> Option<&RoundMetrics> {
        self.rounds.last()
    }
}

/// State after a full adaptation, used to chain sequential arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationOutcome {
    pub log: RunLog,
    pub global: SplitModel,
    pub sources: Vec<ClientState>,
    pub target: ClientState,
}

/// Federation built, bootstrapped and with thresholds resolved; shared by
/// paired runs so that every arm starts from the same `W^S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub federation: Federation,
    pub bootstrap: Bootstrap,
    pub thresholds: Thresholds,
}

fn clients<'a>(sources: &'a [ClientState], target: &'a ClientState) -> Vec<&'a ClientState> {
    let mut all: Vec<&ClientState> = sources.iter().collect();
    all.push(target);
    all
}

fn pooled_source_accuracy(model: &SplitModel, sources: &[ClientState]) -> Result<f64> {
    let (mut hit, mut total) = (0, 0);
    for c in sources {
        hit += metrics::correct(model, &c.test)?;
        total += c.test.len();
    }
    Ok(hit as f64 / total as f64)
}

fn mean_source_accuracy(model: &SplitModel, sources: &[ClientState]) -> Result<f64> {
    let refs: Vec<&ClientState> = sources.iter().collect();
    let accs = metrics::source_accuracies(model, &refs)?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// FedAvg over the source clients from `init` until pooled source accuracy
/// gains less than `min_gain` over `window` rounds (or `max_rounds`).
pub fn bootstrap_sources(
    cfg: &FederationConfig,
    sources: &[ClientState],
    init: &SplitModel,
) -> Result<Bootstrap> {
    if sources.is_empty() {
        return Err(Error::Config(
            "bootstrap needs at least one source client".into(),
        ));
    }
    let b = cfg.bootstrap;
    if b.max_rounds == 0 || b.window == 0 {
        return Err(Error::Config(
            "bootstrap needs max_rounds and window >= 1".into(),
        ));
    }
    let sizes: Vec<usize> = sources.iter().map(|c| c.train.len()).collect();
    let mut global = init.clone();
    let mut locals = Vec::new();
    let mut history = Vec::new();
    for round in 0..b.max_rounds {
        let seed = derive_seed(cfg.seed, "bootstrap", round as u64);
        locals = sources
            .iter()
            .map(|c| {
                local_sgd(
                    &global,
                    &c.train,
                    c.schedule(cfg.local_epochs),
                    None,
                    seed,
                    c.id as u64,
                )
                .map(|r| r.model)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&SplitModel> = locals.iter().collect();
        global = aggregate_fedavg(&refs, &sizes)?;
        if !global.all_finite() {
            return Err(Error::Numeric(format!(
                "bootstrap diverged in round {round}"
            )));
        }
        history.push(pooled_source_accuracy(&global, sources)?);
        if round >= b.window && history[round] - history[round - b.window] < b.min_gain {
            break;
        }
    }
    let sources = sources
        .iter()
        .zip(locals)
        .map(|(c, local)| {
            let mut next = c.clone();
            next.model = local;
            snapshot_memory(&next)
        })
        .collect();
    Ok(Bootstrap {
        rounds: history.len(),
        global,
        sources,
        history,
    })
}

/// Discovery phase: the newcomer trains `Q` epochs from `global`, the server
/// compares the two models on the public set.
pub fn admit_client(
    cfg: &FederationConfig,
    global: &SplitModel,
    target: &ClientState,
    public: &LabeledDataset,
    thresholds: Thresholds,
) -> Result<Admission> {
    let mut t = target.clone();
    t.model = global.clone();
    let target_model = train_target_local(
        &t,
        cfg.discovery_epochs,
        derive_seed(cfg.seed, "discovery", t.id as u64),
    )?;
    let report = compute_diffs(global, &target_model, public)?;
    Ok(Admission {
        verdict: classify_knowledge(report, thresholds),
        target_model,
    })
}

/// Diff reports of probe joiners of every available kind against `global`.
///
/// Same-distribution probes draw the source classes from the source domains
/// in turn; class probes draw growing prefixes of the classes no source
/// holds (none when the sources cover the whole head); domain probes draw the
/// source classes from the probe domain.
pub fn probe_reports(
    cfg: &FederationConfig,
    global: &SplitModel,
    public: &LabeledDataset,
    probes: usize,
) -> Result<Vec<LabeledReport>> {
    let d = &cfg.data;
    let layout = layout(cfg);
    let held_out: Vec<usize> = (0..d.k_total)
        .filter(|c| !d.source_classes.contains(c))
        .collect();
    let mut out = Vec::new();
    for p in 0..probes {
        let mut kinds = Vec::new();
        kinds.push((
            KnowledgeKind::NoNewKnowledge,
            &d.source_domains[p % d.source_domains.len()],
            d.source_classes.clone(),
        ));
        if !held_out.is_empty() {
            let take = p % held_out.len() + 1;
            kinds.push((
                KnowledgeKind::ClassIncrement,
                &d.source_domains[0],
                held_out[..take].to_vec(),
            ));
        }
        kinds.push((
            KnowledgeKind::DomainIncrement,
            &d.probe_domain,
            d.source_classes.clone(),
        ));
        for (k, (kind, domain, classes)) in kinds.into_iter().enumerate() {
            let index = (3 * p + k) as u64;
            let (train, test) = scenario::client_data(
                cfg,
                &layout,
                domain,
                &classes,
                d.target_train,
                "probe-data",
                index,
            )?;
            let probe = scenario::client(
                cfg,
                10_000 + index as usize,
                Role::Target,
                train,
                test,
                global.clone(),
            );
            let admission = admit_client(cfg, global, &probe, public, Thresholds::DIGIT_FIVE)?;
            out.push(LabeledReport {
                kind,
                report: admission.verdict.report,
            });
        }
    }
    Ok(out)
}

/// Builds the federation, bootstraps it and resolves the thresholds.
pub fn prepare(cfg: &FederationConfig) -> Result<Prepared> {
    let federation = build_federation(cfg)?;
    let bootstrap = bootstrap_sources(cfg, &federation.sources, &federation.init)?;
    let thresholds = match cfg.thresholds {
        ThresholdSource::Preset { t_f, t_c } => Thresholds::new(t_f, t_c)?,
        ThresholdSource::Calibrated { probes } => calibrate_thresholds(&probe_reports(
            cfg,
            &bootstrap.global,
            &federation.public,
            probes,
        )?)?,
    };
    Ok(Prepared {
        federation,
        bootstrap,
        thresholds,
    })
}

/// Classes held by any source client.
fn source_class_set(sources: &[ClientState]) -> Vec<usize> {
    let set: BTreeSet<usize> = sources.iter().flat_map(|c| c.train.classes()).collect();
    set.into_iter().collect()
}

struct RunContext<'a> {
    cfg: &'a FederationConfig,
    method: Method,
    thresholds: Thresholds,
    bootstrap_rounds: usize,
    public: &'a LabeledDataset,
}

/// Contribution-driven adaptation rounds (`method` Gains or GainsNoAfm).
///
/// `sources` hold their latest uploads (at entry: the pre-arrival model) and
/// `target.model` is `W^T` from discovery. Every round aggregates, evaluates
/// and, except after the last aggregation, runs `R` local epochs on every
/// client.
fn adapt_gains(
    ctx: &RunContext<'_>,
    verdict: KnowledgeVerdict,
    global_before: &SplitModel,
    mut sources: Vec<ClientState>,
    mut target: ClientState,
) -> Result<AdaptationOutcome> {
    let cfg = ctx.cfg;
    let kind = verdict.kind;
    let lambda = cfg.lambda_for(ctx.method);
    for s in &mut sources {
        s.lambda = lambda;
    }
    let ks = source_class_set(&sources);
    let kt: Vec<usize> = target
        .train
        .classes()
        .into_iter()
        .filter(|c| !ks.contains(c))
        .collect();
    let sizes: Vec<usize> = sources.iter().map(|c| c.train.len()).collect();
    let beta = target_fraction(&sizes, target.train.len());
    let source_acc_before = mean_source_accuracy(global_before, &sources)?;

    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut contributions = Vec::with_capacity(cfg.rounds);
    let mut cost = DiscoveryCost::default();
    let mut global = global_before.clone();
    for i in 0..cfg.rounds {
        let uploads: Vec<&SplitModel> = sources.iter().map(|c| &c.model).collect();
        let (reports, round_cost) = per_client_diffs(&target.model, &uploads, ctx.public)?;
        accumulate(&mut cost, round_cost);
        let diff_f: Vec<f64> = reports.iter().map(|r| r.diff_f).collect();
        let encoder_weights = encoder_contributions(&diff_f, &sizes, target.train.len())?;
        let cs;
        (global, cs) = match kind {
            KnowledgeKind::DomainIncrement => {
                let diff_c: Vec<f64> = reports.iter().map(|r| r.diff_c).collect();
                let cs = ContributionSet {
                    round: i,
                    encoder_weights,
                    classifier_weights: Some(classifier_contributions(
                        &diff_c,
                        &sizes,
                        target.train.len(),
                    )?),
                    target_beta: beta,
                };
                (aggregate_domain(&uploads, &target.model, &cs)?, cs)
            }
            KnowledgeKind::ClassIncrement => {
                let encoder =
                    aggregate_class_encoder(&uploads, &target.model, &encoder_weights, beta)?;
                let classifier =
                    aggregate_class_classifier(&uploads, &target.model, &sizes, &ks, &kt)?;
                let cs = ContributionSet {
                    round: i,
                    encoder_weights,
                    classifier_weights: None,
                    target_beta: beta,
                };
                (
                    SplitModel {
                        encoder,
                        classifier,
                    },
                    cs,
                )
            }
            KnowledgeKind::NoNewKnowledge => {
                return Err(Error::Precondition(
                    "no new knowledge: the newcomer is served by the original model".into(),
                ))
            }
        };
        if !global.all_finite() {
            return Err(Error::Numeric(format!(
                "aggregated model is not finite in round {i}"
            )));
        }
        rounds.push(metrics::evaluate(&global, &clients(&sources, &target), i)?);
        contributions.push(cs);
        if i + 1 < cfg.rounds {
            let seed = derive_seed(cfg.seed, "round", i as u64);
            for s in &mut sources {
                s.model = global.clone();
                s.model = train_source_local(s, cfg.local_epochs, seed)?;
            }
            target.model = global.clone();
            target.model = train_target_local(&target, cfg.local_epochs, seed)?;
        }
    }
    for c in sources.iter_mut().chain(core::iter::once(&mut target)) {
        c.model = global.clone();
    }
    let log = RunLog {
        method: ctx.method,
        scenario: cfg.scenario,
        seed: cfg.seed,
        bootstrap_rounds: ctx.bootstrap_rounds,
        thresholds: ctx.thresholds,
        verdict,
        early_stop: false,
        source_acc_before,
        rounds,
        contributions,
        discovery_cost: cost,
        final_digest: global.digest(),
    };
    Ok(AdaptationOutcome {
        log,
        global,
        sources,
        target,
    })
}

fn accumulate(total: &mut DiscoveryCost, c: DiscoveryCost) {
    total.source_forward_passes += c.source_forward_passes;
    total.target_forward_passes += c.target_forward_passes;
    total.public_rows_encoded += c.public_rows_encoded;
    total.forward_macs += c.forward_macs;
    total.parameter_distance_computations += c.parameter_distance_computations;
    total.parameters_compared += c.parameters_compared;
}

/// FedAvg / FedProx: every round all clients train `R` epochs from the
/// global model, which is then replaced by the size-weighted mean.
fn adapt_baseline(
    ctx: &RunContext<'_>,
    verdict: KnowledgeVerdict,
    global_before: &SplitModel,
    mut sources: Vec<ClientState>,
    mut target: ClientState,
) -> Result<AdaptationOutcome> {
    let cfg = ctx.cfg;
    let mu = match ctx.method {
        Method::FedAvg => 0.0,
        Method::FedProx { mu } => mu,
        m => return Err(Error::Config(format!("{} is not a baseline", m.name()))),
    };
    let source_acc_before = mean_source_accuracy(global_before, &sources)?;
    let mut sizes: Vec<usize> = sources.iter().map(|c| c.train.len()).collect();
    let beta = target_fraction(&sizes, target.train.len());
    sizes.push(target.train.len());
    let total: usize = sizes.iter().sum();
    let fractions: Vec<f64> = sizes[..sizes.len() - 1]
        .iter()
        .map(|&s| s as f64 / total as f64)
        .collect();

    let mut global = global_before.clone();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut contributions = Vec::with_capacity(cfg.rounds);
    for i in 0..cfg.rounds {
        let seed = derive_seed(cfg.seed, "round", i as u64);
        let mut locals = Vec::with_capacity(sizes.len());
        for c in sources.iter_mut().chain(core::iter::once(&mut target)) {
            c.model = global.clone();
            c.model = train_proximal(c, &global, mu, cfg.local_epochs, seed)?;
            locals.push(c.model.clone());
        }
        let refs: Vec<&SplitModel> = locals.iter().collect();
        global = aggregate_fedavg(&refs, &sizes)?;
        if !global.all_finite() {
            return Err(Error::Numeric(format!(
                "aggregated model is not finite in round {i}"
            )));
        }
        rounds.push(metrics::evaluate(&global, &clients(&sources, &target), i)?);
        contributions.push(ContributionSet {
            round: i,
            encoder_weights: fractions.clone(),
            classifier_weights: Some(fractions.clone()),
            target_beta: beta,
        });
    }
    for c in sources.iter_mut().chain(core::iter::once(&mut target)) {
        c.model = global.clone();
    }
    let log = RunLog {
        method: ctx.method,
        scenario: cfg.scenario,
        seed: cfg.seed,
        bootstrap_rounds: ctx.bootstrap_rounds,
        thresholds: ctx.thresholds,
        verdict,
        early_stop: false,
        source_acc_before,
        rounds,
        contributions,
        discovery_cost: DiscoveryCost::default(),
        final_digest: global.digest(),
    };
    Ok(AdaptationOutcome {
        log,
        global,
        sources,
        target,
    })
}

/// Adaptation rounds for an admitted newcomer against the prepared `W^S`.
///
/// Gains methods start from the discovery uploads (`target.model` is `W^T`);
/// the baselines restart every client from `W^S`. A NoNewKnowledge verdict is
/// a precondition error for the Gains methods.
pub fn run_adaptation(
    cfg: &FederationConfig,
    method: Method,
    prep: &Prepared,
    verdict: KnowledgeVerdict,
    sources: Vec<ClientState>,
    target: ClientState,
) -> Result<AdaptationOutcome> {
    let ctx = RunContext {
        cfg,
        method,
        thresholds: prep.thresholds,
        bootstrap_rounds: prep.bootstrap.rounds,
        public: &prep.federation.public,
    };
    let global = &prep.bootstrap.global;
    if method.is_gains() {
        adapt_gains(&ctx, verdict, global, sources, target)
    } else {
        adapt_baseline(&ctx, verdict, global, sources, target)
    }
}

fn early_stop_log(
    ctx: &RunContext<'_>,
    verdict: KnowledgeVerdict,
    global: &SplitModel,
    sources: &[ClientState],
    target: &ClientState,
) -> Result<RunLog> {
    Ok(RunLog {
        method: ctx.method,
        scenario: ctx.cfg.scenario,
        seed: ctx.cfg.seed,
        bootstrap_rounds: ctx.bootstrap_rounds,
        thresholds: ctx.thresholds,
        verdict,
        early_stop: true,
        source_acc_before: mean_source_accuracy(global, sources)?,
        rounds: alloc::vec![metrics::evaluate(global, &clients(sources, target), 0)?],
        contributions: Vec::new(),
        discovery_cost: DiscoveryCost::default(),
        final_digest: global.digest(),
    })
}

/// Admission plus adaptation for the configured newcomer, starting from a
/// shared preparation.
pub fn run_prepared(
    cfg: &FederationConfig,
    prep: &Prepared,
    method: Method,
) -> Result<AdaptationOutcome> {
    let fed = &prep.federation;
    let boot = &prep.bootstrap;
    let mut target = fed.target.clone();
    let admission = admit_client(cfg, &boot.global, &target, &fed.public, prep.thresholds)?;
    let ctx = RunContext {
        cfg,
        method,
        thresholds: prep.thresholds,
        bootstrap_rounds: boot.rounds,
        public: &fed.public,
    };
    let verdict = admission.verdict;
    if method.is_gains() && verdict.kind == KnowledgeKind::NoNewKnowledge {
        target.model = boot.global.clone();
        let log = early_stop_log(&ctx, verdict, &boot.global, &boot.sources, &target)?;
        return Ok(AdaptationOutcome {
            log,
            global: boot.global.clone(),
            sources: boot.sources.clone(),
            target,
        });
    }
    target.model = admission.target_model;
    if method.is_gains() {
        adapt_gains(&ctx, verdict, &boot.global, boot.sources.clone(), target)
    } else {
        adapt_baseline(&ctx, verdict, &boot.global, boot.sources.clone(), target)
    }
}

/// Full run of `cfg.method`.
pub fn run_federation(cfg: &FederationConfig) -> Result<RunLog> {
    let prep = prepare(cfg)?;
    Ok(run_prepared(cfg, &prep, cfg.method)?.log)
}

/// Paired Gains runs with and without the anti-forgetting term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_afm: RunLog,
    pub without_afm: RunLog,
    /// Final S-Acc with AFM minus without, as a fraction.
    pub s_acc_delta: f64,
}

pub fn run_ablation_afm(cfg: &FederationConfig) -> Result<AblationReport> {
    let prep = prepare(cfg)?;
    let with_afm = run_prepared(cfg, &prep, Method::Gains)?.log;
    let without_afm = run_prepared(cfg, &prep, Method::GainsNoAfm)?.log;
    let final_s = |l: &RunLog| l.final_metrics().map_or(0.0, |m| m.s_acc);
    Ok(AblationReport {
        s_acc_delta: final_s(&with_afm) - final_s(&without_afm),
        with_afm,
        without_afm,
    })
}

/// End state of a sequential run.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialOutcome {
    pub logs: Vec<RunLog>,
    pub global: SplitModel,
    /// Original sources followed by the promoted newcomers.
    pub sources: Vec<ClientState>,
}

/// Admits `arrivals` one after another. After each adaptation the newcomer
/// becomes a source client holding the adapted global model, and every
/// source re-snapshots its memory before the next arrival.
pub fn run_sequential(cfg: &FederationConfig, arrivals: &[ArrivalSpec]) -> Result<Vec<RunLog>> {
    if arrivals.is_empty() {
        return Ok(Vec::new());
    }
    Ok(run_sequential_prepared(cfg, &prepare(cfg)?, arrivals)?.logs)
}

pub fn run_sequential_prepared(
    cfg: &FederationConfig,
    prep: &Prepared,
    arrivals: &[ArrivalSpec],
) -> Result<SequentialOutcome> {
    let fed = &prep.federation;
    let mut global = prep.bootstrap.global.clone();
    let mut sources = prep.bootstrap.sources.clone();
    let mut logs = Vec::with_capacity(arrivals.len());
    for (k, arrival) in arrivals.iter().enumerate() {
        sources = sources.iter().map(snapshot_memory).collect();
        let mut target = arrival_client(cfg, arrival, k, sources.len(), global.clone())?;
        let admission = admit_client(cfg, &global, &target, &fed.public, prep.thresholds)?;
        let ctx = RunContext {
            cfg,
            method: cfg.method,
            thresholds: prep.thresholds,
            bootstrap_rounds: prep.bootstrap.rounds,
            public: &fed.public,
        };
        if cfg.method.is_gains() && admission.verdict.kind == KnowledgeKind::NoNewKnowledge {
            logs.push(early_stop_log(
                &ctx,
                admission.verdict,
                &global,
                &sources,
                &target,
            )?);
            continue;
        }
        target.model = admission.target_model;
        let outcome = if cfg.method.is_gains() {
            adapt_gains(&ctx, admission.verdict, &global, sources, target)?
        } else {
            adapt_baseline(&ctx, admission.verdict, &global, sources, target)?
        };
        logs.push(outcome.log);
        global = outcome.global;
        sources = outcome.sources;
        let mut promoted = outcome.target;
        promoted.role = Role::Source;
        promoted.lambda = cfg.lambda_for(cfg.method);
        sources.push(snapshot_memory(&promoted));
    }
    Ok(SequentialOutcome {
        logs,
        global,
        sources,
    })
}
