//! Builds clients, datasets and the public set from a configuration.

use alloc::vec::Vec;

use super::config::{ArrivalSpec, FederationConfig, Scenario};
use crate::data::{
    build_public_set, dirichlet_partition, generate_classes, ClusterLayout, DomainSpec,
    LabeledDataset, Split,
};
use crate::nn::{ShapeSpec, SplitModel};
use crate::rng::derive_seed;
use crate::training::{ClientState, Role};
use crate::Result;

/// Everything a run needs before the first bootstrap round.
#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    pub layout: ClusterLayout,
    pub shape: ShapeSpec,
    /// Common starting point of every client.
    pub init: SplitModel,
    pub sources: Vec<ClientState>,
    pub target: ClientState,
    pub public: LabeledDataset,
}

pub fn layout(cfg: &FederationConfig) -> ClusterLayout {
    ClusterLayout {
        dim: cfg.data.dim,
        classes: (0..cfg.data.k_total).collect(),
        radius: cfg.data.radius,
        spread: cfg.data.spread,
        seed: cfg.data.layout_seed,
    }
}

pub fn shape(cfg: &FederationConfig) -> ShapeSpec {
    ShapeSpec::mlp(cfg.data.dim, &cfg.model.hidden, cfg.data.k_total)
}

pub(crate) fn client(
    cfg: &FederationConfig,
    id: usize,
    role: Role,
    train: LabeledDataset,
    test: LabeledDataset,
    model: SplitModel,
) -> ClientState {
    ClientState {
        id,
        role,
        train,
        test,
        memory_model: model.clone(),
        model,
        lambda: match role {
            Role::Source => cfg.lambda_for(cfg.method),
            Role::Target => 0.0,
        },
        batch_size: cfg.training.batch_size,
        eta: cfg.training.eta,
    }
}

/// Train/test pair over `classes` in `domain`; the test set covers the
/// classes actually present in the training rows.
pub(crate) fn client_data(
    cfg: &FederationConfig,
    layout: &ClusterLayout,
    domain: &DomainSpec,
    classes: &[usize],
    n_train: usize,
    stream: &str,
    index: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = generate_classes(
        layout,
        domain,
        classes,
        n_train,
        derive_seed(cfg.seed, stream, 2 * index),
        Split::Train,
    )?;
    let test = generate_classes(
        layout,
        domain,
        &train.classes(),
        cfg.data.test_per_client,
        derive_seed(cfg.seed, stream, 2 * index + 1),
        Split::Test,
    )?;
    Ok((train, test))
}

fn source_data(
    cfg: &FederationConfig,
    layout: &ClusterLayout,
) -> Result<Vec<(LabeledDataset, LabeledDataset)>> {
    let d = &cfg.data;
    let n = cfg.n_source_clients;
    match cfg.scenario {
        Scenario::StrongShift => (0..n)
            .map(|i| {
                client_data(
                    cfg,
                    layout,
                    &d.source_domains[i],
                    &d.source_classes,
                    d.train_per_source,
                    "source-data",
                    i as u64,
                )
            })
            .collect(),
        Scenario::MildShift | Scenario::MediumShift => {
            let domain = &d.source_domains[0];
            let pool = generate_classes(
                layout,
                domain,
                &d.source_classes,
                n * d.train_per_source,
                derive_seed(cfg.seed, "source-pool", 0),
                Split::Train,
            )?;
            let plan = dirichlet_partition(
                &pool,
                n,
                d.dirichlet_alpha,
                derive_seed(cfg.seed, "partition", 0),
            )?;
            (0..n)
                .map(|i| {
                    let train = plan.shard(&pool, i);
                    let test = generate_classes(
                        layout,
                        domain,
                        &train.classes(),
                        d.test_per_client,
                        derive_seed(cfg.seed, "source-test", i as u64),
                        Split::Test,
                    )?;
                    Ok((train, test))
                })
                .collect()
        }
    }
}

pub(crate) fn target_domain(cfg: &FederationConfig) -> &DomainSpec {
    match cfg.scenario {
        Scenario::MildShift => &cfg.data.source_domains[0],
        _ => &cfg.data.target_domain,
    }
}

pub fn build_federation(cfg: &FederationConfig) -> Result<Federation> {
    cfg.validate()?;
    let layout = layout(cfg);
    let shape = shape(cfg);
    let init = SplitModel::init(&shape, derive_seed(cfg.seed, "model-init", 0))?;
    let sources: Vec<ClientState> = source_data(cfg, &layout)?
        .into_iter()
        .enumerate()
        .map(|(i, (train, test))| client(cfg, i, Role::Source, train, test, init.clone()))
        .collect();
    let (train, test) = client_data(
        cfg,
        &layout,
        target_domain(cfg),
        &cfg.data.target_classes,
        cfg.data.target_train,
        "arrival-data",
        0,
    )?;
    let target = client(
        cfg,
        cfg.n_source_clients,
        Role::Target,
        train,
        test,
        init.clone(),
    );
    let trains: Vec<&LabeledDataset> = sources.iter().map(|c| &c.train).collect();
    let public = build_public_set(
        &trains,
        cfg.data.public_per_class,
        derive_seed(cfg.seed, "public", 0),
    )?;
    Ok(Federation {
        layout,
        shape,
        init,
        sources,
        target,
        public,
    })
}

/// Target client for the `index`-th sequential arrival. The first arrival
/// draws from the same streams as the configured target.
pub fn arrival_client(
    cfg: &FederationConfig,
    arrival: &ArrivalSpec,
    index: usize,
    id: usize,
    model: SplitModel,
) -> Result<ClientState> {
    let layout = layout(cfg);
    let domain = arrival
        .domain
        .as_ref()
        .unwrap_or(&cfg.data.source_domains[0]);
    let (train, test) = client_data(
        cfg,
        &layout,
        domain,
        &arrival.classes,
        arrival.train,
        "arrival-data",
        index as u64,
    )?;
    Ok(client(cfg, id, Role::Target, train, test, model))
}
