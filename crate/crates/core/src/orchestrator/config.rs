use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{DomainSpec, Transform};
use crate::discovery::Thresholds;
use crate::{Error, Result};

/// Default anti-forgetting strength. At 0.1 the pull dominates the
/// cross-entropy gradient of a converged desk-scale model and blocks
/// adaptation to a new domain.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Version of the configuration key set.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// One domain; the target holds classes the sources never saw.
    MildShift,
    /// All sources share one domain, the target brings another.
    MediumShift,
    /// Every source client is its own domain; the target is a further one.
    StrongShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Gains,
    /// Gains with the anti-forgetting term switched off (`λ = 0`).
    GainsNoAfm,
    FedAvg,
    FedProx {
        mu: f64,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gains => "gains",
            Method::GainsNoAfm => "gains_no_afm",
            Method::FedAvg => "fedavg",
            Method::FedProx { .. } => "fedprox",
        }
    }

    pub fn is_gains(&self) -> bool {
        matches!(self, Method::Gains | Method::GainsNoAfm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSource {
    Preset {
        t_f: f64,
        t_c: f64,
    },
    /// Probe joiners of every kind against the bootstrapped model and place
    /// the thresholds between the observed bands.
    Calibrated {
        probes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder widths; the last is the feature dimension.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub eta: f64,
    pub batch_size: usize,
    /// Anti-forgetting strength.
    pub lambda: f64,
}

impl TrainingConfig {
    /// Optimiser settings of the digit experiments: SGD, η = 0.005,
    /// batch 128.
    pub const PAPER_DIGIT_FIVE: TrainingConfig = TrainingConfig {
        eta: 0.005,
        batch_size: 128,
        lambda: DEFAULT_LAMBDA,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub max_rounds: usize,
    /// Rounds over which the plateau gain is measured.
    pub window: usize,
    /// Minimum accuracy gain (fraction) over `window` rounds to keep going.
    pub min_gain: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            max_rounds: 100,
            window: 5,
            min_gain: 0.002,
        }
    }
}

/// Synthetic data layout and the way it is split between clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub dim: usize,
    /// Classifier channels, fixed for the whole run.
    pub k_total: usize,
    pub radius: f64,
    pub spread: f64,
    pub layout_seed: u64,
    pub source_classes: Vec<usize>,
    pub target_classes: Vec<usize>,
    /// One domain for mild/medium shift, one per source client for strong
    /// shift.
    pub source_domains: Vec<DomainSpec>,
    pub target_domain: DomainSpec,
    /// Domain used for calibration probes; never the target's.
    pub probe_domain: DomainSpec,
    /// Training rows per source client (the pooled source set holds
    /// `n_source_clients × train_per_source`).
    pub train_per_source: usize,
    pub target_train: usize,
    pub test_per_client: usize,
    pub public_per_class: usize,
    pub dirichlet_alpha: f64,
}

/// One later joiner of a sequential run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    pub classes: Vec<usize>,
    /// Defaults to the first source domain.
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    pub train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub method: Method,
    pub seed: u64,
    pub n_source_clients: usize,
    /// Adaptation rounds `I`.
    pub rounds: usize,
    /// Local epochs per round `R`.
    pub local_epochs: usize,
    /// Target epochs during discovery `Q`.
    pub discovery_epochs: usize,
    pub thresholds: ThresholdSource,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub arrivals: Vec<ArrivalSpec>,
}

fn domain(id: &str, transform: Transform, seed: u64) -> DomainSpec {
    DomainSpec {
        id: id.into(),
        transform,
        seed,
    }
}

impl FederationConfig {
    /// Pinned desk-scale setup for `scenario`: 10 classes in 16 dimensions,
    /// a 32-unit ReLU encoder and four source clients.
    pub fn desk(scenario: Scenario) -> FederationConfig {
        let base = domain("base", Transform::Identity, 0);
        // A shifted-domain joiner needs a larger share of the aggregate to
        // adapt within a few rounds; class joiners only add rows.
        let target_train = match scenario {
            Scenario::MildShift => 200,
            _ => 400,
        };
        let (source_classes, target_classes, source_domains, target_domain) = match scenario {
            Scenario::MildShift => (
                vec![0, 1, 2, 3, 4, 5],
                vec![6, 7, 8, 9],
                vec![base.clone()],
                base.clone(),
            ),
            Scenario::MediumShift => (
                (0..10).collect(),
                (0..10).collect(),
                vec![base.clone()],
                domain("rotated-60", Transform::Rotation { degrees: 60.0 }, 17),
            ),
            Scenario::StrongShift => (
                (0..10).collect(),
                (0..10).collect(),
                vec![
                    base.clone(),
                    domain("rotated", Transform::Rotation { degrees: 25.0 }, 1),
                    domain("scaled", Transform::AffineScale { factor: 1.4 }, 2),
                    domain("blended", Transform::BackgroundBlend { weight: 0.25 }, 3),
                ],
                domain("rotated-60", Transform::Rotation { degrees: 60.0 }, 17),
            ),
        };
        FederationConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario,
            method: Method::Gains,
            seed: 7,
            n_source_clients: 4,
            rounds: 20,
            local_epochs: 2,
            discovery_epochs: 5,
            thresholds: ThresholdSource::Calibrated { probes: 3 },
            model: ModelConfig { hidden: vec![32] },
            training: TrainingConfig {
                eta: 0.05,
                batch_size: 32,
                lambda: DEFAULT_LAMBDA,
            },
            bootstrap: BootstrapConfig::default(),
            data: DataConfig {
                dim: 16,
                k_total: 10,
                radius: 3.0,
                spread: 0.5,
                layout_seed: 3,
                source_classes,
                target_classes,
                source_domains,
                target_domain,
                probe_domain: domain("probe", Transform::Rotation { degrees: -60.0 }, 101),
                train_per_source: 200,
                target_train,
                test_per_client: 200,
                public_per_class: 24,
                dirichlet_alpha: 0.1,
            },
            arrivals: Vec::new(),
        }
    }

    /// Mild-shift federation over classes 0–3 followed by three
    /// class-increment arrivals bringing {4,5}, {6,7} and {8,9}.
    pub fn desk_sequential() -> FederationConfig {
        let mut cfg = FederationConfig::desk(Scenario::MildShift);
        cfg.data.source_classes = vec![0, 1, 2, 3];
        cfg.data.target_classes = vec![4, 5];
        cfg.arrivals = [[4, 5], [6, 7], [8, 9]]
            .iter()
            .map(|c| ArrivalSpec {
                classes: c.to_vec(),
                domain: None,
                train: cfg.data.target_train,
            })
            .collect();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return fail(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if self.local_epochs == 0 || self.discovery_epochs == 0 {
            return fail("local_epochs and discovery_epochs must be at least 1".into());
        }
        if self.n_source_clients == 0 {
            return fail("need at least one source client".into());
        }
        let t = &self.training;
        if !(t.eta > 0.0 && t.eta.is_finite())
            || t.batch_size == 0
            || !(t.lambda >= 0.0 && t.lambda.is_finite())
        {
            return fail("training needs eta > 0, batch_size > 0, lambda >= 0".into());
        }
        if let Method::FedProx { mu } = self.method {
            if !(mu >= 0.0 && mu.is_finite()) {
                return fail(format!("fedprox mu must be non-negative, got {mu}"));
            }
        }
        match self.thresholds {
            ThresholdSource::Preset { t_f, t_c } => {
                Thresholds::new(t_f, t_c)?;
            }
            ThresholdSource::Calibrated { probes: 0 } => {
                return fail("calibration needs at least one probe per joiner kind".into());
            }
            ThresholdSource::Calibrated { .. } => {}
        }
        let d = &self.data;
        if d.k_total < 2 || d.dim == 0 {
            return fail("data needs k_total >= 2 and dim >= 1".into());
        }
        for c in d.source_classes.iter().chain(&d.target_classes) {
            if *c >= d.k_total {
                return fail(format!("class {c} outside [0, {})", d.k_total));
            }
        }
        if d.source_classes.is_empty() || d.target_classes.is_empty() {
            return fail("source and target class sets must be non-empty".into());
        }
        if d.source_domains.is_empty() {
            return fail("need at least one source domain".into());
        }
        if d.train_per_source == 0 || d.target_train == 0 || d.test_per_client == 0 {
            return fail("dataset sizes must be positive".into());
        }
        let src: BTreeSet<_> = d.source_classes.iter().collect();
        match self.scenario {
            Scenario::MildShift => {
                if d.source_domains.len() != 1 {
                    return fail("mild shift uses exactly one domain".into());
                }
                if d.target_classes.iter().any(|c| src.contains(c)) {
                    return fail(
                        "mild shift needs target classes disjoint from source classes".into(),
                    );
                }
            }
            Scenario::MediumShift => {
                if d.source_domains.len() != 1 {
                    return fail("medium shift uses exactly one source domain".into());
                }
                if d.target_domain.id == d.source_domains[0].id {
                    return fail(
                        "medium shift needs a target domain distinct from the source".into(),
                    );
                }
            }
            Scenario::StrongShift => {
                if d.source_domains.len() < 2 || d.source_domains.len() != self.n_source_clients {
                    return fail(
                        "strong shift needs one distinct domain per source client (at least two)"
                            .into(),
                    );
                }
                let ids: BTreeSet<_> = d.source_domains.iter().map(|s| &s.id).collect();
                if ids.len() != d.source_domains.len() || ids.contains(&d.target_domain.id) {
                    return fail(
                        "strong shift domains must all be distinct from each other and the target"
                            .into(),
                    );
                }
            }
        }
        for a in &self.arrivals {
            if a.classes.is_empty() || a.train == 0 || a.classes.iter().any(|&c| c >= d.k_total) {
                return fail(
                    "arrival needs classes inside the head and a positive train size".into(),
                );
            }
        }
        Ok(())
    }

    pub fn lambda_for(&self, method: Method) -> f64 {
        match method {
            Method::Gains => self.training.lambda,
            _ => 0.0,
        }
    }
}
