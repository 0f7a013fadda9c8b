//! Server-side knowledge discovery.
//!
//! After a joining client fine-tunes the source model, the server compares
//! the two on the public dataset:
//!
//! - `diff_f`: Manhattan distance between the stacked encoder outputs,
//!   summed (not averaged) over every public sample and feature.
//! - `diff_c`: Euclidean distance between the flattened classifiers.
//! - `diff_e`: Euclidean distance between the flattened encoders.
//!
//! A large feature shift means the newcomer brings new knowledge; a large
//! classifier shift on top of it means that knowledge is new classes rather
//! than a new domain.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::{self, param_distance, Matrix2D, SplitModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub diff_f: f64,
    pub diff_c: f64,
    pub diff_e: f64,
    pub public_set_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_f: f64,
    pub t_c: f64,
}

impl Thresholds {
    /// Reference values for LeNet-scale digit models.
    pub const DIGIT_FIVE: Thresholds = Thresholds {
        t_f: 1000.0,
        t_c: 0.25,
    };
    /// Feature threshold used for the text models; those experiments never
    /// reach the classifier test, so `t_c` repeats the digit value.
    pub const AMAZON_REVIEW: Thresholds = Thresholds {
        t_f: 400.0,
        t_c: 0.25,
    };

    pub fn new(t_f: f64, t_c: f64) -> Result<Thresholds> {
        if !(t_f > 0.0 && t_c > 0.0 && t_f.is_finite() && t_c.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "thresholds must be positive and finite, got t_f={t_f} t_c={t_c}"
            )));
        }
        Ok(Thresholds { t_f, t_c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeKind {
    NoNewKnowledge,
    DomainIncrement,
    ClassIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeVerdict {
    pub kind: KnowledgeKind,
    pub report: DiffReport,
}

/// Sum of absolute differences over two equally shaped matrices.
pub fn manhattan(a: &Matrix2D, b: &Matrix2D) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

pub fn compute_diffs(
    source: &SplitModel,
    target: &SplitModel,
    public: &LabeledDataset,
) -> Result<DiffReport> {
    source.check_congruent(target, "discovery")?;
    if public.is_empty() {
        return Err(Error::Input("public dataset is empty".into()));
    }
    let fs = nn::encode(source, &public.samples)?;
    let ft = nn::encode(target, &public.samples)?;
    Ok(DiffReport {
        diff_f: manhattan(&fs, &ft),
        diff_c: param_distance(source.classifier_params(), target.classifier_params()),
        diff_e: param_distance(source.encoder_params(), target.encoder_params()),
        public_set_size: public.len(),
    })
}

pub fn classify_knowledge(report: DiffReport, th: Thresholds) -> KnowledgeVerdict {
    let kind = if report.diff_f <= th.t_f {
        KnowledgeKind::NoNewKnowledge
    } else if report.diff_c > th.t_c {
        KnowledgeKind::ClassIncrement
    } else {
        KnowledgeKind::DomainIncrement
    };
    KnowledgeVerdict { kind, report }
}

/// A bootstrap measurement labelled with the kind of joiner that produced
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub kind: KnowledgeKind,
    pub report: DiffReport,
}

/// Places each threshold at the geometric mean of the two band edges it has
/// to separate.
///
/// `t_f` separates in-distribution joiners (max `diff_f`) from every
/// increment joiner (min `diff_f`); `t_c` separates domain increments (max
/// `diff_c`) from class increments (min `diff_c`).
pub fn calibrate_thresholds(runs: &[LabeledReport]) -> Result<Thresholds> {
    let select = |pred: fn(KnowledgeKind) -> bool, field: fn(&DiffReport) -> f64| -> Vec<f64> {
        runs.iter()
            .filter(|r| pred(r.kind))
            .map(|r| field(&r.report))
            .collect()
    };
    let in_dist = select(|k| k == KnowledgeKind::NoNewKnowledge, |r| r.diff_f);
    let increments = select(|k| k != KnowledgeKind::NoNewKnowledge, |r| r.diff_f);
    if in_dist.is_empty() || increments.is_empty() {
        return Err(Error::Config(
            "calibration needs at least one in-distribution and one increment report".into(),
        ));
    }
    let t_f = separate("diff_f", &in_dist, &increments)?;

    let domain = select(|k| k == KnowledgeKind::DomainIncrement, |r| r.diff_c);
    let class = select(|k| k == KnowledgeKind::ClassIncrement, |r| r.diff_c);
    let t_c = match (domain.is_empty(), class.is_empty()) {
        (false, false) => separate("diff_c", &domain, &class)?,
        // One increment kind only: the classifier threshold is not
        // identifiable; put it just past the observed band.
        (false, true) => 2.0 * max(&domain),
        (true, false) => 0.5 * min(&class),
        (true, true) => unreachable!("increments is non-empty"),
    };
    Thresholds::new(t_f, t_c)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn separate(quantity: &'static str, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let (lo, hi) = (max(lower), min(upper));
    if lo >= hi || lo <= 0.0 {
        return Err(Error::Calibration {
            quantity,
            lower_max: lo,
            upper_min: hi,
        });
    }
    Ok(libm::sqrt(lo * hi))
}

/// Work done by the server to discover per-client differences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryCost {
    pub source_forward_passes: usize,
    pub target_forward_passes: usize,
    pub public_rows_encoded: usize,
    /// Multiply-adds spent in encoder forward passes.
    pub forward_macs: usize,
    pub parameter_distance_computations: usize,
    /// Parameter coordinates visited by the distance computations.
    pub parameters_compared: usize,
}

/// `compute_diffs` of the target against every source, encoding the target
/// only once. Reports are returned in source order together with the work
/// performed.
pub fn per_client_diffs(
    target: &SplitModel,
    sources: &[&SplitModel],
    public: &LabeledDataset,
) -> Result<(Vec<DiffReport>, DiscoveryCost)> {
    if public.is_empty() {
        return Err(Error::Input("public dataset is empty".into()));
    }
    let macs_per_row: usize = target
        .encoder
        .iter()
        .map(|l| l.inputs() * l.outputs())
        .sum();
    let p = public.len();
    let mut cost = DiscoveryCost {
        target_forward_passes: 1,
        public_rows_encoded: p,
        forward_macs: p * macs_per_row,
        ..DiscoveryCost::default()
    };
    let ft = nn::encode(target, &public.samples)?;
    let mut reports = Vec::with_capacity(sources.len());
    for source in sources {
        source.check_congruent(target, "per-client discovery")?;
        let fs = nn::encode(source, &public.samples)?;
        cost.source_forward_passes += 1;
        cost.public_rows_encoded += p;
        cost.forward_macs += p * macs_per_row;
        cost.parameter_distance_computations += 1;
        cost.parameters_compared += target.param_count();
        reports.push(DiffReport {
            diff_f: manhattan(&fs, &ft),
            diff_c: param_distance(source.classifier_params(), target.classifier_params()),
            diff_e: param_distance(source.encoder_params(), target.encoder_params()),
            public_set_size: p,
        });
    }
    Ok((reports, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::nn::{Activation, LayerShape, ShapeSpec};
    use alloc::vec;

    fn report(diff_f: f64, diff_c: f64) -> DiffReport {
        DiffReport {
            diff_f,
            diff_c,
            diff_e: 0.0,
            public_set_size: 1,
        }
    }

    fn public(rows: usize, dim: usize) -> LabeledDataset {
        let data = (0..rows * dim).map(|i| (i as f64 * 0.37).sin()).collect();
        LabeledDataset::new(
            Matrix2D::new(rows, dim, data).unwrap(),
            vec![0; rows],
            "p",
            Split::Train,
        )
        .unwrap()
    }

    #[test]
    fn identical_models_have_zero_diffs() {
        let m = SplitModel::init(&ShapeSpec::mlp(3, &[4], 3), 1).unwrap();
        let r = compute_diffs(&m, &m, &public(5, 3)).unwrap();
        assert_eq!((r.diff_f, r.diff_c, r.diff_e), (0.0, 0.0, 0.0));
    }

    #[test]
    fn manhattan_hand_example() {
        let a = Matrix2D::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix2D::from_rows(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(manhattan(&a, &b), 2.0);

        // Same numbers through compute_diffs: public rows `a`, source encoder
        // the identity, target encoder the linear map sending each row of `a`
        // to the matching row of `b`.
        let linear = LayerShape {
            inputs: 2,
            outputs: 2,
            activation: Activation::Linear,
        };
        let shape = ShapeSpec {
            encoder: vec![linear],
            classifier: linear,
        };
        let mut s = SplitModel::zeros(&shape).unwrap();
        s.encoder[0].weight = Matrix2D::identity(2);
        let mut t = s.clone();
        t.encoder[0].weight = Matrix2D::from_rows(&[vec![0.0, 0.5], vec![-2.0, 2.5]]).unwrap();
        let p = LabeledDataset::new(a, vec![0, 1], "p", Split::Train).unwrap();
        assert_eq!(nn::encode(&t, &p.samples).unwrap(), b);
        assert_eq!(compute_diffs(&s, &t, &p).unwrap().diff_f, 2.0);
    }

    #[test]
    fn single_classifier_weight_change() {
        let m = SplitModel::init(&ShapeSpec::mlp(3, &[4], 3), 2).unwrap();
        let mut t = m.clone();
        t.classifier.weight.data_mut()[5] += 0.3;
        let r = compute_diffs(&m, &t, &public(4, 3)).unwrap();
        assert!((r.diff_c - 0.3).abs() < 1e-12);
        assert_eq!(r.diff_e, 0.0);
    }

    #[test]
    fn verdict_rule_table() {
        let th = Thresholds::new(1000.0, 0.25).unwrap();
        assert_eq!(
            classify_knowledge(report(1200.0, 0.30), th).kind,
            KnowledgeKind::ClassIncrement
        );
        assert_eq!(
            classify_knowledge(report(0.0, 0.0), th).kind,
            KnowledgeKind::NoNewKnowledge
        );
        assert_eq!(
            classify_knowledge(report(1500.0, 0.10), th).kind,
            KnowledgeKind::DomainIncrement
        );
        // Boundaries are strict.
        assert_eq!(
            classify_knowledge(report(1000.0, 9.0), th).kind,
            KnowledgeKind::NoNewKnowledge
        );
        assert_eq!(
            classify_knowledge(report(1001.0, 0.25), th).kind,
            KnowledgeKind::DomainIncrement
        );
    }

    #[test]
    fn thresholds_must_be_positive() {
        assert!(Thresholds::new(0.0, 1.0).is_err());
        assert!(Thresholds::new(1.0, -1.0).is_err());
    }

    fn labeled(kind: KnowledgeKind, f: f64, c: f64) -> LabeledReport {
        LabeledReport {
            kind,
            report: report(f, c),
        }
    }

    #[test]
    fn calibration_geometric_means() {
        use KnowledgeKind::*;
        let th = calibrate_thresholds(&[
            labeled(NoNewKnowledge, 50.0, 0.01),
            labeled(NoNewKnowledge, 150.0, 0.02),
            labeled(DomainIncrement, 534.76, 0.1),
            labeled(ClassIncrement, 900.0, 0.4),
        ])
        .unwrap();
        assert!((th.t_f - (150.0f64 * 534.76).sqrt()).abs() < 1e-9);
        assert!((th.t_f - 283.2).abs() < 0.1);
        assert!((th.t_c - (0.1f64 * 0.4).sqrt()).abs() < 1e-12);

        let single = calibrate_thresholds(&[
            labeled(NoNewKnowledge, 100.0, 0.0),
            labeled(DomainIncrement, 400.0, 0.1),
        ])
        .unwrap();
        assert_eq!(single.t_f, 200.0);
    }

    #[test]
    fn overlapping_bands_fail_with_edges() {
        use KnowledgeKind::*;
        let err = calibrate_thresholds(&[
            labeled(NoNewKnowledge, 500.0, 0.0),
            labeled(DomainIncrement, 400.0, 0.1),
        ])
        .unwrap_err();
        assert_eq!(
            err,
            Error::Calibration {
                quantity: "diff_f",
                lower_max: 500.0,
                upper_min: 400.0
            }
        );
        assert!(calibrate_thresholds(&[labeled(NoNewKnowledge, 1.0, 0.0)]).is_err());
    }
}
