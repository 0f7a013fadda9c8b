//! Run reports: `metrics.csv`, `contributions.csv`, `run.json` and
//! `curves.svg`.
//!
//! Every number in the CSVs is printed with six decimals and a '.' radix;
//! `run.json` keeps full precision. Writing the same log twice gives
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gains_core::discovery::KnowledgeVerdict;
use gains_core::metrics::RoundMetrics;
use gains_core::orchestrator::{FederationConfig, RunLog};
use serde::Serialize;

use crate::{AppError, AppResult};

pub const METRICS_HEADER: &str = "round,t_acc,s_acc,g_acc,global_loss,grad_norm";
pub const CONTRIBUTIONS_HEADER: &str = "round,client,kind,encoder_weight,classifier_weight";

fn num(v: f64) -> String {
    format!("{v:.6}")
}

type Series = (&'static str, &'static str, fn(&RoundMetrics) -> f64);

pub fn metrics_csv(rounds: &[RoundMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in rounds {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.round,
            num(m.t_acc),
            num(m.s_acc),
            num(m.g_acc),
            num(m.global_loss),
            num(m.grad_norm)
        );
    }
    out
}

/// One row per source client and one for the target (`β`) each round. The
/// classifier column is empty when the classifier was built channel-wise.
pub fn contributions_csv(log: &RunLog) -> String {
    let mut out = String::from(CONTRIBUTIONS_HEADER);
    out.push('\n');
    for cs in &log.contributions {
        for (i, w) in cs.encoder_weights.iter().enumerate() {
            let c = cs
                .classifier_weights
                .as_ref()
                .map(|c| num(c[i]))
                .unwrap_or_default();
            let _ = writeln!(out, "{},{i},source,{},{c}", cs.round, num(*w));
        }
        let beta = num(cs.target_beta);
        let c = if cs.classifier_weights.is_some() {
            beta.clone()
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},target,{beta},{c}",
            cs.round,
            cs.encoder_weights.len()
        );
    }
    out
}

#[derive(Serialize)]
struct RunJson<'a> {
    config: &'a FederationConfig,
    verdict: &'a KnowledgeVerdict,
    final_metrics: Option<&'a RoundMetrics>,
    log: &'a RunLog,
}

pub fn run_json(cfg: &FederationConfig, log: &RunLog) -> String {
    let mut s = serde_json::to_string_pretty(&RunJson {
        config: cfg,
        verdict: &log.verdict,
        final_metrics: log.final_metrics(),
        log,
    })
    .expect("run log serializes");
    s.push('\n');
    s
}

/// Accuracy-vs-round line chart of T-Acc, S-Acc and G-Acc.
pub fn curves_svg(rounds: &[RoundMetrics]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const L: f64 = 56.0;
    const R: f64 = 120.0;
    const T: f64 = 20.0;
    const B: f64 = 44.0;
    let (pw, ph) = (W - L - R, H - T - B);
    let last = rounds.iter().map(|m| m.round).max().unwrap_or(0).max(1) as f64;
    let x = |r: usize| L + pw * r as f64 / last;
    let y = |a: f64| T + ph * (1.0 - a);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for i in 0..=5 {
        let a = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{L}" y1="{yy:.2}" x2="{x2}" y2="{yy:.2}" stroke="#ddd"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{a:.1}</text>"##,
            yy = y(a),
            x2 = L + pw,
            tx = L - 6.0,
            ty = y(a) + 4.0,
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{L},{T} {L},{yb} {xr},{yb}" fill="none" stroke="black"/>"#,
        yb = T + ph,
        xr = L + pw
    );
    let _ = writeln!(
        s,
        r#"<text x="{cx}" y="{by}" text-anchor="middle">round</text><text x="14" y="{cy}" text-anchor="middle" transform="rotate(-90 14 {cy})">accuracy</text>"#,
        cx = L + pw / 2.0,
        by = H - 10.0,
        cy = T + ph / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{L}" y="{ty}" text-anchor="middle">0</text><text x="{xr}" y="{ty}" text-anchor="middle">{last}</text>"#,
        ty = T + ph + 16.0,
        xr = L + pw
    );
    let series: [Series; 3] = [
        ("T-Acc", "#d62728", |m| m.t_acc),
        ("S-Acc", "#1f77b4", |m| m.s_acc),
        ("G-Acc", "#2ca02c", |m| m.g_acc),
    ];
    for (i, (name, color, get)) in series.iter().enumerate() {
        if !rounds.is_empty() {
            let pts: Vec<String> = rounds
                .iter()
                .map(|m| format!("{:.2},{:.2}", x(m.round), y(get(m))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        let ly = T + 12.0 + 18.0 * i as f64;
        let lx = L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{name}</text>"#,
            x2 = lx + 20.0,
            tx = lx + 26.0,
            ty = ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(dir: &Path, name: &str, body: &str) -> AppResult<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| AppError::io(&p, e))?;
    Ok(p)
}

/// Writes the four report files into `dir`, creating it if needed.
pub fn emit_report(dir: &Path, cfg: &FederationConfig, log: &RunLog) -> AppResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(vec![
        write(dir, "metrics.csv", &metrics_csv(&log.rounds))?,
        write(dir, "contributions.csv", &contributions_csv(log))?,
        write(dir, "run.json", &run_json(cfg, log))?,
        write(dir, "curves.svg", &curves_svg(&log.rounds))?,
    ])
}
