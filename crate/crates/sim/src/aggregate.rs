//! Per-group means of session metrics. Windowed traces are never aggregated.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use streamreg::datagen::DatasetSpec;

use crate::session::SessionReport;

pub const AGGREGATED_KEYS: [&str; 16] = [
    "smse", "smse_st", "icr", "saiw", "apt", "hpt", "tpt", "aut", "hut", "tut", "att", "htt", "ttt", "tt", "atpi",
    "drmax",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupBy {
    Family,
    Window,
    Dims,
    Noise,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "family" => Ok(Self::Family),
            "window" => Ok(Self::Window),
            "dims" => Ok(Self::Dims),
            "noise" => Ok(Self::Noise),
            _ => Err(format!("unknown group key {s:?}; expected family, window, dims or noise")),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Family => "family",
            Self::Window => "window",
            Self::Dims => "dims",
            Self::Noise => "noise",
        })
    }
}

/// Codename with its trailing `_WS…`, `_FF…` or `_TS…` parameter removed.
pub fn family_of(learner: &str) -> String {
    match learner.rsplit_once('_') {
        Some((head, tail)) if ["WS", "FF", "TS"].iter().any(|p| tail.starts_with(p)) => head.to_string(),
        _ => learner.to_string(),
    }
}

pub fn window_of(learner: &str) -> String {
    match learner.rsplit_once('_') {
        Some((_, tail)) if ["WS", "FF", "TS"].iter().any(|p| tail.starts_with(p)) => tail.to_string(),
        _ => "none".to_string(),
    }
}

pub fn group_key(report: &SessionReport, key: GroupBy) -> String {
    let spec = report.dataset.parse::<DatasetSpec>().ok();
    match key {
        GroupBy::Family => family_of(&report.learner),
        GroupBy::Window => window_of(&report.learner),
        GroupBy::Dims => spec.map_or("unknown".into(), |s| s.dims.to_string()),
        GroupBy::Noise => spec.map_or("unknown".into(), |s| s.noise_var.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: String,
    pub sessions: usize,
    pub failed: usize,
    pub means: BTreeMap<String, f64>,
    /// Sessions contributing to each mean; undefined metrics are skipped.
    pub counts: BTreeMap<String, usize>,
}

fn order_free_mean(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Groups keyed by the concatenation of the requested keys, sorted by key.
pub fn aggregate(reports: &[SessionReport], keys: &[GroupBy]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<String, Vec<&SessionReport>> = BTreeMap::new();
    for r in reports {
        let k: Vec<String> = keys.iter().map(|&g| group_key(r, g)).collect();
        groups.entry(k.join("/")).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(group, members)| {
            let ok: Vec<&&SessionReport> = members.iter().filter(|r| r.is_ok()).collect();
            let mut means = BTreeMap::new();
            let mut counts = BTreeMap::new();
            for key in AGGREGATED_KEYS {
                let vals: Vec<f64> = ok.iter().filter_map(|r| r.metrics.get(key)).filter(|v| v.is_finite()).collect();
                counts.insert(key.to_string(), vals.len());
                if !vals.is_empty() {
                    means.insert(key.to_string(), order_free_mean(vals));
                }
            }
            AggregateRow { group, sessions: members.len(), failed: members.len() - ok.len(), means, counts }
        })
        .collect()
}

/// Plot-ready CSV: one row per group, one column per aggregated metric.
pub fn to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("group,sessions,failed");
    for k in AGGREGATED_KEYS {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}", r.group, r.sessions, r.failed));
        for k in AGGREGATED_KEYS {
            out.push(',');
            if let Some(v) = r.means.get(k) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}
