use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{repeat_seed, run_repeat, RepeatReport};
use crate::error::{Error, Result};
use crate::instruction::SegmentationStyle;
use crate::metrics::{Aggregate, Table};
use crate::planner::{EavConfig, ThresholdMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Segmentation styles I to IV.
    Table3,
    /// Entropy threshold sweep.
    Table4,
    /// Verification terms on and off.
    Table6,
    /// Fixed thresholds against the learnable one.
    Thresholds,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table3" => Ok(Preset::Table3),
            "table4" => Ok(Preset::Table4),
            "table6" => Ok(Preset::Table6),
            "thresholds" => Ok(Preset::Thresholds),
            _ => Err(Error::config("preset", format!("unknown preset `{s}` (table3, table4, table6, thresholds)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub cfg: RunConfig,
}

pub fn preset_rows(preset: Preset, base: &RunConfig) -> Vec<AblationRow> {
    let with = |label: String, f: &dyn Fn(&mut RunConfig)| {
        let mut cfg = base.clone();
        f(&mut cfg);
        AblationRow { label, cfg }
    };
    match preset {
        Preset::Table3 => SegmentationStyle::ALL
            .iter()
            .map(|&s| with(s.label().to_string(), &|c| c.segmentation = s))
            .collect(),
        Preset::Table4 => [0.85, 0.75, 0.65, 0.55, 0.45]
            .iter()
            .map(|&phi| with(format!("Φλ = {phi:.2}"), &|c| c.phi_lambda = phi))
            .collect(),
        Preset::Table6 => [
            ("#1 Ver. off", false, false),
            ("#2 Term-I", true, false),
            ("#3 Term-II", false, true),
            ("#4 Term-I + Term-II", true, true),
        ]
        .iter()
        .map(|&(label, t1, t2)| {
            with(label.to_string(), &|c| c.eav = EavConfig { term1: t1, term2: t2, threshold: c.eav.threshold })
        })
        .collect(),
        Preset::Thresholds => {
            let mut rows: Vec<AblationRow> = [0.05, 0.10, 0.15, 0.20, 0.25]
                .iter()
                .map(|&v| with(format!("δ0 fixed {v:.2}"), &|c| c.eav.threshold = ThresholdMode::Fixed(v)))
                .collect();
            rows.push(with("δ0 learnable".into(), &|c| c.eav.threshold = ThresholdMode::Learnable));
            rows
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub label: String,
    pub config_digest: String,
    pub aggregate: Aggregate,
    pub repeats: Vec<RepeatReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub preset: Preset,
    pub rows: Vec<RowReport>,
    pub table: Table,
}

fn row_header(preset: Preset) -> &'static str {
    match preset {
        Preset::Table3 => "segmentation",
        Preset::Table4 => "threshold",
        Preset::Table6 => "verification",
        Preset::Thresholds => "ver-threshold",
    }
}

/// Every (row, repeat) cell runs on the worker pool; results are merged
/// back in row order.
pub fn run_ablation(preset: Preset, base: &RunConfig) -> Result<AblationReport> {
    let rows = preset_rows(preset, base);
    for r in &rows {
        r.cfg.validate()?;
    }
    let cells: Vec<(usize, usize)> =
        rows.iter().enumerate().flat_map(|(i, r)| (0..r.cfg.repeats).map(move |k| (i, k))).collect();
    let results: Vec<RepeatReport> = cells
        .par_iter()
        .map(|&(i, k)| run_repeat(&rows[i].cfg, repeat_seed(rows[i].cfg.seed, k)))
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    let mut table = Table::metrics(format!("{preset:?}").to_lowercase(), row_header(preset));
    let mut out = Vec::new();
    for row in rows {
        let repeats: Vec<RepeatReport> = it.by_ref().take(row.cfg.repeats).collect();
        let aggs: Vec<Aggregate> = repeats.iter().map(|r| r.metrics.aggregate).collect();
        let aggregate = Aggregate::over_repeats(&aggs);
        table.push(&row.label, &aggregate);
        out.push(RowReport { label: row.label, config_digest: row.cfg.digest(), aggregate, repeats });
    }
    Ok(AblationReport { preset, rows: out, table })
}
