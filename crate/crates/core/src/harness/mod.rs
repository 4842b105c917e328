//! Episode, tour and ablation runner plus report files.

mod ablate;
mod config;
mod run;

use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::metrics::{Format, Table};

pub use ablate::{preset_rows, run_ablation, AblationReport, AblationRow, Preset, RowReport};
pub use config::{PolicyConfig, ProviderConfig, RunConfig, SuiteConfig};
pub use run::{
    generate_suite, load_tour_suite, map_digest, mix, phrase_subtasks, repeat_seed, run, run_repeat, EpisodeOutcome,
    EpisodeSpec, RepeatReport, RunReport, Runtime, TourOutcome, TourSpec,
};

fn write(dir: &FsPath, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::io(p, e))
}

fn config_echo(cfg: &RunConfig) -> Result<String> {
    let mut v = serde_json::to_value(cfg)?;
    v["digest"] = cfg.digest().into();
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// `config.json`, `episodes.jsonl` (one line per episode of every repeat)
/// and `report.<ext>`.
pub fn write_run(dir: impl AsRef<FsPath>, cfg: &RunConfig, report: &RunReport, format: Format) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "config.json", &config_echo(cfg)?)?;
    let mut lines = String::new();
    for (r, rep) in report.repeats.iter().enumerate() {
        for t in &rep.tours {
            for e in &t.episodes {
                let mut v = serde_json::to_value(e)?;
                v["repeat"] = r.into();
                lines += &serde_json::to_string(&v)?;
                lines.push('\n');
            }
        }
    }
    write(dir, "episodes.jsonl", &lines)?;
    let mut table = Table::metrics("simulate", "run");
    table.push(format!("seed {}", cfg.seed), &report.aggregate);
    write(dir, &format!("report.{}", format.extension()), &table.render(format)?)
}

pub fn write_ablation(dir: impl AsRef<FsPath>, base: &RunConfig, report: &AblationReport, format: Format) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "config.json", &config_echo(base)?)?;
    let mut rows = String::new();
    for row in &report.rows {
        let v = serde_json::json!({
            "label": row.label,
            "config_digest": row.config_digest,
            "aggregate": row.aggregate,
            "repeats": row.repeats.iter().map(|r| serde_json::json!({
                "seed": r.seed,
                "aggregate": r.metrics.aggregate,
                "episodes": r.metrics.episodes,
                "tour_tndtw": r.metrics.tour_tndtw,
            })).collect::<Vec<_>>(),
        });
        rows += &serde_json::to_string(&v)?;
        rows.push('\n');
    }
    write(dir, "rows.jsonl", &rows)?;
    write(dir, &format!("table.{}", format.extension()), &report.table.render(format)?)
}
