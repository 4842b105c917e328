use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EpisodeMetrics;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub tl: Stat,
    pub ne: Stat,
    pub os: Stat,
    pub ndtw: Stat,
    pub sr: Stat,
    pub spl: Stat,
    pub tndtw: Stat,
    pub cpsubt: Stat,
    pub cpsubi: Stat,
}

pub const TABLE_COLUMNS: [&str; 9] = ["TL", "NE", "OS", "nDTW", "SR", "SPL", "t-nDTW", "CPsubT", "CPsubI"];

impl Aggregate {
    /// Values in [`TABLE_COLUMNS`] order.
    pub fn columns(&self) -> [Stat; 9] {
        [self.tl, self.ne, self.os, self.ndtw, self.sr, self.spl, self.tndtw, self.cpsubt, self.cpsubi]
    }

    /// Mean and spread of per-repeat means.
    pub fn over_repeats(repeats: &[Aggregate]) -> Aggregate {
        let col = |f: fn(&Aggregate) -> Stat| Stat::of(&repeats.iter().map(|a| f(a).mean).collect::<Vec<_>>());
        Aggregate {
            tl: col(|a| a.tl),
            ne: col(|a| a.ne),
            os: col(|a| a.os),
            ndtw: col(|a| a.ndtw),
            sr: col(|a| a.sr),
            spl: col(|a| a.spl),
            tndtw: col(|a| a.tndtw),
            cpsubt: col(|a| a.cpsubt),
            cpsubi: col(|a| a.cpsubi),
        }
    }
}

pub fn aggregate(episodes: &[EpisodeMetrics], tour_tndtw: &[f64]) -> Aggregate {
    let col = |f: fn(&EpisodeMetrics) -> f64| Stat::of(&episodes.iter().map(f).collect::<Vec<_>>());
    Aggregate {
        tl: col(|m| m.tl),
        ne: col(|m| m.ne),
        os: col(|m| m.os),
        ndtw: col(|m| m.ndtw),
        sr: col(|m| m.sr),
        spl: col(|m| m.spl),
        tndtw: Stat::of(tour_tndtw),
        cpsubt: col(|m| m.cpsubt),
        cpsubi: col(|m| m.cpsubi),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: Vec<EpisodeMetrics>,
    pub tour_tndtw: Vec<f64>,
    pub aggregate: Aggregate,
}

impl MetricsReport {
    pub fn new(episodes: Vec<EpisodeMetrics>, tour_tndtw: Vec<f64>) -> Self {
        let aggregate = aggregate(&episodes, &tour_tndtw);
        MetricsReport { episodes, tour_tndtw, aggregate }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Md),
            other => Err(Error::config("format", format!("unknown format `{other}` (json, csv, md)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn metrics(title: impl Into<String>, row_header: impl Into<String>) -> Self {
        Table {
            title: title.into(),
            row_header: row_header.into(),
            columns: TABLE_COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, agg: &Aggregate) {
        self.rows.push(TableRow { label: label.into(), values: agg.columns().to_vec() });
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.to_csv(),
            Format::Md => Ok(self.to_markdown()),
        }
    }

    fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.row_header.clone()];
        for c in &self.columns {
            header.push(format!("{c}_mean"));
            header.push(format!("{c}_std"));
        }
        let csv_err = |e: csv::Error| Error::contract(format!("csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            for s in &row.values {
                rec.push(s.mean.to_string());
                rec.push(s.std.to_string());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::contract(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn to_markdown(&self) -> String {
        let mut s = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(s, "### {}\n", self.title);
        }
        let _ = writeln!(s, "| {} | {} |", self.row_header, self.columns.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.values.iter().map(|v| format!("{:.4} ± {:.4}", v.mean, v.std)).collect();
            let _ = writeln!(s, "| {} | {} |", row.label, cells.join(" | "));
        }
        s
    }
}
