use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::TourRecord;
use crate::error::{Error, Result};

pub const TOUR_FORMAT: &str = "seqnav-tour/1";

#[derive(Serialize)]
struct LineOut<'a> {
    format: &'a str,
    tour: &'a TourRecord,
}

#[derive(Deserialize)]
struct Tagged {
    format: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    #[allow(dead_code)]
    format: String,
    tour: TourRecord,
}

pub fn tours_to_jsonl(tours: &[TourRecord]) -> Result<String> {
    let mut out = String::new();
    for t in tours {
        out += &serde_json::to_string(&LineOut { format: TOUR_FORMAT, tour: t })?;
        out.push('\n');
    }
    Ok(out)
}

/// Parses tour lines; `file` only labels errors.
pub fn tours_from_jsonl(text: &str, file: &str) -> Result<Vec<TourRecord>> {
    let err = |line: usize, message: String| Error::Parse { file: file.to_string(), line, message };
    let mut tours = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let tag: Tagged = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
        if tag.format != TOUR_FORMAT {
            return Err(err(line, format!("unsupported format `{}` (expected `{TOUR_FORMAT}`)", tag.format)));
        }
        let parsed: LineIn = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
        parsed.tour.validate(f64::INFINITY).map_err(|e| err(line, e.to_string()))?;
        tours.push(parsed.tour);
    }
    Ok(tours)
}

pub fn write_tours(path: impl AsRef<FsPath>, tours: &[TourRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tours_to_jsonl(tours)?).map_err(|e| Error::io(path, e))
}

pub fn read_tours(path: impl AsRef<FsPath>) -> Result<Vec<TourRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tours_from_jsonl(&text, &path.display().to_string())
}
