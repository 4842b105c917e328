//! High-level perception planner: instruction segmentation, entropy-gated
//! phrase selection and instruction encoding.

mod encoder;
mod select;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encoder::{encode_instruction, HashedBagEncoder, InstructionEncoder};
pub use select::{
    argmax, normalized_entropy, select_phrase, selection_from_similarities, PhraseSelection,
};
pub use synth::synthesize_instruction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentationStyle {
    /// No segmentation: the whole instruction is one phrase.
    #[serde(rename = "type1")]
    TypeINone,
    /// Commas and sentence-final periods.
    #[serde(rename = "type2")]
    TypeIICommas,
    /// Sentence-final periods and the connectives "and" / "then".
    #[serde(rename = "type3")]
    TypeIIIConjunctions,
    /// Sentence-final periods only.
    #[serde(rename = "type4")]
    TypeIVPeriods,
}

impl SegmentationStyle {
    pub const ALL: [SegmentationStyle; 4] = [
        SegmentationStyle::TypeINone,
        SegmentationStyle::TypeIICommas,
        SegmentationStyle::TypeIIIConjunctions,
        SegmentationStyle::TypeIVPeriods,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SegmentationStyle::TypeINone => "Type-I",
            SegmentationStyle::TypeIICommas => "Type-II",
            SegmentationStyle::TypeIIIConjunctions => "Type-III",
            SegmentationStyle::TypeIVPeriods => "Type-IV",
        }
    }
}

/// A phrase and its byte span in the raw instruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub raw: String,
    pub phrases: Vec<Phrase>,
    pub style: SegmentationStyle,
}

impl Instruction {
    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrase(&self, k: usize) -> &str {
        &self.phrases[k].text
    }

    pub fn texts(&self) -> Vec<&str> {
        self.phrases.iter().map(|p| p.text.as_str()).collect()
    }
}

fn sentence_end(raw: &str, i: usize) -> bool {
    raw[i + 1..].chars().next().is_none_or(char::is_whitespace)
}

/// Byte ranges removed as delimiters for the given style.
fn delimiters(raw: &str, style: SegmentationStyle) -> Vec<(usize, usize)> {
    let mut cuts = Vec::new();
    for (i, c) in raw.char_indices() {
        let cut = match c {
            '.' => sentence_end(raw, i),
            ',' => style == SegmentationStyle::TypeIICommas,
            _ => false,
        };
        if cut {
            cuts.push((i, i + 1));
        }
    }
    if style == SegmentationStyle::TypeIIIConjunctions {
        let mut start = None;
        for (i, c) in raw.char_indices().chain(std::iter::once((raw.len(), ' '))) {
            match (c.is_alphanumeric(), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    let word = raw[s..i].to_lowercase();
                    let after_comma = raw[..s].trim_end().ends_with(',');
                    if word == "then" || (word == "and" && !after_comma) {
                        cuts.push((s, i));
                    }
                    start = None;
                }
                _ => {}
            }
        }
        cuts.sort_unstable();
    }
    cuts
}

fn trimmed_span(raw: &str, lo: usize, hi: usize) -> Option<Phrase> {
    let is_pad = |c: char| c.is_whitespace() || c == ',';
    let piece = &raw[lo..hi];
    let left = piece.len() - piece.trim_start_matches(is_pad).len();
    let text = piece.trim_matches(is_pad);
    (!text.is_empty()).then(|| Phrase { text: text.to_string(), start: lo + left, end: lo + left + text.len() })
}

/// Splits an instruction into phrases. Delimiters are dropped, fragments
/// trimmed of whitespace and stray commas, empty fragments discarded.
pub fn segment(raw: &str, style: SegmentationStyle) -> Result<Instruction> {
    if raw.trim().is_empty() {
        return Err(Error::contract("cannot segment an empty instruction"));
    }
    let whole = || {
        let text = raw.trim();
        let start = raw.len() - raw.trim_start().len();
        vec![Phrase { text: text.to_string(), start, end: start + text.len() }]
    };
    let phrases = if style == SegmentationStyle::TypeINone {
        whole()
    } else {
        let mut out = Vec::new();
        let mut lo = 0;
        for (a, b) in delimiters(raw, style) {
            out.extend(trimmed_span(raw, lo, a));
            lo = b;
        }
        out.extend(trimmed_span(raw, lo, raw.len()));
        if out.is_empty() {
            whole()
        } else {
            out
        }
    };
    Ok(Instruction { raw: raw.to_string(), phrases, style })
}
