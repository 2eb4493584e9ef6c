//! Generation order traces and their phase compression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DimKind, NO_EDGE};

/// What kind of cell a generation step filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Node,
    Edge,
    NoEdge,
    Pixel,
    Token,
}

impl StepKind {
    pub fn classify(kind: DimKind, value: usize) -> Self {
        match kind {
            DimKind::Node => StepKind::Node,
            DimKind::Edge if value == NO_EDGE => StepKind::NoEdge,
            DimKind::Edge => StepKind::Edge,
            DimKind::Pixel => StepKind::Pixel,
            DimKind::Token => StepKind::Token,
        }
    }

    /// Phase letter: `A` node, `E` edge, `N` no-edge, `P` pixel, `T` token.
    pub fn letter(self) -> char {
        match self {
            StepKind::Node => 'A',
            StepKind::Edge => 'E',
            StepKind::NoEdge => 'N',
            StepKind::Pixel => 'P',
            StepKind::Token => 'T',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based step index.
    pub step: usize,
    pub dim: usize,
    pub kind: StepKind,
    /// Policy probability of the chosen dimension at this step.
    pub policy_prob: f64,
    /// Entropy of the (unfiltered) classifier row of the chosen dimension.
    pub entropy: f64,
    pub value: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderTrace {
    pub steps: Vec<TraceStep>,
}

impl OrderTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.dim).collect()
    }

    /// One letter per step, uncompressed.
    pub fn labels(&self) -> String {
        self.steps.iter().map(|s| s.kind.letter()).collect()
    }

    /// 0-based position at which each dimension was generated.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.steps.len()];
        for (pos, s) in self.steps.iter().enumerate() {
            if s.dim < r.len() {
                r[s.dim] = pos;
            }
        }
        r
    }
}

/// Collapse runs of equal letters: `"EEEANNNAAA"` becomes `"EANA"`.
pub fn compress_labels(labels: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in labels.chars() {
        if last != Some(c) {
            out.push(c);
            last = Some(c);
        }
    }
    out
}

pub fn compress_trace(trace: &OrderTrace) -> String {
    compress_labels(&trace.labels())
}

/// Fraction of compressed phase strings exactly equal to `template`.
pub fn consistency_rate_of<S: AsRef<str>>(phases: &[S], template: &str) -> Result<f64> {
    if phases.is_empty() {
        return Err(Error::Domain("consistency rate of an empty trace set".into()));
    }
    let hits = phases.iter().filter(|p| p.as_ref() == template).count();
    Ok(hits as f64 / phases.len() as f64)
}

pub fn consistency_rate(traces: &[OrderTrace], template: &str) -> Result<f64> {
    let phases: Vec<String> = traces.iter().map(compress_trace).collect();
    consistency_rate_of(&phases, template)
}
