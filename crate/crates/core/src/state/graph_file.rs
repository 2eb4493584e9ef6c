//! Line-delimited graph dataset files.
//!
//! One record per line:
//!
//! ```text
//! <node type> <node type> ... | <a>-<b>:<edge type> <a>-<b>:<edge type> ...
//! ```
//!
//! Node indices are 0-based, each edge has `a < b` and a non-zero edge type,
//! edges are sorted by `(a, b)` and every token is separated by exactly one
//! space. Pairs that are not listed are no-edge. A record without edges is
//! written `t0 t1 |`. Blank lines and lines starting with `#` are skipped.
//! Only canonical records are accepted, so every accepted line re-serializes
//! to itself.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::graph::GraphRecord;
use crate::error::{Error, Result};

pub fn format_graph_line(r: &GraphRecord) -> String {
    let mut s = r
        .node_types
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    s.push_str(" |");
    for &(a, b, t) in &r.edges {
        let _ = write!(s, " {a}-{b}:{t}");
    }
    s
}

fn parse_num(tok: &str, what: &str) -> std::result::Result<usize, String> {
    if tok.is_empty() || !tok.bytes().all(|c| c.is_ascii_digit()) || (tok.len() > 1 && tok.starts_with('0')) {
        return Err(format!("invalid {what} '{tok}'"));
    }
    tok.parse().map_err(|_| format!("invalid {what} '{tok}'"))
}

/// Parse one record and check it against the vocabulary sizes.
pub fn parse_graph_line(
    line: &str,
    node_vocab: usize,
    edge_vocab: usize,
) -> std::result::Result<GraphRecord, String> {
    let (nodes, edges) = line
        .split_once(" |")
        .ok_or_else(|| "missing ' |' separator between nodes and edges".to_string())?;
    let node_types = nodes
        .split(' ')
        .map(|t| parse_num(t, "node type"))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(t) = node_types.iter().find(|&&t| t >= node_vocab) {
        return Err(format!("node type {t} outside vocabulary of size {node_vocab}"));
    }
    let mut parsed = Vec::new();
    if !edges.is_empty() {
        let rest = edges
            .strip_prefix(' ')
            .ok_or_else(|| "expected a space after '|'".to_string())?;
        for tok in rest.split(' ') {
            let (pair, ty) = tok
                .split_once(':')
                .ok_or_else(|| format!("edge '{tok}' lacks ':type'"))?;
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| format!("edge '{tok}' lacks 'a-b'"))?;
            let (a, b, ty) = (
                parse_num(a, "node index")?,
                parse_num(b, "node index")?,
                parse_num(ty, "edge type")?,
            );
            if a >= b {
                return Err(format!("edge {a}-{b} must have a < b"));
            }
            if b >= node_types.len() {
                return Err(format!("edge {a}-{b} refers to a missing node"));
            }
            if ty == 0 || ty >= edge_vocab {
                return Err(format!("edge type {ty} must be in 1..{edge_vocab}"));
            }
            parsed.push((a, b, ty));
        }
    }
    if parsed.windows(2).any(|w| (w[0].0, w[0].1) >= (w[1].0, w[1].1)) {
        return Err("edges must be sorted by (a, b) without duplicates".into());
    }
    let record = GraphRecord::new(node_types, parsed).map_err(|e| e.to_string())?;
    if format_graph_line(&record) != line {
        return Err("record is not in canonical form".into());
    }
    Ok(record)
}

pub fn read_graph_file(path: &Path, node_vocab: usize, edge_vocab: usize) -> Result<Vec<GraphRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let r = parse_graph_line(line, node_vocab, edge_vocab).map_err(|msg| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_graph_file(path: &Path, records: &[GraphRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&format_graph_line(r));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
