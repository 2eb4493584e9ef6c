//! Datasets, splits and evaluation metrics.

pub mod graphs;
pub mod grid;
pub mod metrics;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::{read_graph_file, DataVector, Layout};

pub use graphs::{gen_toy_graphs, GraphGrammar, ToyGraphSpec, EDGE_VOCAB};
pub use grid::{builtin_patterns, gen_border_grid, BorderGridSpec};
pub use metrics::{evaluate, nll_bound, uniqueness, write_metrics_csv, Evaluation, MetricsReport, METRICS_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    BorderGrid,
    ToyGraph,
    /// Graphs read from a line-per-record file, checked with the toy grammar.
    GraphFile,
}

fn default_count() -> usize {
    2000
}
fn default_holdout() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Number of generated records (ignored for files).
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub grid: BorderGridSpec,
    /// Graph shape and grammar; also used for graph files.
    #[serde(default)]
    pub graph: ToyGraphSpec,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl DataConfig {
    pub fn new(kind: DataKind) -> Self {
        Self {
            kind,
            count: default_count(),
            seed: 0,
            holdout_fraction: default_holdout(),
            grid: BorderGridSpec::default(),
            graph: ToyGraphSpec::default(),
            path: None,
        }
    }
}

/// Per-dataset notion of a valid sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Validator {
    BorderRule(BorderGridSpec),
    Grammar { grammar: GraphGrammar, nodes: usize },
}

impl Validator {
    pub fn is_valid(&self, x: &DataVector) -> bool {
        match self {
            Validator::BorderRule(spec) => spec.border_rule_holds(x),
            Validator::Grammar { grammar, nodes } => grammar.check_data(x, *nodes),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DataKind,
    pub layout: Layout,
    pub records: Vec<DataVector>,
    pub validator: Validator,
}

impl Dataset {
    pub fn load(config: &DataConfig) -> Result<Self> {
        let mut rng = RngStream::new(config.seed);
        match config.kind {
            DataKind::BorderGrid => {
                let layout = config.grid.layout()?;
                let records = gen_border_grid(&config.grid, config.count, &mut rng)?;
                Ok(Self {
                    kind: config.kind,
                    layout,
                    records,
                    validator: Validator::BorderRule(config.grid.clone()),
                })
            }
            DataKind::ToyGraph | DataKind::GraphFile => {
                let spec = &config.graph;
                spec.validate()?;
                let layout = spec.layout()?;
                let graphs = if config.kind == DataKind::ToyGraph {
                    gen_toy_graphs(spec, config.count, &mut rng)?
                } else {
                    let path = config
                        .path
                        .as_ref()
                        .ok_or_else(|| Error::Config("graph-file data needs `path`".into()))?;
                    read_graph_file(path, spec.valences.len(), EDGE_VOCAB)?
                };
                let records = graphs
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        if g.n_nodes() != spec.nodes {
                            return Err(Error::Input(format!(
                                "record {} has {} nodes, expected {}",
                                i + 1,
                                g.n_nodes(),
                                spec.nodes
                            )));
                        }
                        g.to_data(&layout)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self {
                    kind: config.kind,
                    layout,
                    records,
                    validator: Validator::Grammar {
                        grammar: spec.grammar(),
                        nodes: spec.nodes,
                    },
                })
            }
        }
    }

    /// Phase template used for the consistency rate, if the data has one.
    pub fn default_template(&self) -> Option<String> {
        match self.kind {
            DataKind::BorderGrid => None,
            DataKind::ToyGraph | DataKind::GraphFile => Some("ENA".into()),
        }
    }
}

/// Seeded shuffle, then the last `ceil(fraction * n)` records are held out.
pub fn split(records: &[DataVector], fraction: f64, seed: u64) -> Result<(Vec<DataVector>, Vec<DataVector>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    if records.len() < 2 {
        return Err(Error::Config("need at least two records to split".into()));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    let mut rng = RngStream::new(seed);
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.below(i + 1));
    }
    let held = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len() - 1);
    let cut = records.len() - held;
    let pick = |r: &[usize]| r.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&idx[..cut]), pick(&idx[cut..])))
}
