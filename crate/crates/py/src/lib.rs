//! Python bindings: build models, train them, sample with order traces and
//! query the exact oracle on small instances.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use loarm::data::{gen_border_grid, gen_toy_graphs, BorderGridSpec, ToyGraphSpec};
use loarm::elbo::{f_term, stochastic_elbo};
use loarm::engine::{self, compress_labels, compress_trace, consistency_rate_of, SamplerConfig, TrainConfig};
use loarm::oracle;
use loarm::order::{prefix_log_prob, sample_permutation};
use loarm::state::DimKind;
use loarm::{DataVector, Error, Layout, LoArmModel, MaskedState, ModelConfig, OrderPrefix, RngStream};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::State(_) | Error::NonFinite(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type TraceRow = (usize, usize, String, f64, f64, usize);

#[pyclass(name = "Model", module = "loarm_py")]
struct PyModel {
    inner: LoArmModel,
}

impl PyModel {
    fn build(layout: Layout, policy_mode: &str, q_mode: &str, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        let cfg = ModelConfig::new(
            hidden,
            policy_mode.parse().map_err(py_err)?,
            q_mode.parse().map_err(py_err)?,
            seed,
        );
        Ok(Self {
            inner: LoArmModel::new(layout, cfg).map_err(py_err)?,
        })
    }

    fn data(&self, x: Vec<usize>) -> PyResult<DataVector> {
        DataVector::new(x, self.inner.layout()).map_err(py_err)
    }
}

#[pymethods]
impl PyModel {
    /// Sequence model over `length` tokens with `vocab` categories each.
    #[staticmethod]
    #[pyo3(signature = (length, vocab, policy_mode = "shared-torso", q_mode = "separate", hidden = vec![64], seed = 0))]
    fn tokens(length: usize, vocab: usize, policy_mode: &str, q_mode: &str, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        let layout = Layout::uniform(length, vocab, DimKind::Token).map_err(py_err)?;
        Self::build(layout, policy_mode, q_mode, hidden, seed)
    }

    /// Graph model: node slots first, then the upper-triangle pairs.
    #[staticmethod]
    #[pyo3(signature = (nodes, node_vocab, edge_vocab, policy_mode = "shared-torso", q_mode = "separate", hidden = vec![64], seed = 0))]
    fn graph(
        nodes: usize,
        node_vocab: usize,
        edge_vocab: usize,
        policy_mode: &str,
        q_mode: &str,
        hidden: Vec<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let layout = Layout::graph(nodes, node_vocab, edge_vocab).map_err(py_err)?;
        Self::build(layout, policy_mode, q_mode, hidden, seed)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LoArmModel::load(path.as_ref()).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn num_params(&self) -> usize {
        self.inner.params().num_scalars()
    }

    #[getter]
    fn beta(&self) -> Option<f64> {
        self.inner.beta()
    }

    /// Classifier logits per dimension for a state given as a list of
    /// token-or-None.
    fn classifier_logits(&self, state: Vec<Option<usize>>) -> PyResult<Vec<Vec<f64>>> {
        let s = state_from(&self.inner, state)?;
        self.inner.classifier_logits(&s).map_err(py_err)
    }

    /// Policy log-probabilities over the masked dimensions (ascending index).
    fn policy_log_probs(&self, state: Vec<Option<usize>>) -> PyResult<Vec<f64>> {
        let s = state_from(&self.inner, state)?;
        self.inner.policy_log_probs(&s, &s.masked()).map_err(py_err)
    }

    fn variational_logits(&self, x: Vec<usize>) -> PyResult<Vec<f64>> {
        let x = self.data(x)?;
        self.inner.variational_logits(&x).map_err(py_err)
    }

    fn f_term(&self, x: Vec<usize>, prefix: Vec<usize>) -> PyResult<f64> {
        let x = self.data(x)?;
        let p = OrderPrefix::new(prefix, x.len()).map_err(py_err)?;
        Ok(f_term(&self.inner, &x, &p).map_err(py_err)?.value)
    }

    #[pyo3(signature = (x, seed = 0, n_paths = 2))]
    fn stochastic_elbo(&self, x: Vec<usize>, seed: u64, n_paths: usize) -> PyResult<f64> {
        let x = self.data(x)?;
        stochastic_elbo(&self.inner, &x, &mut RngStream::new(seed), n_paths).map_err(py_err)
    }

    fn exact_log_likelihood(&self, x: Vec<usize>) -> PyResult<f64> {
        let x = self.data(x)?;
        oracle::exact_log_likelihood(&self.inner, &x).map_err(py_err)
    }

    fn exact_elbo(&self, x: Vec<usize>) -> PyResult<f64> {
        let x = self.data(x)?;
        oracle::exact_elbo(&self.inner, &x).map_err(py_err)
    }

    /// Train in place; returns `(step, batch ELBO)` per step.
    #[pyo3(signature = (data, steps = 1000, lr = 1e-3, batch_size = 32, seed = 0))]
    fn train(&mut self, py: Python<'_>, data: Vec<Vec<usize>>, steps: usize, lr: f64, batch_size: usize, seed: u64) -> PyResult<Vec<(usize, f64)>> {
        let xs = data.into_iter().map(|x| self.data(x)).collect::<PyResult<Vec<_>>>()?;
        let cfg = TrainConfig { lr, steps, batch_size, seed, ..Default::default() };
        let model = &mut self.inner;
        let reports = py.detach(|| engine::fit(model, &xs, &cfg, None)).map_err(py_err)?;
        Ok(reports.into_iter().map(|r| (r.step, r.elbo)).collect())
    }

    /// One sample and its order trace as
    /// `(step, dim, kind, policy_prob, entropy, value)` rows.
    #[pyo3(signature = (seed = 0, top_p = 1.0))]
    fn generate(&self, seed: u64, top_p: f64) -> PyResult<(Vec<usize>, Vec<TraceRow>, String)> {
        let cfg = SamplerConfig { top_p, ..Default::default() };
        let (x, t) = engine::generate(&self.inner, &cfg, &mut RngStream::new(seed)).map_err(py_err)?;
        let rows = t
            .steps
            .iter()
            .map(|s| (s.step, s.dim, s.kind.letter().to_string(), s.policy_prob, s.entropy, s.value))
            .collect();
        Ok((x.tokens().to_vec(), rows, compress_trace(&t)))
    }
}

fn state_from(model: &LoArmModel, cells: Vec<Option<usize>>) -> PyResult<MaskedState> {
    let mut s = MaskedState::fully_masked(cells.len());
    for (k, v) in cells.into_iter().enumerate() {
        if let Some(v) = v {
            s.unmask(k, v, model.layout()).map_err(py_err)?;
        }
    }
    if s.len() != model.len() {
        return Err(PyValueError::new_err(format!("state has {} cells, model has {}", s.len(), model.len())));
    }
    Ok(s)
}

#[pyfunction]
fn top_p_filter(probs: Vec<f64>, p: f64) -> Vec<f64> {
    engine::top_p_filter(&probs, p)
}

#[pyfunction]
#[pyo3(name = "compress_trace")]
fn compress(labels: &str) -> String {
    compress_labels(labels)
}

#[pyfunction]
fn consistency_rate(phases: Vec<String>, template: &str) -> PyResult<f64> {
    consistency_rate_of(&phases, template).map_err(py_err)
}

#[pyfunction]
#[pyo3(name = "sample_permutation", signature = (logits, seed = 0))]
fn sample_permutation_py(logits: Vec<f64>, seed: u64) -> Vec<usize> {
    sample_permutation(&logits, &mut RngStream::new(seed)).order().to_vec()
}

#[pyfunction]
#[pyo3(name = "prefix_log_prob")]
fn prefix_log_prob_py(logits: Vec<f64>, prefix: Vec<usize>) -> PyResult<f64> {
    prefix_log_prob(&logits, &prefix).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (count, seed = 0, noise = 0.05))]
fn border_grids(count: usize, seed: u64, noise: f64) -> PyResult<Vec<Vec<usize>>> {
    let spec = BorderGridSpec { noise, ..Default::default() };
    let d = gen_border_grid(&spec, count, &mut RngStream::new(seed)).map_err(py_err)?;
    Ok(d.into_iter().map(|x| x.tokens().to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (count, seed = 0, nodes = 4))]
fn toy_graphs(count: usize, seed: u64, nodes: usize) -> PyResult<Vec<Vec<usize>>> {
    let spec = ToyGraphSpec { nodes, ..Default::default() };
    let layout = spec.layout().map_err(py_err)?;
    let gs = gen_toy_graphs(&spec, count, &mut RngStream::new(seed)).map_err(py_err)?;
    gs.iter()
        .map(|g| g.to_data(&layout).map(|x| x.tokens().to_vec()).map_err(py_err))
        .collect()
}

#[pymodule]
fn loarm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(top_p_filter, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_permutation_py, m)?)?;
    m.add_function(wrap_pyfunction!(prefix_log_prob_py, m)?)?;
    m.add_function(wrap_pyfunction!(border_grids, m)?)?;
    m.add_function(wrap_pyfunction!(toy_graphs, m)?)?;
    Ok(())
}
