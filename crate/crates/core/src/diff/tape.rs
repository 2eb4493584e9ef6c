//! Vector-valued reverse-mode tape.
//!
//! Each node holds a dense `Vec<f64>` and the primitive that produced it.
//! Parameters are read from a borrowed [`ParamStore`] snapshot, so many
//! tapes can run against the same frozen parameters concurrently. The
//! backward pass returns detached [`Gradients`] that the caller accumulates.

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    StopGradient,
    Param(ParamId),
    Affine { w: ParamId, b: ParamId, x: Var },
    Tanh(Var),
    Slice { x: Var, start: usize },
    Gather { x: Var, idx: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale { x: Var, c: f64 },
    ScaleBy { x: Var, s: Var },
    Exp(Var),
    Sum(Var),
    MaskedLogSoftmax { x: Var, active: Vec<usize> },
    RowLogSoftmaxPick { x: Var, rows: Vec<(usize, usize, usize)> },
    RowEntropy { x: Var, rows: Vec<(usize, usize)> },
    PrefixLogProb { x: Var, prefix: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn log_sum_exp_over(x: &[f64], idx: impl Iterator<Item = usize> + Clone) -> f64 {
    let max = idx.clone().map(|i| x[i]).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + idx.map(|i| (x[i] - max).exp()).sum::<f64>().ln()
}

fn entropy_of(row: &[f64]) -> f64 {
    let lse = log_sum_exp_over(row, 0..row.len());
    -row.iter()
        .map(|&v| {
            let lp = v - lse;
            let p = lp.exp();
            if p > 0.0 {
                p * lp
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check_same_len(&self, a: Var, b: Var) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Config(format!("length mismatch: {la} vs {lb}")));
        }
        Ok(())
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Pass the value through, block the gradient.
    pub fn stop_gradient(&mut self, x: Var) -> Var {
        let value = self.value(x).to_vec();
        self.push(value, Op::StopGradient)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.value(id).to_vec();
        self.push(value, Op::Param(id))
    }

    /// `W x + b` with `W` stored row-major as `[out, in]`.
    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Result<Var> {
        let wp = self.params.param(w);
        let bv = self.params.value(b);
        let xv = self.value(x);
        let (rows, cols) = match wp.shape.as_slice() {
            [r, c] => (*r, *c),
            s => return Err(Error::Config(format!("affine weight must be 2-d, got {s:?}"))),
        };
        if cols != xv.len() || rows != bv.len() {
            return Err(Error::Config(format!(
                "affine {}: weight [{rows}, {cols}], bias {}, input {}",
                wp.name,
                bv.len(),
                xv.len()
            )));
        }
        let mut out = bv.to_vec();
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &wp.value[o * cols..(o + 1) * cols];
            *acc += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(out, Op::Affine { w, b, x }))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(x))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.len() {
            return Err(Error::Domain(format!(
                "slice {start}..{} out of range for length {}",
                start + len,
                xv.len()
            )));
        }
        let value = xv[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice { x, start }))
    }

    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.len()) {
            return Err(Error::Domain(format!("gather index {bad} out of range {}", xv.len())));
        }
        let value = idx.iter().map(|&i| xv[i]).collect();
        Ok(self.push(value, Op::Gather { x, idx: idx.to_vec() }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_len(a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).iter().map(|v| v * c).collect();
        self.push(value, Op::Scale { x, c })
    }

    /// Multiply every entry of `x` by the scalar node `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::Config("scale_by expects a scalar factor".into()));
        }
        let c = self.scalar(s);
        let value = self.value(x).iter().map(|v| v * c).collect();
        Ok(self.push(value, Op::ScaleBy { x, s }))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.exp()).collect();
        self.push(value, Op::Exp(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = vec![self.value(x).iter().sum()];
        self.push(value, Op::Sum(x))
    }

    /// Log-softmax normalized over `active` only. Entries outside `active`
    /// are reported as `-inf` and receive no gradient.
    pub fn masked_log_softmax(&mut self, x: Var, active: &[usize]) -> Result<Var> {
        let value = masked_log_softmax(self.value(x), active)?;
        Ok(self.push(
            value,
            Op::MaskedLogSoftmax {
                x,
                active: active.to_vec(),
            },
        ))
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let all: Vec<usize> = (0..self.value(x).len()).collect();
        self.masked_log_softmax(x, &all)
    }

    /// For each `(start, len, target)` returns `log softmax(x[start..start+len])[target]`.
    pub fn row_log_softmax_pick(&mut self, x: Var, rows: &[(usize, usize, usize)]) -> Result<Var> {
        let xv = self.value(x);
        let mut value = Vec::with_capacity(rows.len());
        for &(start, len, target) in rows {
            if len == 0 || target >= len || start + len > xv.len() {
                return Err(Error::Domain(format!(
                    "row ({start}, {len}, {target}) invalid for length {}",
                    xv.len()
                )));
            }
            let row = &xv[start..start + len];
            value.push(row[target] - log_sum_exp_over(row, 0..len));
        }
        Ok(self.push(
            value,
            Op::RowLogSoftmaxPick {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Entropy (nats) of `softmax(x[start..start+len])` for each row.
    pub fn row_entropy(&mut self, x: Var, rows: &[(usize, usize)]) -> Result<Var> {
        let xv = self.value(x);
        let mut value = Vec::with_capacity(rows.len());
        for &(start, len) in rows {
            if len == 0 || start + len > xv.len() {
                return Err(Error::Domain(format!("row ({start}, {len}) invalid")));
            }
            value.push(entropy_of(&xv[start..start + len]));
        }
        Ok(self.push(
            value,
            Op::RowEntropy {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Plackett-Luce log-probability of an ordered prefix under static logits `x`.
    pub fn prefix_log_prob(&mut self, x: Var, prefix: &[usize]) -> Result<Var> {
        let value = vec![crate::order::prefix_log_prob(self.value(x), prefix)?];
        Ok(self.push(
            value,
            Op::PrefixLogProb {
                x,
                prefix: prefix.to_vec(),
            },
        ))
    }

    /// Reverse pass from the scalar node `out`; returns d out / d params.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward computation".into()));
        }
        if out.0 >= self.nodes.len() {
            return Err(Error::State(format!("output node {} is not on this tape", out.0)));
        }
        if self.nodes[out.0].value.len() != 1 {
            return Err(Error::State(format!(
                "backward needs a scalar output, node has length {}",
                self.nodes[out.0].value.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self.params);
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); out.0 + 1];
        adj[out.0] = vec![1.0];

        fn acc<'a>(adj: &'a mut [Vec<f64>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
            let a = &mut adj[v.0];
            if a.is_empty() {
                a.resize(nodes[v.0].value.len(), 0.0);
            }
            a
        }

        for n in (0..=out.0).rev() {
            if adj[n].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[n]);
            let node = &self.nodes[n];
            let y = &node.value;
            match &node.op {
                Op::Constant | Op::StopGradient => {}
                Op::Param(id) => {
                    for (a, b) in grads.bufs[id.0].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wv = self.params.value(*w);
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.len();
                    {
                        let gw = &mut grads.bufs[w.0];
                        for (o, &go) in g.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            let row = &mut gw[o * cols..(o + 1) * cols];
                            for (r, &xi) in row.iter_mut().zip(xv) {
                                *r += go * xi;
                            }
                        }
                    }
                    for (a, &go) in grads.bufs[b.0].iter_mut().zip(&g) {
                        *a += go;
                    }
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (o, &go) in g.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        let row = &wv[o * cols..(o + 1) * cols];
                        for (a, &wi) in gx.iter_mut().zip(row) {
                            *a += go * wi;
                        }
                    }
                }
                Op::Tanh(x) => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for ((a, &gi), &yi) in gx.iter_mut().zip(&g).zip(y) {
                        *a += gi * (1.0 - yi * yi);
                    }
                }
                Op::Slice { x, start } => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (j, &gi) in g.iter().enumerate() {
                        gx[start + j] += gi;
                    }
                }
                Op::Gather { x, idx } => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (&i, &gi) in idx.iter().zip(&g) {
                        gx[i] += gi;
                    }
                }
                Op::Add(a, b) => {
                    for (v, sign) in [(*a, 1.0), (*b, 1.0)] {
                        let gv = acc(&mut adj, &self.nodes, v);
                        gv.iter_mut().zip(&g).for_each(|(s, gi)| *s += sign * gi);
                    }
                }
                Op::Sub(a, b) => {
                    for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                        let gv = acc(&mut adj, &self.nodes, v);
                        gv.iter_mut().zip(&g).for_each(|(s, gi)| *s += sign * gi);
                    }
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(gi, bi)| gi * bi).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                    let s = acc(&mut adj, &self.nodes, *a);
                    s.iter_mut().zip(&ga).for_each(|(s, v)| *s += v);
                    let s = acc(&mut adj, &self.nodes, *b);
                    s.iter_mut().zip(&gb).for_each(|(s, v)| *s += v);
                }
                Op::Scale { x, c } => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    gx.iter_mut().zip(&g).for_each(|(a, gi)| *a += c * gi);
                }
                Op::ScaleBy { x, s } => {
                    let c = self.nodes[s.0].value[0];
                    let xv = &self.nodes[x.0].value;
                    let gs: f64 = g.iter().zip(xv).map(|(gi, xi)| gi * xi).sum();
                    let gx = acc(&mut adj, &self.nodes, *x);
                    gx.iter_mut().zip(&g).for_each(|(a, gi)| *a += c * gi);
                    acc(&mut adj, &self.nodes, *s)[0] += gs;
                }
                Op::Exp(x) => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for ((a, &gi), &yi) in gx.iter_mut().zip(&g).zip(y) {
                        *a += gi * yi;
                    }
                }
                Op::Sum(x) => {
                    let gx = acc(&mut adj, &self.nodes, *x);
                    gx.iter_mut().for_each(|a| *a += g[0]);
                }
                Op::MaskedLogSoftmax { x, active } => {
                    let total: f64 = active.iter().map(|&j| g[j]).sum();
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for &j in active {
                        gx[j] += g[j] - y[j].exp() * total;
                    }
                }
                Op::RowLogSoftmaxPick { x, rows } => {
                    let xv = &self.nodes[x.0].value;
                    let mut upd: Vec<(usize, f64)> = Vec::new();
                    for (&(start, len, target), &gi) in rows.iter().zip(&g) {
                        if gi == 0.0 {
                            continue;
                        }
                        let row = &xv[start..start + len];
                        let lse = log_sum_exp_over(row, 0..len);
                        for (c, &v) in row.iter().enumerate() {
                            let hot = if c == target { 1.0 } else { 0.0 };
                            upd.push((start + c, gi * (hot - (v - lse).exp())));
                        }
                    }
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (i, d) in upd {
                        gx[i] += d;
                    }
                }
                Op::RowEntropy { x, rows } => {
                    let xv = &self.nodes[x.0].value;
                    let mut upd: Vec<(usize, f64)> = Vec::new();
                    for ((&(start, len), &gi), &h) in rows.iter().zip(&g).zip(y) {
                        if gi == 0.0 {
                            continue;
                        }
                        let row = &xv[start..start + len];
                        let lse = log_sum_exp_over(row, 0..len);
                        for (c, &v) in row.iter().enumerate() {
                            let lp = v - lse;
                            let p = lp.exp();
                            // dH/dv_c = -p_c (log p_c + H)
                            let d = if p > 0.0 { -p * (lp + h) } else { 0.0 };
                            upd.push((start + c, gi * d));
                        }
                    }
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (i, d) in upd {
                        gx[i] += d;
                    }
                }
                Op::PrefixLogProb { x, prefix } => {
                    let xv = &self.nodes[x.0].value;
                    let mut remaining = vec![true; xv.len()];
                    let mut upd = vec![0.0; xv.len()];
                    for &z in prefix {
                        let live = (0..xv.len()).filter(|&k| remaining[k]);
                        let lse = log_sum_exp_over(xv, live.clone());
                        for k in live {
                            upd[k] -= (xv[k] - lse).exp();
                        }
                        upd[z] += 1.0;
                        remaining[z] = false;
                    }
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (a, u) in gx.iter_mut().zip(upd) {
                        *a += g[0] * u;
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Log-softmax restricted to `active`, stabilized by the max over `active`.
/// Positions outside `active` hold `-inf`.
pub fn masked_log_softmax(logits: &[f64], active: &[usize]) -> Result<Vec<f64>> {
    if active.is_empty() {
        return Err(Error::Domain("masked log-softmax over an empty active set".into()));
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= logits.len()) {
        return Err(Error::Domain(format!(
            "active index {bad} out of range for {} logits",
            logits.len()
        )));
    }
    let lse = log_sum_exp_over(logits, active.iter().copied());
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    for &j in active {
        out[j] = logits[j] - lse;
    }
    Ok(out)
}

/// Entropy in nats of `softmax(logits)`.
pub fn categorical_entropy(logits: &[f64]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::Domain("entropy of an empty distribution".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite logits".into()));
    }
    Ok(entropy_of(logits).max(0.0))
}

/// Stable `log(sum(exp(v)))`; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    log_sum_exp_over(v, 0..v.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn masked_log_softmax_examples() {
        let eq = masked_log_softmax(&[0.3, 0.3, 0.3, 9.0], &[0, 1, 2]).unwrap();
        for v in &eq[..3] {
            assert_abs_diff_eq!(*v, -(3f64.ln()), epsilon = 1e-15);
        }
        assert_eq!(eq[3], f64::NEG_INFINITY);

        let forced = masked_log_softmax(&[4.0, -2.0], &[1]).unwrap();
        assert_eq!(forced[1], 0.0);

        let lp = masked_log_softmax(&[0.0, 2f64.ln(), 3f64.ln()], &[0, 1, 2]).unwrap();
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        assert_abs_diff_eq!(p[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 2.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 3.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn masked_log_softmax_rejects_empty_and_out_of_range() {
        assert!(matches!(masked_log_softmax(&[1.0], &[]), Err(Error::Domain(_))));
        assert!(matches!(masked_log_softmax(&[1.0], &[3]), Err(Error::Domain(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(categorical_entropy(&[0.0; 4]).unwrap(), 4f64.ln(), epsilon = 1e-15);
        assert!(categorical_entropy(&[1000.0, 0.0]).unwrap() < 1e-9);
        let h = categorical_entropy(&[0.8f64.ln(), 0.2f64.ln()]).unwrap();
        // -0.8 ln 0.8 - 0.2 ln 0.2
        assert_abs_diff_eq!(h, 0.500402423538188, epsilon = 1e-12);
        assert!(categorical_entropy(&[f64::NAN]).is_err());
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", &[3], vec![1.0, -2.0, 0.5]).unwrap();
        let b = store.add("b", &[2], vec![4.0, 4.0]).unwrap();
        let mut tape = Tape::new(&store);
        let va = tape.param(a);
        let vb = tape.param(b);
        let sa = tape.sum(va);
        let sb = tape.sum(vb);
        let total = tape.add(sa, sb).unwrap();
        let g = tape.backward(total).unwrap();
        assert_eq!(g.flat(), vec![1.0; 5]);
    }

    #[test]
    fn zero_times_anything_has_zero_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", &[2], vec![3.0, -1.0]).unwrap();
        let mut tape = Tape::new(&store);
        let va = tape.param(a);
        let e = tape.exp(va);
        let s = tape.sum(e);
        let z = tape.scale(s, 0.0);
        let g = tape.backward(z).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stop_gradient_blocks_flow() {
        let mut store = ParamStore::new();
        let a = store.add("a", &[1], vec![2.0]).unwrap();
        let mut tape = Tape::new(&store);
        let va = tape.param(a);
        let sg = tape.stop_gradient(va);
        let y = tape.mul(va, sg).unwrap();
        let g = tape.backward(y).unwrap();
        // d/da (a * const(a)) = const(a) = 2
        assert_eq!(g.flat(), vec![2.0]);
    }

    #[test]
    fn backward_requires_a_recorded_scalar() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        assert!(matches!(tape.backward(Var(0)), Err(Error::State(_))));
        let v = tape.constant(vec![1.0, 2.0]);
        assert!(matches!(tape.backward(v), Err(Error::State(_))));
    }
}
