//! Full-batch graph convolutional classifier.
//!
//! Layer `l` computes `S H Θ_l`, with ReLU on every layer but the last and a
//! row softmax on the output. Gradients are derived by hand. Training follows
//! the usual GCN recipe: row-normalized features, Glorot init without bias,
//! inverted dropout on the sparse input and on hidden activations, L2 on the
//! first layer, Adam, and early stopping on validation loss.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::graph::AffinityMatrix;
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Propagation matrix with its transpose when it is not symmetric.
#[derive(Debug, Clone)]
pub struct Filter {
    s: CsrMatrix,
    st: Option<CsrMatrix>,
}

impl Filter {
    pub fn new(s: CsrMatrix) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::Dimension("filter must be square".into()));
        }
        let st = (!s.is_symmetric()).then(|| s.transpose());
        Ok(Self { s, st })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.s
    }

    fn transposed(&self) -> &CsrMatrix {
        self.st.as_ref().unwrap_or(&self.s)
    }
}

impl From<AffinityMatrix> for Filter {
    fn from(a: AffinityMatrix) -> Self {
        Filter::new(a.into_csr()).expect("affinity is square")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<DenseMatrix>,
}

impl ModelParams {
    /// Glorot-uniform weights for the widths `c_0, c_1, ..., c_l`.
    pub fn glorot(widths: &[usize], rng: &mut Pcg64) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {widths:?}")));
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let data = (0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)).collect();
                DenseMatrix::from_vec(w[0], w[1], data).expect("sized")
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            layers: widths.windows(2).map(|w| DenseMatrix::zeros(w[0], w[1])).collect(),
        }
    }

    fn check(&self, input_width: usize) -> Result<()> {
        let mut width = input_width;
        for (l, m) in self.layers.iter().enumerate() {
            if m.rows() != width {
                return Err(Error::Dimension(format!(
                    "layer {l} expects {} inputs, gets {width}",
                    m.rows()
                )));
            }
            width = m.cols();
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("model has no layers".into()));
        }
        Ok(())
    }

    /// Text checkpoint: a header, then per layer a `shape` line and one line
    /// of tab-separated values per row at 17 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#hwgcn-model v1 layers={}\n", self.layers.len());
        for m in &self.layers {
            let _ = writeln!(out, "shape\t{}\t{}", m.rows(), m.cols());
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(out, "{}", row.join("\t"));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(input: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((no, Ok(l))) => Ok((no, l)),
                Some((_, Err(e))) => Err(Error::io(path, e)),
                None => Err(Error::parse(path, 0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let (_, header) = next("header")?;
        let count: usize = header
            .strip_prefix("#hwgcn-model v1 layers=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "not a model checkpoint"))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, shape) = next("shape line")?;
            let dims: Vec<usize> = shape
                .strip_prefix("shape\t")
                .map(|s| s.split('\t').filter_map(|v| v.parse().ok()).collect())
                .unwrap_or_default();
            let [rows, cols] = dims[..] else {
                return Err(Error::parse(path, no, "expected `shape<TAB>rows<TAB>cols`"));
            };
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (no, line) = next("matrix row")?;
                let before = data.len();
                for v in line.split('\t') {
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::parse(path, no, format!("bad value {v:?}")))?;
                    if !v.is_finite() {
                        return Err(Error::parse(path, no, "non-finite value"));
                    }
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(Error::parse(path, no, format!("expected {cols} values")));
                }
            }
            layers.push(DenseMatrix::from_vec(rows, cols, data)?);
        }
        Ok(Self { layers })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file), path)
    }
}

/// Dropout rate and the stream its masks are drawn from.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Pcg64,
}

#[derive(Debug, Clone)]
enum LayerInput {
    Sparse(CsrMatrix),
    Dense(DenseMatrix),
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<LayerInput>,
    /// Dropout scale per hidden input: kept entries carry `1/keep`, dropped 0.
    masks: Vec<Option<Vec<f64>>>,
    /// Pre-activations of hidden layers.
    pre: Vec<DenseMatrix>,
    pub logits: DenseMatrix,
    pub probs: DenseMatrix,
}

fn sparse_dropout(x: &CsrMatrix, d: &mut Dropout) -> CsrMatrix {
    let keep = 1.0 - d.rate;
    let values: Vec<f64> = x
        .values()
        .iter()
        .map(|&v| if d.rng.gen::<f64>() < keep { v / keep } else { 0.0 })
        .collect();
    CsrMatrix::new(x.nrows(), x.ncols(), x.indptr().to_vec(), x.indices().to_vec(), values)
        .expect("same pattern")
}

fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Runs the model. With `dropout`, masks are drawn for the input and every
/// hidden activation.
pub fn forward(
    filter: &Filter,
    x: &CsrMatrix,
    params: &ModelParams,
    mut dropout: Option<Dropout>,
) -> Result<ForwardCache> {
    params.check(x.ncols())?;
    if x.nrows() != filter.n() {
        return Err(Error::Dimension(format!(
            "{} feature rows for a filter over {} nodes",
            x.nrows(),
            filter.n()
        )));
    }
    let depth = params.layers.len();
    let mut inputs = Vec::with_capacity(depth);
    let mut masks = Vec::with_capacity(depth);
    let mut pre = Vec::with_capacity(depth - 1);
    let x_in = match dropout.as_mut() {
        Some(d) if d.rate > 0.0 => sparse_dropout(x, d),
        _ => x.clone(),
    };
    let mut z = filter.s.mul_dense(&x_in.mul_dense(&params.layers[0])?)?;
    inputs.push(LayerInput::Sparse(x_in));
    masks.push(None);
    for (l, theta) in params.layers.iter().enumerate().skip(1) {
        if !z.is_finite() {
            return Err(Error::NonFiniteActivation { layer: l - 1 });
        }
        let mut h = z.clone();
        for v in h.as_mut_slice() {
            *v = v.max(0.0);
        }
        let mask = match dropout.as_mut() {
            Some(d) if d.rate > 0.0 => {
                let keep = 1.0 - d.rate;
                let mask: Vec<f64> = (0..h.as_slice().len())
                    .map(|_| if d.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                for (v, m) in h.as_mut_slice().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        pre.push(z);
        z = filter.s.mul_dense(&h.matmul(theta)?)?;
        inputs.push(LayerInput::Dense(h));
        masks.push(mask);
    }
    if !z.is_finite() {
        return Err(Error::NonFiniteActivation { layer: depth - 1 });
    }
    let probs = softmax_rows(&z);
    Ok(ForwardCache {
        inputs,
        masks,
        pre,
        logits: z,
        probs,
    })
}

fn check_nodes(nodes: &[usize], n: usize, what: &'static str) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask(what));
    }
    if let Some(&i) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::NodeOutOfRange { index: i, n });
    }
    Ok(())
}

/// Mean cross-entropy over `nodes` (repeats count) plus `l2/2 ‖Θ_1‖²`.
pub fn loss(
    cache: &ForwardCache,
    params: &ModelParams,
    labels: &[usize],
    nodes: &[usize],
    l2: f64,
) -> Result<f64> {
    check_nodes(nodes, cache.logits.rows(), "loss nodes")?;
    let mut total = 0.0;
    for &i in nodes {
        let row = cache.logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[labels[i]];
    }
    let reg: f64 = params.layers[0].as_slice().iter().map(|v| v * v).sum();
    Ok(total / nodes.len() as f64 + 0.5 * l2 * reg)
}

/// Exact gradients of [`loss`] with respect to every layer.
pub fn backward(
    filter: &Filter,
    cache: &ForwardCache,
    params: &ModelParams,
    labels: &[usize],
    nodes: &[usize],
    l2: f64,
) -> Result<Vec<DenseMatrix>> {
    let n = cache.probs.rows();
    check_nodes(nodes, n, "training nodes")?;
    let classes = cache.probs.cols();
    let mut dz = DenseMatrix::zeros(n, classes);
    let scale = 1.0 / nodes.len() as f64;
    for &i in nodes {
        let p = cache.probs.row(i);
        let out = dz.row_mut(i);
        for (c, (o, &pc)) in out.iter_mut().zip(p).enumerate() {
            *o += scale * (pc - if c == labels[i] { 1.0 } else { 0.0 });
        }
    }
    let st = filter.transposed();
    let depth = params.layers.len();
    let mut grads = vec![DenseMatrix::zeros(0, 0); depth];
    for l in (0..depth).rev() {
        // z_l = S · in_l · Θ_l
        let g = st.mul_dense(&dz)?;
        match &cache.inputs[l] {
            LayerInput::Sparse(x) => {
                grads[l] = x.transpose().mul_dense(&g)?;
            }
            LayerInput::Dense(h) => {
                grads[l] = h.t_matmul(&g)?;
                let mut dh = g.matmul_t(&params.layers[l])?;
                if let Some(mask) = &cache.masks[l] {
                    for (v, m) in dh.as_mut_slice().iter_mut().zip(mask) {
                        *v *= m;
                    }
                }
                for (v, &p) in dh.as_mut_slice().iter_mut().zip(cache.pre[l - 1].as_slice()) {
                    if p <= 0.0 {
                        *v = 0.0;
                    }
                }
                dz = dh;
            }
        }
    }
    if l2 != 0.0 {
        for (g, &w) in grads[0].as_mut_slice().iter_mut().zip(params.layers[0].as_slice()) {
            *g += l2 * w;
        }
    }
    Ok(grads)
}

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .layers
            .iter()
            .map(|m| DenseMatrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[DenseMatrix],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.layers.len() || state.m.len() != params.layers.len() {
        return Err(Error::Dimension("gradient and state count differ from layers".into()));
    }
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (((theta, g), m), v) in params
        .layers
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        if theta.shape() != g.shape() || theta.shape() != m.shape() {
            return Err(Error::Dimension("gradient shape differs from layer".into()));
        }
        let parts = theta
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice());
        for (((w, &gi), mi), vi) in parts {
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Argmax per row; ties go to the lowest class.
pub fn predictions(scores: &DenseMatrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose argmax matches the label.
pub fn accuracy(scores: &DenseMatrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    check_nodes(nodes, scores.rows(), "evaluation nodes")?;
    let pred = predictions(scores);
    let hits = nodes.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Accuracy with dropout off.
pub fn evaluate(
    params: &ModelParams,
    filter: &Filter,
    x: &CsrMatrix,
    labels: &[usize],
    nodes: &[usize],
) -> Result<f64> {
    check_nodes(nodes, x.nrows(), "evaluation nodes")?;
    let cache = forward(filter, x, params, None)?;
    accuracy(&cache.logits, labels, nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    /// Number of graph convolutions.
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    /// Weight decay on the first layer.
    pub l2: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    /// Stop once validation loss exceeds the mean of this many previous
    /// epochs; `None` runs every epoch.
    pub early_stop: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 16,
            lr: 0.01,
            l2: 5e-4,
            dropout: 0.5,
            max_epochs: 200,
            early_stop: Some(10),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.layers >= 1
            && self.hidden >= 1
            && self.lr > 0.0
            && self.l2 >= 0.0
            && (0.0..1.0).contains(&self.dropout)
            && self.max_epochs >= 1
            && self.early_stop != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid training config {self:?}")))
        }
    }
}

/// Node lists used by [`train`].
#[derive(Debug, Clone, Copy)]
pub struct Masks<'a> {
    pub train: &'a [usize],
    pub val: &'a [usize],
    pub test: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Test accuracy of the model after the last epoch run.
    pub test_accuracy: f64,
    pub val_accuracy: Vec<f64>,
    /// Validation loss including the weight-decay term.
    pub val_loss: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch (0-based) with the highest validation accuracy, earliest on ties.
    pub best_val_epoch: usize,
    pub test_accuracy_at_best_val: f64,
    pub params: ModelParams,
}

/// Trains from a seeded Glorot start.
pub fn train(
    filter: &Filter,
    x: &CsrMatrix,
    labels: &[usize],
    classes: usize,
    masks: Masks,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.validate()?;
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} nodes", labels.len())));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= classes) {
        return Err(Error::InvalidArgument(format!("label {c} of {classes} classes")));
    }
    check_nodes(masks.train, n, "training nodes")?;
    check_nodes(masks.test, n, "test nodes")?;
    if cfg.early_stop.is_some() {
        check_nodes(masks.val, n, "validation nodes")?;
    }
    let mut seen = vec![false; classes];
    masks.train.iter().for_each(|&i| seen[labels[i]] = true);
    if let Some(c) = seen.iter().position(|s| !s) {
        log::warn!("class {c} has no training node");
    }

    let mut rng = Pcg64::seed_from_u64(cfg.seed);
    let mut widths = vec![x.ncols()];
    widths.extend(std::iter::repeat(cfg.hidden).take(cfg.layers - 1));
    widths.push(classes);
    let mut params = ModelParams::glorot(&widths, &mut rng)?;
    let mut adam = AdamState::new(&params);

    let mut result = TrainResult {
        test_accuracy: 0.0,
        val_accuracy: Vec::new(),
        val_loss: Vec::new(),
        train_loss: Vec::new(),
        epochs_run: 0,
        stopped_early: false,
        best_val_epoch: 0,
        test_accuracy_at_best_val: 0.0,
        params: params.clone(),
    };
    let mut best_val = f64::NEG_INFINITY;
    for epoch in 0..cfg.max_epochs {
        let cache = forward(
            filter,
            x,
            &params,
            Some(Dropout {
                rate: cfg.dropout,
                rng: &mut rng,
            }),
        )?;
        result.train_loss.push(loss(&cache, &params, labels, masks.train, cfg.l2)?);
        let grads = backward(filter, &cache, &params, labels, masks.train, cfg.l2)?;
        adam_step(&mut params, &grads, &mut adam, cfg.lr)?;

        let eval = forward(filter, x, &params, None)?;
        let (val_loss, val_acc) = if masks.val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                loss(&eval, &params, labels, masks.val, cfg.l2)?,
                accuracy(&eval.logits, labels, masks.val)?,
            )
        };
        result.val_loss.push(val_loss);
        result.val_accuracy.push(val_acc);
        result.epochs_run = epoch + 1;
        if val_acc > best_val {
            best_val = val_acc;
            result.best_val_epoch = epoch;
            result.test_accuracy_at_best_val = accuracy(&eval.logits, labels, masks.test)?;
        }
        if let Some(window) = cfg.early_stop {
            let h = &result.val_loss;
            if epoch > window {
                let prev = &h[h.len() - 1 - window..h.len() - 1];
                let mean = prev.iter().sum::<f64>() / window as f64;
                if val_loss > mean {
                    result.stopped_early = true;
                    break;
                }
            }
        }
    }
    result.test_accuracy = evaluate(&params, filter, x, labels, masks.test)?;
    result.params = params;
    Ok(result)
}
