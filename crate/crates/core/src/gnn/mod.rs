//! Two-layer GCN and APPNP with hand-written reverse mode.
//!
//! Both models run on any symmetric propagation matrix: the normalized
//! adjacency of the original graph or the coarse propagation matrix of a
//! coarse graph. Parameter shapes depend only on feature, hidden and class
//! dimensions, so weights trained on a coarse graph apply unchanged to the
//! original graph.

mod backward;
mod train;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub use backward::{backward, gradient_check, masked_cross_entropy, objective, Gradients};
pub use train::{
    accuracy, adam_step, predict_full, train, train_with_classes, AdamState, TrainConfig,
    TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Appnp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Appnp => "appnp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(ModelKind::Gcn),
            "appnp" => Ok(ModelKind::Appnp),
            _ => Err(Error::Config(format!(
                "unknown model `{s}` (expected gcn or appnp)"
            ))),
        }
    }
}

/// Affine map `x ↦ xW + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new(weight: DenseMatrix) -> Self {
        let bias = vec![0.0; weight.cols()];
        Self { weight, bias }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit));
        Self::new(w)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// GCN layers `Z⁽ᵏ⁾ = ReLU(S Z⁽ᵏ⁻¹⁾ Wₖ + bₖ)`, the last one without ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub layers: Vec<Linear>,
}

/// APPNP: a perceptron `H = f(X)` followed by `steps` rounds of
/// `Z ← (1 − β) S Z + β H` starting from `Z = H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppnpParams {
    pub mlp: Vec<Linear>,
    pub beta: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Gcn(GcnParams),
    Appnp(AppnpParams),
}

impl Model {
    /// Seeded Glorot initialization of a two-layer model `d → hidden → classes`.
    pub fn init(
        kind: ModelKind,
        d: usize,
        hidden: usize,
        classes: usize,
        beta: f64,
        steps: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = vec![
            Linear::glorot(d, hidden, &mut rng),
            Linear::glorot(hidden, classes, &mut rng),
        ];
        match kind {
            ModelKind::Gcn => Model::Gcn(GcnParams { layers }),
            ModelKind::Appnp => Model::Appnp(AppnpParams {
                mlp: layers,
                beta,
                steps,
            }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gcn(_) => ModelKind::Gcn,
            Model::Appnp(_) => ModelKind::Appnp,
        }
    }

    pub fn layers(&self) -> &[Linear] {
        match self {
            Model::Gcn(p) => &p.layers,
            Model::Appnp(p) => &p.mlp,
        }
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        match self {
            Model::Gcn(p) => &mut p.layers,
            Model::Appnp(p) => &mut p.mlp,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(Linear::num_params).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.layers();
        if layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        for l in layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
        }
        if let Model::Appnp(p) = self {
            if !(p.beta > 0.0 && p.beta <= 1.0) {
                return Err(Error::Config(format!(
                    "teleport probability {} outside (0, 1]",
                    p.beta
                )));
            }
            if p.steps == 0 {
                return Err(Error::Config(
                    "APPNP needs at least one propagation step".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        prop: &CsrMatrix,
        x: &DenseMatrix,
        dropout: Option<Dropout>,
    ) -> Result<DenseMatrix> {
        Ok(forward_cached(self, prop, Features::Dense(x), dropout)?.logits)
    }
}

/// Training-mode dropout: rate and the seed fixing every mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

/// Inverted dropout mask entries: `0` or `1 / (1 − rate)`.
fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let keep = 1.0 / (1.0 - rate);
    DenseMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// Node features as given to the first layer.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Features<'a> {
    Dense(&'a DenseMatrix),
    Sparse(&'a CsrMatrix),
}

/// Stored-entry share below which features are kept sparse during training.
const SPARSE_FEATURE_DENSITY: f64 = 0.1;

/// Sparse copy of `x` when few of its entries are nonzero.
pub(crate) fn sparse_features(x: &DenseMatrix) -> Option<CsrMatrix> {
    let nnz = x.as_slice().iter().filter(|&&v| v != 0.0).count();
    ((nnz as f64) < SPARSE_FEATURE_DENSITY * x.len() as f64).then(|| CsrMatrix::from_dense(x))
}

impl Features<'_> {
    fn rows(&self) -> usize {
        match self {
            Features::Dense(d) => d.rows(),
            Features::Sparse(s) => s.rows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            Features::Dense(d) => d.cols(),
            Features::Sparse(s) => s.cols(),
        }
    }
}

/// Input of one layer after dropout.
pub(crate) enum LayerInput<'a> {
    Dense(Cow<'a, DenseMatrix>),
    Sparse(Cow<'a, CsrMatrix>),
}

impl LayerInput<'_> {
    fn matmul(&self, w: &DenseMatrix) -> DenseMatrix {
        match self {
            LayerInput::Dense(d) => d.matmul(w),
            LayerInput::Sparse(s) => s.spmm(w),
        }
    }

    /// `selfᵀ g`.
    pub(crate) fn t_matmul(&self, g: &DenseMatrix) -> DenseMatrix {
        match self {
            LayerInput::Dense(d) => d.t_matmul(g),
            LayerInput::Sparse(s) => s.t_spmm(g),
        }
    }
}

/// Inverted dropout on the input features, drawing only for nonzero entries
/// in row-major order (a dropped zero stays zero). No gradient flows to the
/// features, so no mask is kept. Dense and sparse storage give the same
/// result.
fn dropout_input<'a>(x: Features<'a>, rate: f64, rng: &mut ChaCha8Rng) -> LayerInput<'a> {
    let keep = 1.0 / (1.0 - rate);
    match x {
        Features::Dense(d) => {
            let mut out = d.clone();
            for v in out.as_mut_slice() {
                if *v != 0.0 {
                    *v = if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        *v * keep
                    };
                }
            }
            LayerInput::Dense(Cow::Owned(out))
        }
        Features::Sparse(s) => LayerInput::Sparse(Cow::Owned(s.filter_map_entries(|_, _, v| {
            if v == 0.0 {
                return None;
            }
            (rng.random::<f64>() >= rate).then_some(v * keep)
        }))),
    }
}

/// Activations kept for the backward pass.
pub(crate) struct Cache<'a> {
    /// Input of each layer after dropout.
    pub inputs: Vec<LayerInput<'a>>,
    /// Dropout mask applied to each hidden layer input, if any. Always
    /// `None` for the first layer.
    pub masks: Vec<Option<DenseMatrix>>,
    /// Pre-activation of each layer.
    pub pre: Vec<DenseMatrix>,
    pub logits: DenseMatrix,
}

fn check_shapes(model: &Model, prop: &CsrMatrix, x: &Features) -> Result<()> {
    model.validate()?;
    if prop.rows() != prop.cols() || prop.rows() != x.rows() {
        return Err(Error::Shape(format!(
            "propagation matrix is {}x{} but features have {} rows",
            prop.rows(),
            prop.cols(),
            x.rows()
        )));
    }
    if model.layers()[0].in_dim() != x.cols() {
        return Err(Error::Shape(format!(
            "features have {} columns, first layer expects {}",
            x.cols(),
            model.layers()[0].in_dim()
        )));
    }
    Ok(())
}

/// `(1 − β) S Z + β H` repeated `steps` times from `Z = H`.
pub fn appnp_propagate(prop: &CsrMatrix, h: &DenseMatrix, beta: f64, steps: usize) -> DenseMatrix {
    let mut z = h.clone();
    for _ in 0..steps {
        let mut next = prop.spmm(&z);
        next.scale_in_place(1.0 - beta);
        next.axpy(beta, h);
        z = next;
    }
    z
}

pub(crate) fn forward_cached<'a>(
    model: &Model,
    prop: &CsrMatrix,
    x: Features<'a>,
    dropout: Option<Dropout>,
) -> Result<Cache<'a>> {
    check_shapes(model, prop, &x)?;
    if let Some(d) = dropout {
        if !(0.0..1.0).contains(&d.rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                d.rate
            )));
        }
    }
    let mut rng = dropout.map(|d| ChaCha8Rng::seed_from_u64(d.seed));
    let layers = model.layers();
    let last = layers.len() - 1;
    let mut cache = Cache {
        inputs: Vec::with_capacity(layers.len()),
        masks: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
        logits: DenseMatrix::zeros(0, 0),
    };
    let rate = dropout.map_or(0.0, |d| d.rate);
    let mut h = match x {
        Features::Dense(d) => LayerInput::Dense(Cow::Borrowed(d)),
        Features::Sparse(s) => LayerInput::Sparse(Cow::Borrowed(s)),
    };
    for (i, layer) in layers.iter().enumerate() {
        let mut mask = None;
        if let (true, Some(r)) = (rate > 0.0, rng.as_mut()) {
            if i == 0 {
                h = dropout_input(x, rate, r);
            } else {
                let LayerInput::Dense(d) = &h else {
                    unreachable!("hidden activations are dense")
                };
                let m = dropout_mask(d.rows(), d.cols(), rate, r);
                h = LayerInput::Dense(Cow::Owned(d.zip_map(&m, |a, b| a * b)));
                mask = Some(m);
            }
        }
        let t = h.matmul(&layer.weight);
        let mut s = match model {
            Model::Gcn(_) => prop.spmm(&t),
            Model::Appnp(_) => t,
        };
        s.add_row_vector(&layer.bias);
        cache.inputs.push(h);
        cache.masks.push(mask);
        h = LayerInput::Dense(Cow::Owned(if i < last {
            s.map(|v| v.max(0.0))
        } else {
            s.clone()
        }));
        cache.pre.push(s);
    }
    let LayerInput::Dense(h) = h else {
        unreachable!("layer outputs are dense")
    };
    let h = h.into_owned();
    cache.logits = match model {
        Model::Gcn(_) => h,
        Model::Appnp(p) => appnp_propagate(prop, &h, p.beta, p.steps),
    };
    Ok(cache)
}

pub fn gcn_forward(
    prop: &CsrMatrix,
    x: &DenseMatrix,
    p: &GcnParams,
    dropout: Option<Dropout>,
) -> Result<DenseMatrix> {
    forward_cached(&Model::Gcn(p.clone()), prop, Features::Dense(x), dropout).map(|c| c.logits)
}

pub fn appnp_forward(
    prop: &CsrMatrix,
    x: &DenseMatrix,
    p: &AppnpParams,
    dropout: Option<Dropout>,
) -> Result<DenseMatrix> {
    forward_cached(&Model::Appnp(p.clone()), prop, Features::Dense(x), dropout).map(|c| c.logits)
}

/// `Z = β (I − (1 − β) S)⁻¹ H`, solved column by column with conjugate
/// gradients. The system matrix has spectrum in `[β, 2 − β]`.
pub fn ppnp_exact(prop: &CsrMatrix, h: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "teleport probability {beta} outside (0, 1]"
        )));
    }
    if prop.rows() != h.rows() || prop.cols() != h.rows() {
        return Err(Error::Shape(format!(
            "propagation matrix is {}x{}, H has {} rows",
            prop.rows(),
            prop.cols(),
            h.rows()
        )));
    }
    let n = h.rows();
    let apply = |v: &[f64]| -> Vec<f64> {
        let sv = prop.matvec(v);
        v.iter()
            .zip(sv)
            .map(|(a, b)| a - (1.0 - beta) * b)
            .collect()
    };
    let mut z = DenseMatrix::zeros(n, h.cols());
    for c in 0..h.cols() {
        let rhs: Vec<f64> = h.column(c).iter().map(|v| beta * v).collect();
        let sol = conjugate_gradient(&apply, &rhs, 1e-14, 20 * n + 1000)?;
        z.set_column(c, &sol);
    }
    Ok(z)
}

/// Conjugate gradients for a symmetric positive definite operator, starting
/// from zero. Stops when the residual 2-norm drops below `tol · ‖b‖`.
pub(crate) fn conjugate_gradient(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    use crate::dense::dot;
    let bn = dot(b, b).sqrt();
    let mut x = vec![0.0; b.len()];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iters {
        if rr.sqrt() <= tol * bn {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Numerical(
                "conjugate gradient breakdown: operator not positive definite".into(),
            ));
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    if rr.sqrt() <= 1e-10 * bn {
        return Ok(x);
    }
    Err(Error::Numerical(format!(
        "conjugate gradient stalled at relative residual {:e}",
        rr.sqrt() / bn
    )))
}
