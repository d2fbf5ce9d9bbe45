use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::CoarseLabels;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::gnn::backward::{backward_cached, masked_cross_entropy, Gradients};
use crate::gnn::{forward_cached, sparse_features, Dropout, Features, Linear, Model, ModelKind};
use crate::graph::{normalized_adjacency_selfloops, Graph};
use crate::sparse::CsrMatrix;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient; adds `weight_decay · W` to every weight gradient.
    pub weight_decay: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    /// Zero disables early stopping.
    pub patience: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    /// APPNP teleport probability.
    pub beta: f64,
    /// APPNP propagation steps.
    pub steps: usize,
}

impl TrainConfig {
    pub fn gcn() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 60,
            patience: 10,
            hidden_dim: 64,
            dropout: 0.5,
            seed: 0,
            beta: 0.1,
            steps: 10,
        }
    }

    pub fn appnp() -> Self {
        Self {
            epochs: 200,
            ..Self::gcn()
        }
    }

    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => Self::gcn(),
            ModelKind::Appnp => Self::appnp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay {} must be non-negative",
                self.weight_decay
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden dimension must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("teleport probability {} outside (0, 1]", self.beta));
        }
        if self.steps == 0 {
            return bad("APPNP steps must be at least 1".into());
        }
        Ok(())
    }
}

/// First and second moment estimates for every parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Linear>,
    v: Vec<Linear>,
    t: i32,
}

impl AdamState {
    pub fn new(model: &Model) -> Self {
        let zeros: Vec<Linear> = model
            .layers()
            .iter()
            .map(|l| Linear {
                weight: DenseMatrix::zeros(l.in_dim(), l.out_dim()),
                bias: vec![0.0; l.out_dim()],
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> i32 {
        self.t
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr_t: f64, c2: f64) {
    for i in 0..p.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        p[i] -= lr_t * m[i] / ((v[i] / c2).sqrt() + ADAM_EPS);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(model: &mut Model, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t);
    let lr_t = lr / c1;
    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[i];
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        adam_update(
            layer.weight.as_mut_slice(),
            g.weight.as_slice(),
            m.weight.as_mut_slice(),
            v.weight.as_mut_slice(),
            lr_t,
            c2,
        );
        adam_update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias, lr_t, c2);
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation loss (final parameters when there is
    /// no validation set).
    pub model: Model,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// Number of epochs (parameter updates) performed.
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Full-batch Adam training with early stopping on the validation loss.
pub fn train(
    kind: ModelKind,
    prop: &CsrMatrix,
    x: &DenseMatrix,
    labels: &CoarseLabels,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if labels.train_mask.is_empty() {
        return Err(Error::Precondition("training mask is empty".into()));
    }
    let classes = labels
        .train_labels
        .iter()
        .chain(&labels.val_labels)
        .flatten()
        .map(|&c| c + 1)
        .max()
        .unwrap_or(0);
    train_with_classes(kind, prop, x, labels, classes, cfg)
}

/// As [`train`], with the class count given explicitly (it may exceed the
/// labels present in the training set).
pub fn train_with_classes(
    kind: ModelKind,
    prop: &CsrMatrix,
    x: &DenseMatrix,
    labels: &CoarseLabels,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if labels.train_mask.is_empty() {
        return Err(Error::Precondition("training mask is empty".into()));
    }
    let mut model = Model::init(
        kind,
        x.cols(),
        cfg.hidden_dim,
        classes,
        cfg.beta,
        cfg.steps,
        cfg.seed,
    );
    let mut adam = AdamState::new(&model);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd20f_0a7e_5eed_0001);

    let sparse = sparse_features(x);
    let features = sparse.as_ref().map_or(Features::Dense(x), Features::Sparse);

    let mut best: Option<(f64, Model, usize)> = None;
    let mut since_best = 0;
    let mut train_losses = Vec::with_capacity(cfg.epochs);
    let mut val_losses = Vec::new();
    let mut stopped_early = false;
    let mut epochs_run = 0;

    for epoch in 0..cfg.epochs {
        let dropout = (cfg.dropout > 0.0).then(|| Dropout {
            rate: cfg.dropout,
            seed: drop_rng.random(),
        });
        let cache = forward_cached(&model, prop, features, dropout)?;
        let (loss, dlogits) =
            masked_cross_entropy(&cache.logits, &labels.train_labels, &labels.train_mask)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss became {loss} at epoch {epoch}"
            )));
        }
        let grads = backward_cached(&model, prop, &cache, &dlogits, cfg.weight_decay);
        adam_step(&mut model, &grads, &mut adam, cfg.learning_rate);
        train_losses.push(loss);
        epochs_run += 1;

        if labels.val_mask.is_empty() {
            continue;
        }
        let logits = forward_cached(&model, prop, features, None)?.logits;
        let (val, _) = masked_cross_entropy(&logits, &labels.val_labels, &labels.val_mask)?;
        if !val.is_finite() {
            return Err(Error::Numerical(format!(
                "validation loss became {val} at epoch {epoch}"
            )));
        }
        val_losses.push(val);
        if best.as_ref().is_none_or(|(b, _, _)| val < *b) {
            best = Some((val, model.clone(), epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (model, best_epoch) = match best {
        Some((_, m, e)) => (m, e),
        None => (model, epochs_run - 1),
    };
    Ok(TrainOutcome {
        model,
        train_losses,
        val_losses,
        epochs_run,
        best_epoch,
        stopped_early,
    })
}

/// Share of `nodes` whose arg-max logit equals their label.
pub fn accuracy(logits: &DenseMatrix, labels: &[Option<usize>], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let pred = logits.argmax_rows();
    let hits = nodes
        .iter()
        .filter(|&&v| labels[v] == Some(pred[v]))
        .count();
    hits as f64 / nodes.len() as f64
}

/// Evaluate trained parameters on the original graph: returns the logits and
/// the accuracy over `test`.
pub fn predict_full(
    g: &Graph,
    x: &DenseMatrix,
    model: &Model,
    labels: &[Option<usize>],
    test: &[usize],
) -> Result<(DenseMatrix, f64)> {
    if x.rows() != g.n() || labels.len() != g.n() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, features {} rows, labels {}",
            g.n(),
            x.rows(),
            labels.len()
        )));
    }
    let logits = model.forward(&normalized_adjacency_selfloops(g), x, None)?;
    let acc = accuracy(&logits, labels, test);
    Ok((logits, acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = Model::Gcn(crate::gnn::GcnParams {
            layers: vec![Linear::glorot(2, 2, &mut rng)],
        });
        let before = model.clone();
        let mut st = AdamState::new(&model);
        let zero = Gradients {
            layers: vec![Linear::new(DenseMatrix::zeros(2, 2))],
        };
        adam_step(&mut model, &zero, &mut st, 0.01);
        assert_eq!(model, before);
    }

    #[test]
    fn first_step_is_sign_times_lr() {
        let mut model = Model::Gcn(crate::gnn::GcnParams {
            layers: vec![Linear::new(DenseMatrix::zeros(1, 2))],
        });
        let mut st = AdamState::new(&model);
        let g = Gradients {
            layers: vec![Linear {
                weight: DenseMatrix::from_rows(&[vec![3.0, -0.5]]),
                bias: vec![0.0, 0.0],
            }],
        };
        adam_step(&mut model, &g, &mut st, 0.01);
        let w = &model.layers()[0].weight;
        assert!((w.get(0, 0) + 0.01).abs() < 1e-9);
        assert!((w.get(0, 1) - 0.01).abs() < 1e-9);
    }
}
