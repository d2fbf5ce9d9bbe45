use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::gnn::{forward_cached, Cache, Dropout, Features, Linear, Model};
use crate::sparse::CsrMatrix;

/// Gradients with the same block layout as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Linear>,
}

/// Mean of `−log softmax(logits)[label]` over the rows in `mask`, and its
/// gradient with respect to every logit (zero outside the mask).
pub fn masked_cross_entropy(
    logits: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(Error::Precondition(
            "cross entropy over an empty mask".into(),
        ));
    }
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let scale = 1.0 / mask.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &i in mask {
        let y =
            labels[i].ok_or_else(|| Error::Precondition(format!("masked row {i} has no label")))?;
        if y >= logits.cols() {
            return Err(Error::Shape(format!(
                "label {y} with {} classes",
                logits.cols()
            )));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[y];
        let g = grad.row_mut(i);
        for (c, gc) in g.iter_mut().enumerate() {
            *gc = (row[c] - log_z).exp() * scale;
        }
        g[y] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Adjoint of [`appnp_propagate`](crate::gnn::appnp_propagate).
fn appnp_adjoint(prop: &CsrMatrix, g: &DenseMatrix, beta: f64, steps: usize) -> DenseMatrix {
    let mut dh = DenseMatrix::zeros(g.rows(), g.cols());
    let mut g = g.clone();
    for _ in 0..steps {
        dh.axpy(beta, &g);
        g = prop.t_spmm(&g);
        g.scale_in_place(1.0 - beta);
    }
    dh.axpy(1.0, &g);
    dh
}

pub(crate) fn backward_cached(
    model: &Model,
    prop: &CsrMatrix,
    cache: &Cache,
    dlogits: &DenseMatrix,
    weight_decay: f64,
) -> Gradients {
    let mut g = match model {
        Model::Gcn(_) => dlogits.clone(),
        Model::Appnp(p) => appnp_adjoint(prop, dlogits, p.beta, p.steps),
    };
    let layers = model.layers();
    let last = layers.len() - 1;
    let mut out: Vec<Linear> = Vec::with_capacity(layers.len());
    for i in (0..layers.len()).rev() {
        if i < last {
            g = g.zip_map(&cache.pre[i], |gv, s| if s > 0.0 { gv } else { 0.0 });
        }
        let bias = g.column_sums();
        let dt = match model {
            Model::Gcn(_) => prop.t_spmm(&g),
            Model::Appnp(_) => g,
        };
        let mut weight = cache.inputs[i].t_matmul(&dt);
        if weight_decay != 0.0 {
            weight.axpy(weight_decay, &layers[i].weight);
        }
        out.push(Linear { weight, bias });
        if i > 0 {
            let mut dh = dt.matmul_t(&layers[i].weight);
            if let Some(m) = &cache.masks[i] {
                dh = dh.zip_map(m, |a, b| a * b);
            }
            g = dh;
        } else {
            break;
        }
    }
    out.reverse();
    Gradients { layers: out }
}

/// Parameter gradients of `⟨dlogits, logits⟩ + (weight_decay / 2) Σ‖W‖²`,
/// where `logits` is the forward pass under the same dropout masks.
pub fn backward(
    model: &Model,
    prop: &CsrMatrix,
    x: &DenseMatrix,
    dropout: Option<Dropout>,
    dlogits: &DenseMatrix,
    weight_decay: f64,
) -> Result<Gradients> {
    let cache = forward_cached(model, prop, Features::Dense(x), dropout)?;
    if dlogits.shape() != cache.logits.shape() {
        return Err(Error::Shape(format!(
            "loss gradient is {:?}, logits are {:?}",
            dlogits.shape(),
            cache.logits.shape()
        )));
    }
    Ok(backward_cached(model, prop, &cache, dlogits, weight_decay))
}

/// Training objective: masked cross entropy plus `(weight_decay / 2) Σ‖W‖²`.
pub fn objective(
    model: &Model,
    prop: &CsrMatrix,
    x: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
    dropout: Option<Dropout>,
    weight_decay: f64,
) -> Result<f64> {
    let logits = forward_cached(model, prop, Features::Dense(x), dropout)?.logits;
    let (ce, _) = masked_cross_entropy(&logits, labels, mask)?;
    let l2: f64 = model
        .layers()
        .iter()
        .map(|l| l.weight.as_slice().iter().map(|w| w * w).sum::<f64>())
        .sum();
    Ok(ce + 0.5 * weight_decay * l2)
}

/// Parameter `idx` of layer `li`, weights first (row-major), then biases.
fn param_mut(m: &mut Model, li: usize, idx: usize) -> &mut f64 {
    let layer = &mut m.layers_mut()[li];
    let nw = layer.weight.len();
    if idx < nw {
        &mut layer.weight.as_mut_slice()[idx]
    } else {
        &mut layer.bias[idx - nw]
    }
}

/// Largest relative gap between the hand-derived gradient and central
/// finite differences with step `h`, over every parameter. The relative
/// gap is `|a − b| / max(|a|, |b|, floor)`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    model: &Model,
    prop: &CsrMatrix,
    x: &DenseMatrix,
    labels: &[Option<usize>],
    mask: &[usize],
    dropout: Option<Dropout>,
    weight_decay: f64,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let cache = forward_cached(model, prop, Features::Dense(x), dropout)?;
    let (_, dlogits) = masked_cross_entropy(&cache.logits, labels, mask)?;
    let grads = backward_cached(model, prop, &cache, &dlogits, weight_decay);
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for li in 0..model.layers().len() {
        let nw = model.layers()[li].weight.len();
        let nb = model.layers()[li].bias.len();
        for idx in 0..nw + nb {
            let original = *param_mut(&mut probe, li, idx);
            *param_mut(&mut probe, li, idx) = original + h;
            let up = objective(&probe, prop, x, labels, mask, dropout, weight_decay)?;
            *param_mut(&mut probe, li, idx) = original - h;
            let down = objective(&probe, prop, x, labels, mask, dropout, weight_decay)?;
            *param_mut(&mut probe, li, idx) = original;
            let numeric = (up - down) / (2.0 * h);
            let g = &grads.layers[li];
            let analytic = if idx < nw {
                g.weight.as_slice()[idx]
            } else {
                g.bias[idx - nw]
            };
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
