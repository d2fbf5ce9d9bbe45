//! Numerical checks of how well a partition preserves a subspace and of the
//! propagation fixed points.

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coarse::coarse_graph;
use crate::dense::{dot, DenseMatrix};
use crate::eigen::{eigen_smallest_k, from_nalgebra, symmetric_eigen, to_nalgebra};
use crate::error::{Error, Result};
use crate::gnn::appnp_propagate;
use crate::graph::{component_members, group_by_label, laplacian, normalized_laplacian, Graph};
use crate::kmeans::partition_cost;
use crate::partition::Partition;
use crate::sparse::CsrMatrix;

const ORTHONORMAL_TOL: f64 = 1e-10;

fn check_orthonormal(v: &DenseMatrix) -> Result<()> {
    let gram = v.t_matmul(v);
    let err = gram.max_abs_diff(&DenseMatrix::identity(v.cols()));
    if err >= ORTHONORMAL_TOL {
        return Err(Error::Precondition(format!(
            "basis is not orthonormal: max |VᵀV − I| = {err:e}"
        )));
    }
    Ok(())
}

fn check_partition(v: &DenseMatrix, p: &Partition) -> Result<()> {
    if v.rows() != p.n() {
        return Err(Error::Shape(format!(
            "basis has {} rows, partition covers {} nodes",
            v.rows(),
            p.n()
        )));
    }
    Ok(())
}

/// `‖I − VᵀPPᵀV‖₁`. The matrix is PSD, so its nuclear norm is its trace,
/// `k − ‖PᵀV‖²_F`.
pub fn nuclear_error(v: &DenseMatrix, p: &Partition) -> Result<f64> {
    check_partition(v, p)?;
    check_orthonormal(v)?;
    let ptv = p.restrict_rows(v)?;
    let fro2: f64 = ptv.as_slice().iter().map(|x| x * x).sum();
    Ok((v.cols() as f64 - fro2).max(0.0))
}

/// Sum of squared distances from the rows of `v` to their cluster centroids.
pub fn kmeans_cost(v: &DenseMatrix, p: &Partition) -> Result<f64> {
    check_partition(v, p)?;
    Ok(partition_cost(v, p.assignment(), p.k()))
}

/// `‖I − VᵀPPᵀV‖₂`, the largest share of a unit vector of `span(V)` lost by
/// the projection `PPᵀ`.
pub fn spectral_error(v: &DenseMatrix, p: &Partition) -> Result<f64> {
    check_partition(v, p)?;
    check_orthonormal(v)?;
    if v.cols() == 0 {
        return Ok(0.0);
    }
    let ptv = p.restrict_rows(v)?;
    let m = DenseMatrix::identity(v.cols()).sub(&ptv.t_matmul(&ptv));
    let top = *symmetric_eigen(&m).values.last().expect("nonempty");
    Ok(top.clamp(0.0, 1.0))
}

/// Orthonormal indicators of the connected components of the graph whose
/// Laplacian is `l`: a basis of its nullspace.
fn nullspace_basis(l: &CsrMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for (u, w) in l.row_iter(v) {
                if u != v && w != 0.0 && label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    let groups = group_by_label(&label);
    let mut basis = DenseMatrix::zeros(n, groups.len());
    for (c, members) in groups.iter().enumerate() {
        let s = 1.0 / (members.len() as f64).sqrt();
        for &v in members {
            basis.set(v, c, s);
        }
    }
    basis
}

/// `V` with its components along the Laplacian nullspace removed.
pub fn deflate(l: &CsrMatrix, v: &DenseMatrix) -> DenseMatrix {
    let null = nullspace_basis(l);
    let coef = null.t_matmul(v);
    v.sub(&null.matmul(&coef))
}

/// Largest generalized eigenvalue of `(a, b)` with `b` PSD, restricted to
/// the range of `b`. Whitens with a Cholesky factor when `b` is well
/// conditioned, otherwise with its pseudo-inverse square root.
fn max_generalized_eigenvalue(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let eb = symmetric_eigen(b);
    let top = eb.values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Numerical("VᵀLV vanishes after deflation".into()));
    }
    let low = eb.values[0];
    let whitened = if low > 0.0 && top / low <= 1e12 {
        let chol = Cholesky::new(to_nalgebra(b))
            .ok_or_else(|| Error::Numerical("Cholesky factorization of VᵀLV failed".into()))?;
        let r = chol.l();
        let a_na = to_nalgebra(a);
        let left = r
            .solve_lower_triangular(&a_na)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let both = r
            .solve_lower_triangular(&left.transpose())
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        DenseMatrix::from_fn(both.nrows(), both.ncols(), |i, j| {
            0.5 * (both[(i, j)] + both[(j, i)])
        })
    } else {
        let keep: Vec<usize> = (0..eb.values.len())
            .filter(|&i| eb.values[i] > 1e-12 * top)
            .collect();
        let mut w = eb.vectors.select_columns(&keep);
        for (c, &i) in keep.iter().enumerate() {
            let s = 1.0 / eb.values[i].sqrt();
            for r in 0..w.rows() {
                w.set(r, c, w.get(r, c) * s);
            }
        }
        let m = w.t_matmul(&a.matmul(&w));
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
    };
    Ok(symmetric_eigen(&whitened)
        .values
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0))
}

/// `ε̂ = max_{y ∈ span(V)} ‖y − PPᵀy‖_L / ‖y‖_L`, with `span(V)` taken after
/// removing the Laplacian nullspace.
pub fn restricted_l_error(v: &DenseMatrix, p: &Partition, l: &CsrMatrix) -> Result<f64> {
    check_partition(v, p)?;
    if l.rows() != v.rows() || l.cols() != v.rows() {
        return Err(Error::Shape(format!(
            "Laplacian is {}x{}, basis has {} rows",
            l.rows(),
            l.cols(),
            v.rows()
        )));
    }
    let vd = deflate(l, v);
    let b = vd.t_matmul(&l.spmm(&vd));
    let resid = vd.sub(&p.project(&vd)?);
    let a = resid.t_matmul(&l.spmm(&resid));
    Ok(max_generalized_eigenvalue(&a, &b)?.sqrt())
}

/// Outcome of sampling the quadratic-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCheck {
    pub epsilon_hat: f64,
    pub samples: usize,
    pub violations: usize,
    /// Largest observed `|yᵀLy − xᵀPᵀLPx| / yᵀLy`.
    pub worst_ratio: f64,
}

/// Sample `y ∈ span(V)` (deflated) and count violations of
/// `|yᵀLy − xᵀPᵀLPx| ≤ 3 ε̂ yᵀLy + 1e−10` with `x = Pᵀy`.
pub fn epsilon_similarity_check(
    l: &CsrMatrix,
    p: &Partition,
    v: &DenseMatrix,
    samples: usize,
    seed: u64,
) -> Result<SimilarityCheck> {
    let eps = restricted_l_error(v, p, l)?;
    if eps >= 1.0 {
        return Err(Error::Precondition(format!(
            "ε̂ = {eps} is not below 1; the bound does not apply"
        )));
    }
    let vd = deflate(l, v);
    // Coarse Laplacian PᵀLP applied through P: xᵀPᵀLPx = (Px)ᵀ L (Px).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let c: Vec<f64> = (0..vd.cols())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let y = vd.matvec(&c);
        let ly = l.matvec(&y);
        let full = dot(&y, &ly);
        let ym = DenseMatrix::from_vec(y.len(), 1, y).expect("finite sample");
        let py = p.project(&ym)?;
        let lpy = l.matvec(py.as_slice());
        let coarse = dot(py.as_slice(), &lpy);
        let gap = (full - coarse).abs();
        if gap > 3.0 * eps * full + 1e-10 {
            violations += 1;
        }
        if full > 0.0 {
            worst = worst.max(gap / full);
        }
    }
    Ok(SimilarityCheck {
        epsilon_hat: eps,
        samples,
        violations,
        worst_ratio: worst,
    })
}

fn check_prop(prop: &CsrMatrix, h: &DenseMatrix, z: &DenseMatrix) -> Result<()> {
    if prop.rows() != prop.cols() || prop.rows() != h.rows() || h.shape() != z.shape() {
        return Err(Error::Shape(format!(
            "propagation {}x{}, H {:?}, Z {:?}",
            prop.rows(),
            prop.cols(),
            h.shape(),
            z.shape()
        )));
    }
    Ok(())
}

/// `‖(I − (1 − β) S) Z − β H‖_max`.
pub fn fixed_point_residual(
    prop: &CsrMatrix,
    beta: f64,
    h: &DenseMatrix,
    z: &DenseMatrix,
) -> Result<f64> {
    check_prop(prop, h, z)?;
    let mut r = prop.spmm(z);
    r.scale_in_place(-(1.0 - beta));
    r.axpy(1.0, z);
    r.axpy(-beta, h);
    Ok(r.max_abs())
}

fn check_variational(
    l: &CsrMatrix,
    tilde_degrees: &[f64],
    h: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<()> {
    if l.rows() != h.rows() || tilde_degrees.len() != h.rows() || h.shape() != y.shape() {
        return Err(Error::Shape("variational inputs disagree in shape".into()));
    }
    Ok(())
}

/// `(1 − β) Tr(YᵀLY) + β ‖D̃^{1/2} Y − H‖²_F`, where `tilde_degrees` is the
/// diagonal of `D̃ = D + I`.
pub fn variational_objective(
    l: &CsrMatrix,
    tilde_degrees: &[f64],
    beta: f64,
    h: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<f64> {
    check_variational(l, tilde_degrees, h, y)?;
    let smooth: f64 = dot(y.as_slice(), l.spmm(y).as_slice());
    let sqrt_d: Vec<f64> = tilde_degrees.iter().map(|d| d.sqrt()).collect();
    let fit = y.scale_rows(&sqrt_d).sub(h);
    let fit2: f64 = fit.as_slice().iter().map(|v| v * v).sum();
    Ok((1.0 - beta) * smooth + beta * fit2)
}

/// Gradient of [`variational_objective`]:
/// `2(1 − β) L Y + 2β D̃^{1/2} (D̃^{1/2} Y − H)`.
pub fn variational_gradient(
    l: &CsrMatrix,
    tilde_degrees: &[f64],
    beta: f64,
    h: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_variational(l, tilde_degrees, h, y)?;
    let sqrt_d: Vec<f64> = tilde_degrees.iter().map(|d| d.sqrt()).collect();
    let mut g = l.spmm(y);
    g.scale_in_place(2.0 * (1.0 - beta));
    let fit = y.scale_rows(&sqrt_d).sub(h).scale_rows(&sqrt_d);
    g.axpy(2.0 * beta, &fit);
    Ok(g)
}

/// Max-norm of [`variational_gradient`].
pub fn variational_stationarity(
    l: &CsrMatrix,
    tilde_degrees: &[f64],
    beta: f64,
    h: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<f64> {
    Ok(variational_gradient(l, tilde_degrees, beta, h, y)?.max_abs())
}

/// Subspace for the reduced propagation problem.
#[derive(Debug, Clone, Copy)]
pub enum Basis<'a> {
    /// Any n×k matrix with orthonormal columns.
    Dense(&'a DenseMatrix),
    /// The normalized partition matrix `P`.
    Partition(&'a Partition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystemReport {
    /// `‖(I − (1 − β)S_V) Z − rhs‖_max` of the direct solve.
    pub solve_residual: f64,
    /// Max-norm gradient of the reduced objective at `R* = D̃_V^{-1/2} Z`.
    pub stationarity: f64,
    /// Max-norm gap between the reduced recurrence and the direct solve.
    pub recurrence_gap: f64,
    /// For a partition basis: max gap between the reduced propagation matrix
    /// and the coarse graph convolution. Zero for dense bases.
    pub propagation_gap: f64,
}

fn inv_sqrt_psd(m: &DenseMatrix) -> Result<DenseMatrix> {
    let e = symmetric_eigen(m);
    if e.values.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::Numerical("D̃_V is not positive definite".into()));
    }
    let scaled = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        e.vectors.get(i, j) / e.values[j].sqrt()
    });
    Ok(scaled.matmul_t(&e.vectors))
}

fn dense_solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = Cholesky::new(to_nalgebra(a))
        .ok_or_else(|| Error::Numerical("reduced system is not positive definite".into()))?;
    let rhs: DMatrix<f64> = to_nalgebra(b);
    Ok(from_nalgebra(&chol.solve(&rhs)))
}

/// Solve the k×k reduced PPNP system for `basis` directly, check that it
/// yields a stationary point of the reduced objective, and that the reduced
/// recurrence run for `steps` rounds reaches the same point.
pub fn reduced_system_check(
    basis: Basis<'_>,
    g: &Graph,
    beta: f64,
    f: &DenseMatrix,
    steps: usize,
) -> Result<ReducedSystemReport> {
    if f.rows() != g.n() {
        return Err(Error::Shape(format!(
            "F has {} rows, graph has {} nodes",
            f.rows(),
            g.n()
        )));
    }
    let v = match basis {
        Basis::Dense(v) => {
            check_orthonormal(v)?;
            v.clone()
        }
        Basis::Partition(p) => p.normalized_matrix().to_dense(),
    };
    if v.rows() != g.n() {
        return Err(Error::Shape(format!(
            "basis has {} rows, graph has {} nodes",
            v.rows(),
            g.n()
        )));
    }
    let k = v.cols();
    let a = g.adjacency();
    let tilde_d: Vec<f64> = g.degrees().iter().map(|d| d + 1.0).collect();
    let sqrt_d: Vec<f64> = tilde_d.iter().map(|d| d.sqrt()).collect();

    let a_v = v.t_matmul(&a.spmm(&v));
    let at_v = a_v.add(&DenseMatrix::identity(k));
    let dt_v = v.t_matmul(&v.scale_rows(&tilde_d));
    let dt_v_is = inv_sqrt_psd(&dt_v)?;
    let s = dt_v_is.matmul(&at_v).matmul(&dt_v_is);
    let s = DenseMatrix::from_fn(k, k, |i, j| 0.5 * (s.get(i, j) + s.get(j, i)));

    let vt_df = v.t_matmul(&f.scale_rows(&sqrt_d));
    let h_prime = dt_v_is.matmul(&vt_df);
    let rhs = h_prime.scale(beta);
    let system = DenseMatrix::identity(k).sub(&s.scale(1.0 - beta));
    let z = dense_solve_spd(&system, &rhs)?;
    let solve_residual = system.matmul(&z).sub(&rhs).max_abs();

    // Gradient of (1−β)Tr(RᵀVᵀLVR) + β‖D̃^{1/2}VR − F‖² at R*.
    let r = dt_v_is.matmul(&z);
    let l_v = v.t_matmul(&laplacian(g).spmm(&v));
    let mut grad = l_v.matmul(&r).scale(2.0 * (1.0 - beta));
    grad.axpy(2.0 * beta, &dt_v.matmul(&r).sub(&vt_df));
    let stationarity = grad.max_abs();

    let (recurrence, propagation_gap) = match basis {
        Basis::Partition(p) => {
            let cg = coarse_graph(g, p)?;
            let gap = cg.propagation.to_dense().max_abs_diff(&s);
            (appnp_propagate(&cg.propagation, &h_prime, beta, steps), gap)
        }
        Basis::Dense(_) => {
            let mut zr = h_prime.clone();
            for _ in 0..steps {
                let mut next = s.matmul(&zr);
                next.scale_in_place(1.0 - beta);
                next.axpy(beta, &h_prime);
                zr = next;
            }
            (zr, 0.0)
        }
    };
    Ok(ReducedSystemReport {
        solve_residual,
        stationarity,
        recurrence_gap: recurrence.max_abs_diff(&z),
        propagation_gap,
    })
}

/// Coarsening quality of a partition on the largest connected component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Nodes in the component the report covers.
    pub component_nodes: usize,
    /// Eigenvectors in the preserved subspace.
    pub k_eig: usize,
    /// `‖I − VᵀPPᵀV‖₁` for the smallest normalized-Laplacian eigenvectors.
    pub nuclear_error: f64,
    /// k-means cost of the same eigenvector rows.
    pub kmeans_cost: f64,
    /// `‖I − VᵀPPᵀV‖₂` for the same basis.
    pub spectral_error: f64,
    /// ε̂² for the smallest nontrivial Laplacian eigenvectors.
    pub restricted_l_error: f64,
    pub epsilon_hat: f64,
    /// Sampled violations of the 3ε bound; `None` when ε̂ ≥ 1.
    pub bound_violations: Option<usize>,
}

/// Evaluate `p` on the largest connected component of `g`.
pub fn error_report(
    g: &Graph,
    p: &Partition,
    k_eig: usize,
    samples: usize,
    seed: u64,
) -> Result<ErrorReport> {
    if p.n() != g.n() {
        return Err(Error::Shape(format!(
            "partition covers {} nodes, graph has {}",
            p.n(),
            g.n()
        )));
    }
    let comps = component_members(g);
    let Some(largest) = comps
        .iter()
        .max_by_key(|c| (c.len(), std::cmp::Reverse(c[0])))
    else {
        return Err(Error::Data("empty graph".into()));
    };
    let sub = g.induced_subgraph(largest);
    let part = p.restrict_to(largest);
    let n = sub.n();
    let k = k_eig.min(n.saturating_sub(1)).max(1);

    let vn = eigen_smallest_k(&normalized_laplacian(&sub), k)?.vectors;
    let nuclear = nuclear_error(&vn, &part)?;
    let kmeans = kmeans_cost(&vn, &part)?;
    let spectral = spectral_error(&vn, &part)?;

    let l = laplacian(&sub);
    let want = (k + 1).min(n);
    let el = eigen_smallest_k(&l, want)?;
    let cols: Vec<usize> = (want - k..want).collect();
    let vl = el.vectors.select_columns(&cols);
    let eps = restricted_l_error(&vl, &part, &l)?;
    let violations = if eps < 1.0 {
        Some(epsilon_similarity_check(&l, &part, &vl, samples, seed)?.violations)
    } else {
        None
    };
    Ok(ErrorReport {
        component_nodes: n,
        k_eig: k,
        nuclear_error: nuclear,
        kmeans_cost: kmeans,
        spectral_error: spectral,
        restricted_l_error: eps * eps,
        epsilon_hat: eps,
        bound_violations: violations,
    })
}
