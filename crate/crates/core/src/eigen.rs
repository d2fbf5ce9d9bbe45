//! Smallest eigenpairs of symmetric matrices.
//!
//! Small problems, and problems asking for a large share of the spectrum, go
//! through a dense symmetric eigendecomposition. Otherwise a Lanczos iteration
//! with full reorthogonalization runs in passes: each pass works in the
//! orthogonal complement of the eigenvectors locked so far, so repeated
//! eigenvalues are recovered one copy per pass.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Below this size the dense solver is always used.
const DENSE_ALWAYS: usize = 300;
/// Above this size the dense solver is never used.
const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// n×k, column `i` pairs with `values[i]`.
    pub vectors: DenseMatrix,
}

pub(crate) fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full eigendecomposition of a dense symmetric matrix, values ascending.
pub fn symmetric_eigen(m: &DenseMatrix) -> EigenPairs {
    assert_eq!(m.rows(), m.cols(), "symmetric_eigen needs a square matrix");
    let n = m.rows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m.get(i, j));
    let eig = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix converges");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    EigenPairs { values, vectors }
}

/// The `k` smallest eigenpairs of the symmetric matrix `s`.
pub fn eigen_smallest_k(s: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Shape(format!(
            "eigen_smallest_k on {}x{}",
            n,
            s.cols()
        )));
    }
    if k > n {
        return Err(Error::Precondition(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(n, 0),
        });
    }
    if n <= DENSE_ALWAYS || (n <= DENSE_LIMIT && 8 * k >= n) {
        let full = symmetric_eigen(&s.to_dense());
        let cols: Vec<usize> = (0..k).collect();
        return Ok(EigenPairs {
            values: full.values[..k].to_vec(),
            vectors: full.vectors.select_columns(&cols),
        });
    }
    lanczos_smallest(s, k)
}

struct RitzPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Orthogonalize `w` against every vector in `basis` (two sweeps).
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            if c != 0.0 {
                w.iter_mut().zip(q).for_each(|(x, &qv)| *x -= c * qv);
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// One Lanczos pass of at most `steps` steps in the complement of `locked`.
/// Returns Ritz pairs sorted ascending, with explicit residual norms for the
/// first `want` of them.
fn lanczos_pass(
    s: &CsrMatrix,
    locked: &[Vec<f64>],
    steps: usize,
    want: usize,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Vec<RitzPair> {
    let n = s.rows();
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    orthogonalize(&mut q, locked);
    let qn = norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..steps {
        let mut w = s.matvec(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        w.iter_mut()
            .zip(&basis[j])
            .for_each(|(x, &qv)| *x -= a * qv);
        if j > 0 {
            let b = beta[j - 1];
            w.iter_mut()
                .zip(&basis[j - 1])
                .for_each(|(x, &qv)| *x -= b * qv);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        if j + 1 == steps || b <= 1e-12 * scale {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }

    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    order
        .iter()
        .take(want.min(m))
        .map(|&c| {
            let mut y = vec![0.0; n];
            for (i, qi) in basis.iter().take(m).enumerate() {
                let coef = eig.eigenvectors[(i, c)];
                y.iter_mut().zip(qi).for_each(|(yv, &qv)| *yv += coef * qv);
            }
            let yn = norm(&y);
            y.iter_mut().for_each(|v| *v /= yn);
            let value = eig.eigenvalues[c];
            let sy = s.matvec(&y);
            let residual = sy
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - value * b).powi(2))
                .sum::<f64>()
                .sqrt();
            RitzPair {
                value,
                vector: y,
                residual,
            }
        })
        .collect()
}

fn lanczos_smallest(s: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let n = s.rows();
    let scale = s.inf_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut steps = (2 * k + 40).max(120);

    loop {
        let free = n - locked.len();
        if free == 0 {
            break;
        }
        let m = steps.min(free);
        let exhaustive = m == free;
        // Once k pairs are locked, a pass only checks whether the complement
        // still holds something below the current k-th value.
        let kth = (locked.len() >= k).then(|| {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            v[k - 1]
        });
        let want = if kth.is_some() { 1 } else { k - locked.len() };
        let pairs = lanczos_pass(s, &locked, m, want, &mut rng, scale);

        let mut accepted = 0;
        let mut settled = false;
        for p in pairs {
            if p.residual > tol && !exhaustive {
                break;
            }
            if kth.is_some_and(|kth| p.value >= kth - tol) {
                settled = true;
                break;
            }
            let mut v = p.vector;
            orthogonalize(&mut v, &locked);
            let vn = norm(&v);
            if vn < 0.5 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= vn);
            locked.push(v);
            values.push(p.value);
            accepted += 1;
        }
        if settled {
            break;
        }
        if accepted == 0 {
            if exhaustive {
                if kth.is_some() {
                    break;
                }
                return Err(Error::Numerical(format!(
                    "Lanczos failed to converge for {k} eigenpairs of a {n}x{n} matrix"
                )));
            }
            steps = (steps * 2).min(free);
        }
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order.truncate(k);
    if order.len() < k {
        return Err(Error::Numerical(format!(
            "found only {} of {k} eigenpairs",
            order.len()
        )));
    }
    let mut vectors = DenseMatrix::zeros(n, k);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &locked[i]);
    }
    Ok(EigenPairs {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors,
    })
}

/// Lanczos path regardless of size; exposed for cross-checking the two paths.
pub fn eigen_smallest_k_iterative(s: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    if s.rows() != s.cols() || k == 0 || k > s.rows() {
        return Err(Error::Precondition(format!(
            "iterative eigensolver needs a square matrix and 0 < k <= n (k = {k})"
        )));
    }
    lanczos_smallest(s, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, Graph};

    #[test]
    fn identity_eigenvalues() {
        let e = eigen_smallest_k(&CsrMatrix::identity(5), 3).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn path_of_three() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let e = eigen_smallest_k(&laplacian(&g), 3).unwrap();
        for (v, want) in e.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        }
    }

    #[test]
    fn rejects_too_many() {
        assert!(eigen_smallest_k(&CsrMatrix::identity(2), 3).is_err());
    }
}
