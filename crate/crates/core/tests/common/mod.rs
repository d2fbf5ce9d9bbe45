//! Independent dense oracles shared by the integration tests. Nothing here
//! calls the library's own linear algebra.

#![allow(dead_code, clippy::needless_range_loop)]

use gcoarse::gnn::{Linear, Model};
use gcoarse::{DenseMatrix, Graph, Partition};

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn from_dense(m: &DenseMatrix) -> Mat {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

pub fn to_dense(m: &Mat) -> DenseMatrix {
    let cols = m.first().map_or(0, Vec::len);
    DenseMatrix::from_fn(m.len(), cols, |i, j| m[i][j])
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k) = (a.len(), b.len());
    let m = b.first().map_or(0, Vec::len);
    let mut out = zeros(n, m);
    for i in 0..n {
        assert_eq!(a[i].len(), k, "inner dimensions differ");
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

pub fn t(a: &Mat) -> Mat {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect())
        .collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|v| v * s).collect())
        .collect()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
}

pub fn frob(a: &Mat) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dense adjacency from the graph's edge list.
pub fn adjacency(g: &Graph) -> Mat {
    let mut a = zeros(g.n(), g.n());
    for (u, v, w) in g.edges() {
        a[u][v] += w;
        a[v][u] += w;
    }
    a
}

pub fn degrees(a: &Mat) -> Vec<f64> {
    a.iter().map(|r| r.iter().sum()).collect()
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` by explicit loops.
pub fn normalized_adjacency(a: &Mat) -> Mat {
    let n = a.len();
    let at = add(a, &eye(n));
    let d = degrees(&at);
    (0..n)
        .map(|i| (0..n).map(|j| at[i][j] / (d[i] * d[j]).sqrt()).collect())
        .collect()
}

pub fn laplacian(a: &Mat) -> Mat {
    let d = degrees(a);
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { d[i] - a[i][j] } else { -a[i][j] })
                .collect()
        })
        .collect()
}

/// The normalized partition matrix `P`, built from the assignment.
pub fn partition_matrix(assign: &[usize]) -> Mat {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in assign {
        sizes[c] += 1;
    }
    let mut p = zeros(assign.len(), k);
    for (v, &c) in assign.iter().enumerate() {
        p[v][c] = 1.0 / (sizes[c] as f64).sqrt();
    }
    p
}

pub fn incidence(assign: &[usize]) -> Mat {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let mut p = zeros(assign.len(), k);
    for (v, &c) in assign.iter().enumerate() {
        p[v][c] = 1.0;
    }
    p
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut a = a.clone();
    let mut b = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        assert!(a[piv][col].abs() > 1e-300, "singular system");
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                for c in 0..m {
                    b[r][c] -= f * b[col][c];
                }
            }
        }
    }
    let mut x = zeros(n, m);
    for r in (0..n).rev() {
        for c in 0..m {
            let mut s = b[r][c];
            for j in r + 1..n {
                s -= a[r][j] * x[j][c];
            }
            x[r][c] = s / a[r][r];
        }
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let tn = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let tn = if theta == 0.0 { 1.0 } else { tn };
                let c = 1.0 / (tn * tn + 1.0).sqrt();
                let s = tn * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum over clusters of squared distances to the cluster centroid.
pub fn kmeans_cost(points: &Mat, assign: &[usize]) -> f64 {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let d = points.first().map_or(0, Vec::len);
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(assign)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut centroid = vec![0.0; d];
        for p in &members {
            for (g, x) in centroid.iter_mut().zip(p.iter()) {
                *g += x / members.len() as f64;
            }
        }
        for p in &members {
            total += p
                .iter()
                .zip(&centroid)
                .map(|(x, g)| (x - g) * (x - g))
                .sum::<f64>();
        }
    }
    total
}

/// Every split of `n` items into exactly `k` nonempty blocks, one
/// canonical labelling per split.
pub fn all_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn go(
        i: usize,
        n: usize,
        k: usize,
        blocks: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == n {
            if blocks == k {
                out.push(cur.clone());
            }
            return;
        }
        for c in 0..blocks.min(k) {
            cur[i] = c;
            go(i + 1, n, k, blocks, cur, out);
        }
        if blocks < k {
            cur[i] = blocks;
            go(i + 1, n, k, blocks + 1, cur, out);
        }
    }
    if n > 0 {
        go(0, n, k, 0, &mut cur, &mut out);
    }
    out
}

/// Unit-weight graph on `n` nodes with the listed edges.
pub fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let e: Vec<(usize, usize, f64)> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
    Graph::from_edges(n, &e).expect("valid edge list")
}

pub fn path(n: usize) -> Graph {
    let e: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    graph(n, &e)
}

pub fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            e.push((u, v));
        }
    }
    e
}

/// Whether `set` induces a connected subgraph of `g`.
pub fn connected_within(g: &Graph, set: &[usize]) -> bool {
    if set.is_empty() {
        return true;
    }
    let inside: std::collections::HashSet<usize> = set.iter().copied().collect();
    let mut seen = std::collections::HashSet::from([set[0]]);
    let mut stack = vec![set[0]];
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if inside.contains(&v) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == set.len()
}

pub fn clusters(p: &Partition) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); p.k()];
    for (v, &c) in p.assignment().iter().enumerate() {
        out[c].push(v);
    }
    out
}

pub fn relu(m: &Mat) -> Mat {
    m.iter()
        .map(|r| r.iter().map(|v| v.max(0.0)).collect())
        .collect()
}

pub fn affine(x: &Mat, l: &Linear) -> Mat {
    let mut out = mul(x, &from_dense(&l.weight));
    for row in &mut out {
        for (v, b) in row.iter_mut().zip(&l.bias) {
            *v += b;
        }
    }
    out
}

/// Dense two-layer forward pass of either model.
pub fn oracle_forward(model: &Model, s: &Mat, x: &Mat) -> Mat {
    let l = model.layers();
    match model {
        Model::Gcn(_) => {
            let h = relu(&add_bias(
                &mul(s, &mul(x, &from_dense(&l[0].weight))),
                &l[0].bias,
            ));
            add_bias(&mul(s, &mul(&h, &from_dense(&l[1].weight))), &l[1].bias)
        }
        Model::Appnp(p) => {
            let h = affine(&relu(&affine(x, &l[0])), &l[1]);
            oracle_appnp(s, &h, p.beta, p.steps)
        }
    }
}

pub fn add_bias(m: &Mat, b: &[f64]) -> Mat {
    m.iter()
        .map(|r| r.iter().zip(b).map(|(v, c)| v + c).collect())
        .collect()
}

pub fn oracle_appnp(s: &Mat, h: &Mat, beta: f64, steps: usize) -> Mat {
    let mut z = h.clone();
    for _ in 0..steps {
        z = add(&scale(&mul(s, &z), 1.0 - beta), &scale(h, beta));
    }
    z
}

/// Mean cross entropy over `mask` plus half the decay times the squared
/// weight norms.
pub fn oracle_objective(
    model: &Model,
    s: &Mat,
    x: &Mat,
    labels: &[usize],
    mask: &[usize],
    wd: f64,
) -> f64 {
    let z = oracle_forward(model, s, x);
    let mut ce = 0.0;
    for &i in mask {
        let lse = z[i].iter().map(|v| v.exp()).sum::<f64>().ln();
        ce += lse - z[i][labels[i]];
    }
    let l2: f64 = model
        .layers()
        .iter()
        .flat_map(|l| l.weight.as_slice().iter())
        .map(|w| w * w)
        .sum();
    ce / mask.len() as f64 + 0.5 * wd * l2
}
