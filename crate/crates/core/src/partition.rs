//! Node partitions and their normalized indicator matrices.
//!
//! A partition of `n` nodes into `k` clusters defines the 0/1 incidence matrix
//! `P̂` (n×k) and its column-normalized form `P = P̂ C^{-1/2}`, where `C` holds
//! the cluster sizes. `P` has orthonormal columns, so `PPᵀ` is the orthogonal
//! projection onto vectors that are constant on every cluster.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Build from arbitrary cluster ids. Ids are compacted to `0..k` keeping
    /// their relative order, so unused ids never produce empty clusters.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        let mut ids: Vec<usize> = assignment.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let dense = ids.last().is_none_or(|&m| m + 1 == ids.len());
        let assignment: Vec<usize> = if dense {
            assignment.to_vec()
        } else {
            assignment
                .iter()
                .map(|c| ids.binary_search(c).expect("present"))
                .collect()
        };
        let mut sizes = vec![0; ids.len()];
        for &c in &assignment {
            sizes[c] += 1;
        }
        Self { assignment, sizes }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    /// Everything in one cluster.
    pub fn single(n: usize) -> Self {
        Self::from_assignment(&vec![0; n])
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn is_identity(&self) -> bool {
        self.sizes.len() == self.assignment.len()
            && self.assignment.iter().enumerate().all(|(i, &c)| i == c)
    }

    /// Members of each cluster in ascending node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// `P = P̂ C^{-1/2}` as a sparse n×k matrix.
    pub fn normalized_matrix(&self) -> CsrMatrix {
        let trip = self
            .assignment
            .iter()
            .enumerate()
            .map(|(v, &c)| (v, c, 1.0 / (self.sizes[c] as f64).sqrt()));
        CsrMatrix::from_triplets(self.n(), self.k(), trip).expect("valid partition matrix")
    }

    /// The 0/1 incidence matrix `P̂`.
    pub fn indicator_matrix(&self) -> CsrMatrix {
        let trip = self
            .assignment
            .iter()
            .enumerate()
            .map(|(v, &c)| (v, c, 1.0));
        CsrMatrix::from_triplets(self.n(), self.k(), trip).expect("valid partition matrix")
    }

    /// Apply `outer` to the clusters of `self`: node `v` goes to
    /// `outer(self(v))`. The incidence matrices multiply:
    /// `P̂_composed = P̂_self · P̂_outer`.
    pub fn compose(&self, outer: &Partition) -> Result<Partition> {
        if outer.n() != self.k() {
            return Err(Error::Shape(format!(
                "outer partition covers {} nodes but inner has {} clusters",
                outer.n(),
                self.k()
            )));
        }
        let assignment: Vec<usize> = self
            .assignment
            .iter()
            .map(|&c| outer.assignment[c])
            .collect();
        Ok(Partition::from_assignment(&assignment))
    }

    /// `Pᵀ X`: row `j` is the cluster sum divided by `√c_j`.
    pub fn restrict_rows(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rows(x.rows(), self.n(), "restrict")?;
        let mut out = self.cluster_sums(x);
        for (j, &c) in self.sizes.iter().enumerate() {
            let s = 1.0 / (c as f64).sqrt();
            out.row_mut(j).iter_mut().for_each(|v| *v *= s);
        }
        Ok(out)
    }

    /// `P M`: node `v` gets row `M[c(v)] / √c(v)`.
    pub fn lift_rows(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rows(m.rows(), self.k(), "lift")?;
        let mut out = DenseMatrix::zeros(self.n(), m.cols());
        for (v, &c) in self.assignment.iter().enumerate() {
            let s = 1.0 / (self.sizes[c] as f64).sqrt();
            for (o, &x) in out.row_mut(v).iter_mut().zip(m.row(c)) {
                *o = x * s;
            }
        }
        Ok(out)
    }

    /// `P Pᵀ X`, the projection onto cluster-constant matrices (cluster means).
    pub fn project(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.lift_rows(&self.restrict_rows(x)?)
    }

    /// Per-cluster row sums `P̂ᵀ X`.
    pub(crate) fn cluster_sums(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.k(), x.cols());
        for (v, &c) in self.assignment.iter().enumerate() {
            for (o, &xv) in out.row_mut(c).iter_mut().zip(x.row(v)) {
                *o += xv;
            }
        }
        out
    }

    fn check_rows(&self, got: usize, want: usize, op: &str) -> Result<()> {
        if got != want {
            return Err(Error::Shape(format!(
                "{op}: matrix has {got} rows, expected {want}"
            )));
        }
        Ok(())
    }

    /// Restrict to a subset of nodes (renumbered in the given order).
    pub fn restrict_to(&self, nodes: &[usize]) -> Partition {
        let a: Vec<usize> = nodes.iter().map(|&v| self.assignment[v]).collect();
        Partition::from_assignment(&a)
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut body = Vec::with_capacity(self.n() * 8);
        for (v, c) in self.assignment.iter().enumerate() {
            writeln!(body, "{v}\t{c}").expect("write to vec");
        }
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    /// Read `partition.tsv`. Every node `0..n` must appear exactly once.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Partition> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line.split_once('\t').and_then(|(a, b)| {
                Some((
                    a.trim().parse::<usize>().ok()?,
                    b.trim().parse::<usize>().ok()?,
                ))
            });
            match parsed {
                Some(p) => pairs.push(p),
                None => return Err(Error::parse(path, i + 1, "expected `<node><TAB><cluster>`")),
            }
        }
        let n = pairs.len();
        let mut assignment = vec![usize::MAX; n];
        for (v, c) in pairs {
            if v >= n || assignment[v] != usize::MAX {
                return Err(Error::Data(format!(
                    "{}: node {v} missing or repeated",
                    path.display()
                )));
            }
            assignment[v] = c;
        }
        Ok(Partition::from_assignment(&assignment))
    }
}
