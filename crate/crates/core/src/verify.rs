//! Invariant suites run as a pass/fail gate.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::coarse_graph;
use crate::coarsen::{coarsen, component_targets, CoarsenConfig, Method};
use crate::dataset::GraphBundle;
use crate::dense::DenseMatrix;
use crate::eigen::symmetric_eigen;
use crate::fixtures::{
    gaussian_matrix, random_connected_graph, random_graph, random_orthonormal, random_partition,
    rng,
};
use crate::gnn::{appnp_propagate, gradient_check, ppnp_exact, Dropout, Linear, Model, ModelKind};
use crate::graph::{induces_connected, laplacian, normalized_adjacency_selfloops, Graph};
use crate::kmeans::lloyd_kmeans;
use crate::metrics::{
    epsilon_similarity_check, fixed_point_residual, kmeans_cost, nuclear_error,
    reduced_system_check, restricted_l_error, variational_stationarity, Basis,
};
use crate::partition::Partition;
use crate::sparse::CsrMatrix;
use crate::synth::{sbm_generate, SbmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Quick,
    Full,
}

impl std::str::FromStr for Depth {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "quick" => Ok(Depth::Quick),
            "full" => Ok(Depth::Full),
            _ => Err(crate::error::Error::Config(format!(
                "unknown depth `{s}` (quick or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub depth: Depth,
    pub seed: u64,
    /// Perturb the normalization of `P` inside the orthonormality check, which
    /// must then fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            depth: Depth::Quick,
            seed: 0,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<44} {:>7.2}s  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.seconds,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "{} of {} checks passed",
            self.checks.len() - self.failures(),
            self.checks.len()
        );
        s
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (passed, detail) = f();
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

/// Dense `D̃_P^{-1/2} PᵀÃP D̃_P^{-1/2}` from matrix products.
fn dense_coarse_propagation(g: &Graph, p: &Partition) -> DenseMatrix {
    let pm = p.normalized_matrix().to_dense();
    let at = g.adjacency().to_dense().add(&DenseMatrix::identity(g.n()));
    let dt: Vec<f64> = g.degrees().iter().map(|d| d + 1.0).collect();
    let num = pm.t_matmul(&at.matmul(&pm));
    let den = pm.t_matmul(&pm.scale_rows(&dt));
    let s: Vec<f64> = (0..p.k()).map(|j| 1.0 / den.get(j, j).sqrt()).collect();
    DenseMatrix::from_fn(p.k(), p.k(), |i, j| num.get(i, j) * s[i] * s[j])
}

/// `max |PᵀP − I|` for a normalized partition matrix.
pub fn orthonormality_error(p: &CsrMatrix) -> f64 {
    let d = p.to_dense();
    d.t_matmul(&d)
        .max_abs_diff(&DenseMatrix::identity(d.cols()))
}

/// `P` with one cluster's scale slightly wrong.
pub fn perturbed_normalized_matrix(p: &Partition) -> CsrMatrix {
    let target = p.cluster_of(0);
    p.normalized_matrix()
        .map_entries(|_, j, v| if j == target { v * 1.01 } else { v })
}

/// Every set partition of `0..n` into exactly `k` blocks, as restricted
/// growth strings.
pub fn set_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(
        i: usize,
        n: usize,
        k: usize,
        used: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
        // Not enough nodes left to open the remaining blocks.
        if k - used > n - i {
            return;
        }
        for c in 0..=used.min(k - 1) {
            cur.push(c);
            rec(i + 1, n, k, used.max(c + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k >= 1 && k <= n {
        rec(0, n, k, 0, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

fn counts(depth: Depth, quick: usize, full: usize) -> usize {
    match depth {
        Depth::Quick => quick,
        Depth::Full => full,
    }
}

/// The invariant suites on synthetic fixtures.
pub fn verify(opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    let d = opts.depth;
    let seed = opts.seed;

    report.run("laplacian row sums and quadratic form", || {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..counts(d, 20, 100) {
            let n = r.random_range(2..=20);
            let g = random_graph(n, 0.3, &mut r);
            let l = laplacian(&g);
            worst = worst.max(l.row_sums().iter().fold(0.0, |a: f64, b| a.max(b.abs())));
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let q: f64 = x.iter().zip(l.matvec(&x)).map(|(a, b)| a * b).sum();
            let edges: f64 = g.edges().map(|(u, v, w)| w * (x[u] - x[v]).powi(2)).sum();
            worst = worst.max((q - edges).abs() / edges.max(1.0));
            if q < -1e-10 {
                worst = f64::INFINITY;
            }
        }
        (worst < 1e-10, format!("max deviation {worst:.1e}"))
    });

    report.run("normalized adjacency spectrum within [-1, 1]", || {
        let mut r = rng(seed + 1);
        let mut radius: f64 = 0.0;
        for _ in 0..counts(d, 10, 50) {
            let g = random_graph(10, 0.3, &mut r);
            let a = normalized_adjacency_selfloops(&g);
            let e = symmetric_eigen(&a.to_dense());
            radius = radius.max(e.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
        }
        (
            radius <= 1.0 + 1e-12,
            format!("spectral radius {radius:.15}"),
        )
    });

    report.run("partition matrix orthonormality", || {
        let mut r = rng(seed + 2);
        let mut worst: f64 = 0.0;
        for _ in 0..counts(d, 50, 200) {
            let n = r.random_range(1..=30);
            let k = r.random_range(1..=n);
            let p = random_partition(n, k, &mut r);
            let m = if opts.inject_fault {
                perturbed_normalized_matrix(&p)
            } else {
                p.normalized_matrix()
            };
            worst = worst.max(orthonormality_error(&m));
        }
        (worst < 1e-12, format!("max |PᵀP − I| = {worst:.1e}"))
    });

    report.run("negative control: perturbed P is detected", || {
        let mut r = rng(seed + 3);
        let p = random_partition(12, 4, &mut r);
        let err = orthonormality_error(&perturbed_normalized_matrix(&p));
        (err >= 1e-12, format!("perturbed error {err:.1e}"))
    });

    report.run("composition multiplies incidence matrices", || {
        let mut r = rng(seed + 4);
        let mut worst: f64 = 0.0;
        for _ in 0..counts(d, 20, 100) {
            let n = r.random_range(3..=25);
            let k1 = r.random_range(2..=n);
            let k2 = r.random_range(1..=k1);
            let inner = random_partition(n, k1, &mut r);
            let outer = random_partition(k1, k2, &mut r);
            let composed = inner.compose(&outer).expect("sizes match");
            let prod = inner
                .indicator_matrix()
                .matmul(&outer.indicator_matrix())
                .to_dense();
            worst = worst.max(prod.max_abs_diff(&composed.indicator_matrix().to_dense()));
        }
        (worst < 1e-12, format!("max gap {worst:.1e}"))
    });

    report.run("coarse convolution matches dense products", || {
        let mut r = rng(seed + 5);
        let mut worst: f64 = 0.0;
        let mut weight_gap: f64 = 0.0;
        for _ in 0..counts(d, 20, 100) {
            let n = r.random_range(4..=40);
            let g = random_graph(n, 0.2, &mut r);
            let k = r.random_range(1..=n);
            let p = random_partition(n, k, &mut r);
            let cg = coarse_graph(&g, &p).expect("sizes match");
            worst = worst.max(
                cg.propagation
                    .to_dense()
                    .max_abs_diff(&dense_coarse_propagation(&g, &p)),
            );
            weight_gap = weight_gap.max((cg.adjacency.sum() - g.adjacency().sum()).abs());
        }
        (
            worst < 1e-10 && weight_gap == 0.0,
            format!("max gap {worst:.1e}, weight change {weight_gap}"),
        )
    });

    report.run("nuclear error equals k-means cost", || {
        let mut r = rng(seed + 6);
        let mut worst: f64 = 0.0;
        for _ in 0..counts(d, 50, 200) {
            let n = r.random_range(2..=50);
            let k = r.random_range(1..=8.min(n));
            let v = random_orthonormal(n, k, &mut r);
            let p = random_partition(n, r.random_range(1..=n), &mut r);
            let a = nuclear_error(&v, &p).expect("orthonormal");
            let b = kmeans_cost(&v, &p).expect("shapes match");
            worst = worst.max((a - b).abs());
        }
        (worst < 1e-8, format!("max gap {worst:.1e}"))
    });

    report.run("nuclear minimizer is the k-means optimum", || {
        let mut r = rng(seed + 7);
        let mut worst: f64 = 0.0;
        let max_n = counts(d, 6, 8);
        for _ in 0..counts(d, 10, 40) {
            let n = r.random_range(2..=max_n);
            let k = r.random_range(1..=3.min(n));
            let v = random_orthonormal(n, k, &mut r);
            let mut best_nuc = f64::INFINITY;
            let mut best_km = f64::INFINITY;
            for a in set_partitions(n, k) {
                let p = Partition::from_assignment(&a);
                best_nuc = best_nuc.min(nuclear_error(&v, &p).expect("orthonormal"));
                best_km = best_km.min(kmeans_cost(&v, &p).expect("shapes match"));
            }
            worst = worst.max((best_nuc - best_km).abs());
        }
        (worst < 1e-10, format!("max optimum gap {worst:.1e}"))
    });

    report.run("APPNP converges to the PPNP solve", || {
        let mut r = rng(seed + 8);
        let mut gap: f64 = 0.0;
        let mut rate: f64 = 0.0;
        let mut resid: f64 = 0.0;
        let mut stat: f64 = 0.0;
        for _ in 0..counts(d, 10, 50) {
            let n = r.random_range(2..=20);
            let g = random_graph(n, 0.3, &mut r);
            let prop = normalized_adjacency_selfloops(&g);
            let beta = r.random_range(0.05..0.5);
            let h = gaussian_matrix(n, 3, &mut r);
            let z = ppnp_exact(&prop, &h, beta).expect("positive definite");
            gap = gap.max(appnp_propagate(&prop, &h, beta, 500).max_abs_diff(&z));
            let mut prev = h.clone();
            for _ in 0..5 {
                // One step of the recurrence anchored at the original H.
                let mut next = prop.spmm(&prev);
                next.scale_in_place(1.0 - beta);
                next.axpy(beta, &h);
                let before = prev.sub(&z).frobenius_norm();
                let after = next.sub(&z).frobenius_norm();
                if before > 1e-12 {
                    rate = rate.max(after / before - (1.0 - beta));
                }
                prev = next;
            }
            resid = resid.max(fixed_point_residual(&prop, beta, &h, &z).expect("shapes match"));
            let dt: Vec<f64> = g.degrees().iter().map(|v| v + 1.0).collect();
            let y = z.scale_rows(&dt.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
            stat = stat.max(variational_stationarity(&laplacian(&g), &dt, beta, &h, &y).expect("shapes match"));
        }
        (
            gap < 1e-6 && rate <= 1e-12 && resid < 1e-8 && stat < 1e-7,
            format!("gap {gap:.1e}, rate excess {rate:.1e}, residual {resid:.1e}, stationarity {stat:.1e}"),
        )
    });

    report.run("reduced system matches its recurrence", || {
        let mut r = rng(seed + 9);
        let mut worst: f64 = 0.0;
        for i in 0..counts(d, 10, 50) {
            let n = r.random_range(3..=20);
            let g = random_graph(n, 0.3, &mut r);
            let f = gaussian_matrix(n, 2, &mut r);
            let k = r.random_range(1..=n);
            let rep = if i % 2 == 0 {
                let p = random_partition(n, k, &mut r);
                reduced_system_check(Basis::Partition(&p), &g, 0.1, &f, 300)
            } else {
                let v = random_orthonormal(n, k, &mut r);
                reduced_system_check(Basis::Dense(&v), &g, 0.1, &f, 300)
            }
            .expect("valid instance");
            worst = worst
                .max(rep.recurrence_gap / 1e-6)
                .max(rep.stationarity / 1e-7)
                .max(rep.propagation_gap / 1e-10);
        }
        (worst < 1.0, format!("worst tolerance share {worst:.2}"))
    });

    report.run("3ε quadratic-form bound", || {
        let mut r = rng(seed + 10);
        let mut instances = 0;
        let mut violations = 0;
        let mut attempts = 0;
        let target = counts(d, 5, 50);
        let samples = counts(d, 500, 5000);
        while instances < target && attempts < 50 * target {
            attempts += 1;
            let n = r.random_range(8..=20);
            let g = random_connected_graph(n, 0.3, &mut r);
            let l = laplacian(&g);
            let e = symmetric_eigen(&l.to_dense());
            let v = e.vectors.select_columns(&[1, 2, 3]);
            let p =
                crate::fixtures::random_connected_partition(&g, r.random_range(n / 2..n), &mut r);
            let eps = restricted_l_error(&v, &p, &l).expect("valid instance");
            if eps >= 1.0 {
                continue;
            }
            instances += 1;
            violations += epsilon_similarity_check(&l, &p, &v, samples, r.random())
                .expect("eps < 1")
                .violations;
        }
        (
            instances == target && violations == 0,
            format!("{violations} violations over {instances} instances x {samples} samples"),
        )
    });

    report.run("gradients match finite differences", || {
        let mut r = rng(seed + 11);
        let mut worst: f64 = 0.0;
        for i in 0..counts(d, 2, 6) {
            let g = random_graph(8, 0.4, &mut r);
            let prop = normalized_adjacency_selfloops(&g);
            let x = gaussian_matrix(8, 4, &mut r);
            let labels: Vec<Option<usize>> = (0..8).map(|v| Some(v % 3)).collect();
            let mask = [0, 1, 2, 3, 5];
            for kind in [ModelKind::Gcn, ModelKind::Appnp] {
                let model = Model::init(kind, 4, 5, 3, 0.2, 4, seed + i as u64);
                let model = with_random_biases(model, &mut r);
                let dropout = Some(Dropout {
                    rate: 0.3,
                    seed: 17,
                });
                let err =
                    gradient_check(&model, &prop, &x, &labels, &mask, dropout, 5e-4, 1e-5, 1e-6)
                        .expect("valid instance");
                worst = worst.max(err);
            }
        }
        (worst < 1e-5, format!("max relative error {worst:.1e}"))
    });

    report.run("Lloyd cost trace is monotone", || {
        let mut r = rng(seed + 12);
        let mut ok = true;
        for i in 0..counts(d, 5, 20) {
            let pts = gaussian_matrix(50, 3, &mut r);
            let km = lloyd_kmeans(&pts, 5, i as u64, 100, 0.0).expect("k <= n");
            ok &= km.cost_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            ok &= km.cost() <= km.initial_cost + 1e-12;
        }
        (ok, String::new())
    });

    report.run("coarsening contracts connected clusters", || {
        let bundle =
            sbm_generate(&SbmConfig::new(vec![50, 50], 0.2, 0.01, 4, seed)).expect("valid fixture");
        coarsening_invariants(&bundle.graph, &[0.5, 0.3], seed)
    });

    report
}

fn with_random_biases(mut model: Model, r: &mut rand_chacha::ChaCha8Rng) -> Model {
    for l in model.layers_mut() {
        let Linear { bias, .. } = l;
        bias.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    }
    model
}

/// Connectivity, ratio contract and determinism of every method on `g`.
pub fn coarsening_invariants(g: &Graph, ratios: &[f64], seed: u64) -> (bool, String) {
    let mut problems = Vec::new();
    for method in [
        Method::Spectral,
        Method::VariationNeighborhoods,
        Method::VariationEdges,
        Method::HeavyEdge,
    ] {
        for &ratio in ratios {
            let cfg = CoarsenConfig {
                seed,
                ..CoarsenConfig::new(method, ratio)
            };
            let p = match coarsen(g, &cfg) {
                Ok(p) => p,
                Err(e) => {
                    problems.push(format!("{method}@{ratio}: {e}"));
                    continue;
                }
            };
            if p.k() > component_targets(g, ratio) {
                problems.push(format!("{method}@{ratio}: {} clusters over target", p.k()));
            }
            if !p.members().iter().all(|m| induces_connected(g, m)) {
                problems.push(format!("{method}@{ratio}: disconnected cluster"));
            }
            if coarsen(g, &cfg).ok().as_ref() != Some(&p) {
                problems.push(format!("{method}@{ratio}: not deterministic"));
            }
        }
    }
    (problems.is_empty(), problems.join("; "))
}

/// Graph-level invariants on a loaded bundle.
pub fn verify_bundle(bundle: &GraphBundle, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    let g = &bundle.graph;
    report.run("bundle: symmetric adjacency and degree sum", || {
        let sym = g.adjacency().is_symmetric(0.0);
        let deg: f64 = g.degrees().iter().sum();
        let ok = sym && (deg - g.adjacency().sum()).abs() <= 1e-9 * deg.max(1.0);
        (ok, format!("{} nodes, {} edges", g.n(), g.num_edges()))
    });
    report.run("bundle: laplacian row sums", || {
        let worst = laplacian(g)
            .row_sums()
            .iter()
            .fold(0.0, |a: f64, b| a.max(b.abs()));
        (worst < 1e-9, format!("max |row sum| {worst:.1e}"))
    });
    report.run("bundle: split is valid", || match bundle.split.validate() {
        Ok(()) => (
            true,
            format!(
                "{} train, {} val, {} test",
                bundle.split.train.len(),
                bundle.split.val.len(),
                bundle.split.test.len()
            ),
        ),
        Err(e) => (false, e.to_string()),
    });
    if opts.depth == Depth::Full {
        report.run("bundle: coarsening invariants", || {
            coarsening_invariants(g, &[0.5], opts.seed)
        });
    }
    report
}
