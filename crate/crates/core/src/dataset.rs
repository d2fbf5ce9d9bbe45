//! On-disk graph bundles and label splits.
//!
//! A bundle is a directory with four UTF-8 text files:
//!
//! | file | content |
//! |------|---------|
//! | `edges.tsv` | `u<TAB>v` per line, 0-indexed, each undirected edge once |
//! | `features.csv` | one comma-separated feature row per node |
//! | `labels.csv` | one class index per node, `-1` when unlabeled |
//! | `split.tsv` | `<index><TAB><train\|val\|test>` per split node |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{EdgeListStats, Graph};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Val,
    Test,
}

impl SplitRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Val => "val",
            SplitRole::Test => "test",
        }
    }
}

/// Node labels plus disjoint train/validation/test index sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledSplit {
    pub labels: Vec<Option<usize>>,
    pub classes: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabelledSplit {
    /// Build and validate; `classes` is inferred as one past the largest label.
    pub fn new(
        labels: Vec<Option<usize>>,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let classes = labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
        let s = Self {
            labels,
            classes,
            train,
            val,
            test,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let mut role: Vec<Option<SplitRole>> = vec![None; n];
        for (set, r) in [
            (&self.train, SplitRole::Train),
            (&self.val, SplitRole::Val),
            (&self.test, SplitRole::Test),
        ] {
            for &v in set {
                if v >= n {
                    return Err(Error::Data(format!("split node {v} outside 0..{n}")));
                }
                if let Some(prev) = role[v] {
                    return Err(Error::Data(format!(
                        "node {v} is in both {} and {}",
                        prev.as_str(),
                        r.as_str()
                    )));
                }
                if self.labels[v].is_none() {
                    return Err(Error::Data(format!("{} node {v} has no label", r.as_str())));
                }
                role[v] = Some(r);
            }
        }
        Ok(())
    }

    /// Role of every node, `None` for nodes outside all three sets.
    pub fn roles(&self) -> Vec<Option<SplitRole>> {
        let mut role = vec![None; self.labels.len()];
        for &v in &self.train {
            role[v] = Some(SplitRole::Train);
        }
        for &v in &self.val {
            role[v] = Some(SplitRole::Val);
        }
        for &v in &self.test {
            role[v] = Some(SplitRole::Test);
        }
        role
    }

    /// Keep only `nodes` (renumbered in the given order).
    pub fn restrict(&self, nodes: &[usize]) -> LabelledSplit {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let map = |set: &[usize]| -> Vec<usize> {
            set.iter()
                .filter(|&&v| local[v] != usize::MAX)
                .map(|&v| local[v])
                .collect()
        };
        LabelledSplit {
            labels: nodes.iter().map(|&v| self.labels[v]).collect(),
            classes: self.classes,
            train: map(&self.train),
            val: map(&self.val),
            test: map(&self.test),
        }
    }
}

/// Graph, features and split loaded together.
#[derive(Debug, Clone)]
pub struct GraphBundle {
    pub graph: Graph,
    pub features: DenseMatrix,
    pub split: LabelledSplit,
    /// Edge-file statistics; `listed` is the raw line count.
    pub edge_stats: EdgeListStats,
}

impl GraphBundle {
    /// Undirected edge count after symmetrization and deduplication.
    pub fn symmetrized_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn raw_edge_lines(&self) -> usize {
        self.edge_stats.listed
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

fn parse_index(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(path, line, format!("expected a node index, got {tok:?}")))
}

pub fn load_graph_bundle(dir: impl AsRef<Path>) -> Result<GraphBundle> {
    let dir = dir.as_ref();

    let label_path = dir.join(LABELS_FILE);
    let mut labels = Vec::new();
    for (i, line) in read_lines(&label_path)?.iter().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| Error::parse(&label_path, i + 1, format!("bad label {t:?}")))?;
        labels.push(match v {
            -1 => None,
            c if c >= 0 => Some(c as usize),
            _ => return Err(Error::parse(&label_path, i + 1, format!("bad label {v}"))),
        });
    }
    let n = labels.len();

    let feat_path = dir.join(FEATURES_FILE);
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in read_lines(&feat_path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::parse(&feat_path, i + 1, format!("bad float {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(&feat_path, i + 1, "non-finite feature"));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::parse(
                    &feat_path,
                    i + 1,
                    format!("row has {width} values, expected {c}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Data(format!(
            "{FEATURES_FILE} has {rows} rows but {LABELS_FILE} has {n}"
        )));
    }
    let features = DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)?;

    let edge_path = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    for (i, line) in read_lines(&edge_path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split('\t');
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(&edge_path, i + 1, "expected `u<TAB>v`"));
        };
        let (u, v) = (
            parse_index(&edge_path, i + 1, a)?,
            parse_index(&edge_path, i + 1, b)?,
        );
        if u >= n || v >= n {
            return Err(Error::parse(
                &edge_path,
                i + 1,
                format!("node index out of range 0..{n}"),
            ));
        }
        edges.push((u, v, 1.0));
    }
    let (graph, edge_stats) = Graph::from_edges_with_stats(n, &edges)?;
    if edge_stats.duplicates > 0 {
        warn!(
            "{}: {} duplicate edges collapsed",
            edge_path.display(),
            edge_stats.duplicates
        );
    }

    let split_path = dir.join(SPLIT_FILE);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in read_lines(&split_path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once('\t') else {
            return Err(Error::parse(
                &split_path,
                i + 1,
                "expected `<index><TAB><role>`",
            ));
        };
        let v = parse_index(&split_path, i + 1, a)?;
        if v >= n {
            return Err(Error::parse(
                &split_path,
                i + 1,
                format!("node index out of range 0..{n}"),
            ));
        }
        match b.trim() {
            "train" => train.push(v),
            "val" => val.push(v),
            "test" => test.push(v),
            other => {
                return Err(Error::parse(
                    &split_path,
                    i + 1,
                    format!("unknown role {other:?}"),
                ))
            }
        }
    }
    let split = LabelledSplit::new(labels, train, val, test)?;

    Ok(GraphBundle {
        graph,
        features,
        split,
        edge_stats,
    })
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Write `bundle` in the layout read by [`load_graph_bundle`]. Edge weights
/// are not stored; every written edge has weight 1 on reload.
pub fn save_graph_bundle(bundle: &GraphBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_file(&dir.join(EDGES_FILE), |w| {
        for (u, v, _) in bundle.graph.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    })?;
    write_file(&dir.join(FEATURES_FILE), |w| {
        let mut line = String::new();
        for i in 0..bundle.features.rows() {
            line.clear();
            for (j, v) in bundle.features.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                // `{:?}` prints the shortest string that round-trips exactly.
                let _ = write!(line, "{v:?}");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })?;
    write_file(&dir.join(LABELS_FILE), |w| {
        for l in &bundle.split.labels {
            match l {
                Some(c) => writeln!(w, "{c}")?,
                None => writeln!(w, "-1")?,
            }
        }
        Ok(())
    })?;
    write_file(&dir.join(SPLIT_FILE), |w| {
        for (set, role) in [
            (&bundle.split.train, SplitRole::Train),
            (&bundle.split.val, SplitRole::Val),
            (&bundle.split.test, SplitRole::Test),
        ] {
            for v in set {
                writeln!(w, "{v}\t{}", role.as_str())?;
            }
        }
        Ok(())
    })
}
