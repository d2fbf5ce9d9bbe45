#!/usr/bin/env python3
"""Convert Planetoid `ind.<name>.*` files into a gcoarse bundle directory.

The bundle holds edges.tsv, features.csv, labels.csv and split.tsv. The split
is the public one: the first 20 labelled nodes per class for training, the
next 500 nodes for validation and the listed 1000 test nodes.

Usage: planetoid_to_bundle.py <raw_dir> <name> <out_dir>
  e.g. planetoid_to_bundle.py planetoid/data cora data/cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_part(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw: Path, name: str, out: Path) -> None:
    x, y, tx, ty, allx, ally, graph = (
        load_part(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph")
    )
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = sorted(test_index)

    # Citeseer lists test nodes that are missing from tx; pad them with zeros.
    first, last = test_sorted[0], test_sorted[-1]
    if last - first + 1 != len(test_sorted):
        full = last - first + 1
        tx_ext = sp.lil_matrix((full, tx.shape[1]))
        tx_ext[np.array(test_sorted) - first, :] = tx
        tx = tx_ext
        ty_ext = np.zeros((full, ty.shape[1]))
        ty_ext[np.array(test_sorted) - first, :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty))
    onehot[test_index, :] = onehot[test_sorted, :]
    n = features.shape[0]

    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)
    train = list(range(y.shape[0]))
    held_out = set(test_index)
    val = [v for v in range(y.shape[0], min(y.shape[0] + 500, n)) if labels[v] >= 0 and v not in held_out]

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    dense = features.toarray()
    with open(out / "features.csv", "w") as f:
        for row in dense:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(out / "labels.csv", "w") as f:
        for c in labels:
            f.write(f"{int(c)}\n")
    with open(out / "split.tsv", "w") as f:
        for role, nodes in (("train", train), ("val", val), ("test", test_index)):
            for v in nodes:
                f.write(f"{v}\t{role}\n")
    print(f"{name}: {n} nodes, {len(edges)} edges, {dense.shape[1]} features, "
          f"{len(train)}/{len(val)}/{len(test_index)} split -> {out}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw_dir", type=Path)
    ap.add_argument("name")
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()
    convert(args.raw_dir, args.name, args.out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
