#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (Cora, CiteSeer, PubMed) to a taskcl graph.

Input is the raw Planetoid directory holding ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}.
Output is <out>/<name>.json plus edge list, labels and TCLM features, readable with
`taskcl ... --graph <out>/<name>.json`.

    python3 scripts/convert_planetoid.py --raw planetoid/data --name cora --out data/cora
"""

import argparse
import json
import pickle
import struct
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def load_part(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def load_planetoid(raw: Path, name: str):
    x, y, tx, ty, allx, ally, graph = (load_part(raw, name, p) for p in PARTS)
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)

    if name == "citeseer":
        # Some test nodes are isolated and missing from tx/ty; pad with zero rows.
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_sorted, :]

    n = features.shape[0]
    labels = onehot.argmax(axis=1)
    # Nodes with an all-zero label row get class 0; Planetoid CiteSeer has a few.
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))
    return np.asarray(features.todense(), dtype=np.float64), labels.astype(np.int64), sorted(edges)


def write_tclm(path: Path, m: np.ndarray) -> None:
    m = np.ascontiguousarray(m, dtype="<f8")
    with open(path, "wb") as f:
        f.write(b"TCLM")
        f.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--raw", type=Path, required=True, help="directory with the ind.<name>.* files")
    ap.add_argument("--name", default="cora", choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--row-normalize", action="store_true", help="scale feature rows to sum 1")
    args = ap.parse_args(argv)

    try:
        x, y, edges = load_planetoid(args.raw, args.name)
    except FileNotFoundError as e:
        print(f"convert_planetoid: {e}", file=sys.stderr)
        return 3
    if args.row_normalize:
        sums = x.sum(axis=1, keepdims=True)
        x = np.divide(x, sums, out=np.zeros_like(x), where=sums > 0)

    args.out.mkdir(parents=True, exist_ok=True)
    name = args.name
    with open(args.out / f"{name}.edges", "w") as f:
        f.writelines(f"{u} {v}\n" for u, v in edges)
    with open(args.out / f"{name}.labels", "w") as f:
        f.writelines(f"{i} {c}\n" for i, c in enumerate(y))
    write_tclm(args.out / f"{name}.tclm", x)
    manifest = {
        "name": name,
        "edges": f"{name}.edges",
        "features": f"{name}.tclm",
        "labels": f"{name}.labels",
        "num_classes": int(y.max()) + 1,
    }
    (args.out / f"{name}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{name}: {x.shape[0]} nodes, {len(edges)} edges, {x.shape[1]} features, "
          f"{manifest['num_classes']} classes -> {args.out / (name + '.json')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
