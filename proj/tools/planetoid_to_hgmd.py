#!/usr/bin/env python3
"""Convert Planetoid raw files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the hgmd dataset directory format, using the public split:
train = first |y| nodes, val = the next 500, test = test.index.

Output: edges.txt, features.bin, labels.txt, split_{train,val,test}.txt, meta.json.
"""

import argparse
import json
import pickle
import struct
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

FEATURE_MAGIC = b"HGMDFEAT"
VAL_SIZE = 500


def load_pickle(path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def load_planetoid(raw_dir, name):
    raw = Path(raw_dir)
    parts = {k: load_pickle(raw / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    tx, ty = parts["tx"], parts["ty"]
    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad them with zero rows.
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((parts["allx"], tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((parts["ally"], ty))
    labels[test_index, :] = labels[test_sorted, :]

    n = features.shape[0]
    edges = set()
    for u, nbrs in parts["graph"].items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    num_train = len(parts["y"])
    train = list(range(num_train))
    val = list(range(num_train, num_train + VAL_SIZE))
    test = sorted(test_index)
    y = labels.argmax(axis=1)
    return np.asarray(features.todense(), dtype=np.float32), y, sorted(edges), train, val, test, labels.shape[1]


def write_dataset(out_dir, name, x, y, edges, train, val, test, num_classes):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges))
    with open(out / "features.bin", "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<II", x.shape[0], x.shape[1]))
        f.write(np.ascontiguousarray(x, dtype="<f4").tobytes())
    (out / "labels.txt").write_text("".join(f"{int(c)}\n" for c in y))
    for split, idx in (("train", train), ("val", val), ("test", test)):
        (out / f"split_{split}.txt").write_text("".join(f"{i}\n" for i in idx))
    (out / "meta.json").write_text(json.dumps({"num_classes": int(num_classes), "name": name}, indent=2) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("raw_dir", help="directory holding the ind.<name>.* files")
    parser.add_argument("out_dir", help="output dataset directory")
    parser.add_argument("--name", default="cora", help="dataset name in the file names (default: cora)")
    args = parser.parse_args(argv)

    x, y, edges, train, val, test, c = load_planetoid(args.raw_dir, args.name)
    write_dataset(args.out_dir, args.name, x, y, edges, train, val, test, c)
    print(f"wrote {args.out_dir}: {x.shape[0]} nodes, {len(edges)} edges, {x.shape[1]} features, {c} classes, "
          f"{len(train)}/{len(val)}/{len(test)} train/val/test")
    return 0


if __name__ == "__main__":
    sys.exit(main())
