"""Convert the 5000-image MNIST sample shipped with mlxtend into IDX files.

Usage::

    python scripts/make_mnist_subset.py mlxtend-0.24.0-py3-none-any.whl data/mnist5k

The source may be the mlxtend wheel or the extracted ``mnist_5k.csv.gz``
(784 pixel columns in 0..255 followed by the label).  The images are
shuffled with a fixed seed and split 4000 / 1000 into train and test.
"""

from __future__ import annotations

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from qmcreduce.dataset import write_idx_images, write_idx_labels

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def load_csv(src: Path) -> tuple[np.ndarray, np.ndarray]:
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as zf:
            raw = zf.read(MEMBER)
    else:
        raw = src.read_bytes()
    text = gzip.decompress(raw).decode()
    arr = np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.int64)
    return arr[:, :-1].reshape(-1, 28, 28), arr[:, -1]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path)
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--n-train", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    images, labels = load_csv(args.source)
    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order] / 255.0, labels[order]
    n = args.n_train
    args.outdir.mkdir(parents=True, exist_ok=True)
    write_idx_images(args.outdir / "train-images-idx3-ubyte.gz", images[:n])
    write_idx_labels(args.outdir / "train-labels-idx1-ubyte.gz", labels[:n])
    write_idx_images(args.outdir / "t10k-images-idx3-ubyte.gz", images[n:])
    write_idx_labels(args.outdir / "t10k-labels-idx1-ubyte.gz", labels[n:])
    print(f"wrote {n} train and {len(labels) - n} test images to {args.outdir}")


if __name__ == "__main__":
    main()
