"""Write a small MNIST stand-in as IDX files from the 5000-sample CSV subset.

The CSV ships inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz):
784 pixel columns then the label. The first 400 images of each class go to
the train files, the remaining 100 to the test files.

    python scripts/make_mnist_proxy.py mnist_5k.csv.gz data/mnist5k
"""
import argparse
import gzip
from pathlib import Path

import numpy as np

from arae.data import MNIST_FILES, idx_images_bytes, idx_labels_bytes


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("out_dir")
    p.add_argument("--train-per-class", type=int, default=400)
    args = p.parse_args()
    with gzip.open(args.csv, "rt") as f:
        rows = np.loadtxt(f, delimiter=",", dtype=np.int64)
    images, labels = rows[:, :-1].reshape(-1, 28, 28), rows[:, -1]
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        train_idx.extend(idx[: args.train_per_class])
        test_idx.extend(idx[args.train_per_class:])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", train_idx), ("test", test_idx)):
        img_name, lab_name = MNIST_FILES[split]
        (out / img_name).write_bytes(idx_images_bytes(images[idx]))
        (out / lab_name).write_bytes(idx_labels_bytes(labels[idx]))
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {out}")


if __name__ == "__main__":
    main()
