"""Build gzipped IDX files from the 5000-sample MNIST subset bundled with mlxtend.

Usage: python scripts/make_mnist5k.py [path/to/mnist_5k.csv.gz or mlxtend wheel] [outdir]

The subset holds 500 images per digit. The first 350 of each digit (in file
order) go to the train files, the remaining 150 to the test files.
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
N_TRAIN_PER_DIGIT = 350


def read_source(path):
    path = Path(path)
    if path.suffix == ".whl":
        raw = zipfile.ZipFile(path).read(MEMBER)
    else:
        raw = path.read_bytes()
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",", dtype=np.int64)
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def write_idx(path, images, labels):
    n = len(labels)
    img_path = path.with_name(path.name + "-images-idx3-ubyte.gz")
    lbl_path = path.with_name(path.name + "-labels-idx1-ubyte.gz")
    # mtime=0 keeps the gzip bytes reproducible
    with gzip.GzipFile(img_path, "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x803, n, 28, 28))
        fh.write(images.tobytes())
    with gzip.GzipFile(lbl_path, "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x801, n))
        fh.write(labels.tobytes())


def main(argv):
    if len(argv) < 2:
        try:
            import mlxtend.data
        except ImportError:
            sys.exit("pass the mlxtend wheel or mnist_5k.csv.gz path")
        source = Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
    else:
        source = argv[1]
    outdir = Path(argv[2]) if len(argv) > 2 else Path("data/mnist5k")
    outdir.mkdir(parents=True, exist_ok=True)
    images, labels = read_source(source)
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        train_idx.extend(idx[:N_TRAIN_PER_DIGIT])
        test_idx.extend(idx[N_TRAIN_PER_DIGIT:])
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
    write_idx(outdir / "train", images[train_idx], labels[train_idx])
    write_idx(outdir / "t10k", images[test_idx], labels[test_idx])
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test samples to {outdir}")


if __name__ == "__main__":
    main(sys.argv)
