"""Convert the Vowel and Satimage benchmarks to the CSV layout read by ``dssfn``.

Reads the comma-separated ``vowel.dat`` and ``satimage.dat`` files either from
a directory or from inside the ``keel_ds`` wheel (``keel_ds/data/balanced/raw``),
and writes ``<name>_train.csv`` / ``<name>_test.csv`` with a header row and the
integer class label in the last column.

Vowel keeps its original split (first column: 0 train, 1 test) and the ten
acoustic features. Satimage ships as one pooled table here, so it is split
into 4435 training and 2000 test rows by a seeded permutation; labels
{1, 2, 3, 4, 5, 7} are renumbered 0..5.

    python scripts/prepare_datasets.py SOURCE [--out data] [--seed 0]
"""
from __future__ import annotations

import argparse
import io
import zipfile
from pathlib import Path

import numpy as np

RAW = "keel_ds/data/balanced/raw"
SATIMAGE_TRAIN = 4435


def read_raw(source: Path, name: str) -> np.ndarray:
    if source.is_dir():
        text = (source / f"{name}.dat").read_text(encoding="utf-8")
    else:
        with zipfile.ZipFile(source) as z:
            text = z.read(f"{RAW}/{name}.dat").decode("utf-8")
    return np.loadtxt(io.StringIO(text), delimiter=",")


def write(path: Path, features: np.ndarray, labels: np.ndarray) -> None:
    header = ",".join([f"f{i}" for i in range(features.shape[1])] + ["label"])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row, lab in zip(features, labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(lab)}\n")


def vowel(source: Path, out: Path) -> None:
    a = read_raw(source, "vowel")
    for flag, part in ((0, "train"), (1, "test")):
        rows = a[a[:, 0] == flag]
        write(out / f"vowel_{part}.csv", rows[:, 3:13], rows[:, 13].astype(int))


def satimage(source: Path, out: Path, seed: int) -> None:
    a = read_raw(source, "satimage")
    raw = a[:, -1].astype(int)
    classes = sorted(set(raw.tolist()))
    labels = np.array([classes.index(c) for c in raw])
    perm = np.random.default_rng(seed).permutation(len(a))
    tr, te = perm[:SATIMAGE_TRAIN], perm[SATIMAGE_TRAIN:]
    write(out / "satimage_train.csv", a[tr, :-1], labels[tr])
    write(out / "satimage_test.csv", a[te, :-1], labels[te])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="keel_ds wheel or directory holding vowel.dat and satimage.dat")
    ap.add_argument("--out", type=Path, default=Path("data"))
    ap.add_argument("--seed", type=int, default=0, help="Satimage split seed")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    vowel(args.source, args.out)
    satimage(args.source, args.out, args.seed)


if __name__ == "__main__":
    main()
