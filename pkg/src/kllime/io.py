"""Instance readers and plain-text writers (CSV, ASCII PGM, TSV)."""
import numpy as np

from .perturb import Instance


def read_pgm(path):
    """Read a P2 PGM; returns ``(pixels / maxval, (rows, cols))``."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII (P2) PGM file")
    try:
        cols, rows, maxval = (int(t) for t in tokens[1:4])
        pixels = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM: {exc}") from exc
    if maxval < 1 or pixels.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} pixels with maxval >= 1, got {pixels.size}")
    return pixels / maxval, (rows, cols)


def read_csv_row(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 1:
        raise ValueError(f"{path}: expected a single line of comma-separated values")
    try:
        return np.array([float(v) for v in lines[0].split(",")])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def load_instance(path, background=0.0, shape=None):
    if str(path).lower().endswith(".pgm"):
        features, shape = read_pgm(path)
    else:
        features = read_csv_row(path)
    return Instance(features, background, shape)


def pgm_bytes(pixels, shape):
    rows, cols = shape
    pix = np.asarray(pixels, dtype=np.int64).reshape(rows, cols)
    lines = [f"P2\n{cols} {rows}\n255\n"]
    lines.extend(" ".join(str(v) for v in row) + "\n" for row in pix)
    return "".join(lines).encode("ascii")


def write_pgm(path, pixels, shape):
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(pixels, shape))


def power_curve_tsv(lambdas, complexity, power):
    out = ["lambda\tmean_complexity\trelative_power\n"]
    out.extend(f"{a:.9g}\t{b:.9g}\t{c:.9g}\n" for a, b, c in zip(lambdas, complexity, power))
    return "".join(out)
