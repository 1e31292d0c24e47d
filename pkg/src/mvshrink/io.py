"""CSV and flat key-value file handling.

All matrix files are comma-separated with a mandatory header row; indices
in headers (``B_<j>_<k>``, ``xi_<j>``, ...) are 1-based.  Writes go through
a temporary file in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataError
from .sampler import PosteriorSamples


def _atomic_write(path, render):
    """Write via a temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            render(handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ingest_csv(path) -> np.ndarray:
    """Read a numeric CSV (header row mandatory) into an (n, m) array.

    Raises
    ------
    DataError
        Empty file, ragged rows (message carries the 1-based line number),
        or a non-numeric cell (message carries 1-based row and column).
    """
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        rows = list(reader)
    rows = [r for r in rows if r]  # ignore blank lines
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows after the header")
    width = len(header)
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(
                f"{path}: line {i + 2} has {len(row)} fields, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {i + 1}, column {j + 1}: {cell!r}"
                )
            if not np.isfinite(value):
                raise DataError(
                    f"{path}: non-finite cell at row {i + 1}, column {j + 1}: {cell!r}"
                )
            out[i, j] = value
    return out


def write_matrix(path, mat, columns=None, fmt="%.17g"):
    """Write a 2-D array as CSV with a header row."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if columns is None:
        columns = [f"c{j + 1}" for j in range(mat.shape[1])]

    def render(handle):
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in mat:
            writer.writerow([fmt % v for v in row])

    _atomic_write(path, render)


def write_key_values(path, items):
    """Write ordered (key, value) pairs as ``key = value`` lines."""

    def render(handle):
        for key, value in items:
            handle.write(f"{key} = {value}\n")

    _atomic_write(path, render)


def read_key_values(path) -> dict:
    out = {}
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _block_columns(prefix: str, rows: int, cols: int) -> list[str]:
    return [f"{prefix}_{j + 1}_{k + 1}" for j in range(rows) for k in range(cols)]


def save_posterior(out_dir, samples: PosteriorSamples):
    """Persist retained draws: b_draws.csv, sigma_draws.csv, xi_draws.csv."""
    out_dir = Path(out_dir)
    m, p, q = samples.b.shape
    write_matrix(
        out_dir / "b_draws.csv",
        samples.b.reshape(m, p * q),
        columns=_block_columns("B", p, q),
    )
    write_matrix(
        out_dir / "sigma_draws.csv",
        samples.sigma.reshape(m, q * q),
        columns=_block_columns("Sigma", q, q),
    )
    write_matrix(
        out_dir / "xi_draws.csv",
        samples.xi,
        columns=[f"xi_{j + 1}" for j in range(p)],
    )


def load_posterior(draws_dir) -> PosteriorSamples:
    """Rebuild a PosteriorSamples from a directory written by save_posterior."""
    draws_dir = Path(draws_dir)
    b_flat = ingest_csv(draws_dir / "b_draws.csv")
    sigma_flat = ingest_csv(draws_dir / "sigma_draws.csv")
    xi = ingest_csv(draws_dir / "xi_draws.csv")
    m = b_flat.shape[0]
    q = int(round(np.sqrt(sigma_flat.shape[1])))
    if q * q != sigma_flat.shape[1]:
        raise DataError("sigma_draws.csv does not hold square matrices")
    p = b_flat.shape[1] // q
    if p * q != b_flat.shape[1]:
        raise DataError("b_draws.csv width is not divisible by q")
    meta = {}
    meta_path = draws_dir / "run_meta.txt"
    if meta_path.exists():
        meta = read_key_values(meta_path)
    tau = float(meta.get("tau", "nan"))
    return PosteriorSamples(
        b=b_flat.reshape(m, p, q),
        sigma=sigma_flat.reshape(m, q, q),
        xi=xi,
        tau=tau,
        meta=meta,
    )
