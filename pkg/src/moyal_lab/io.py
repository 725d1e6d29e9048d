"""Spectrum CSV, estimate JSON and plot-data CSV files.

Spectrum files start with ``# key: value`` metadata rows followed by a
``k,mu_k,eigenvalue_k`` table; ``eigenvalue_k`` is empty for non-Hermitian
sources.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .traces import SingularSpectrum, TraceEstimate

SPECTRUM_COLUMNS = ("k", "mu_k", "eigenvalue_k")


def _num(x: float) -> str:
    return repr(float(x))


def spectrum_to_csv(s: SingularSpectrum) -> str:
    buf = io.StringIO()
    for key in sorted(s.meta):
        buf.write(f"# {key}: {s.meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SPECTRUM_COLUMNS)
    eig = s.eigenvalues
    for k, mu in enumerate(s.values):
        writer.writerow([k, _num(mu), "" if eig is None else _num(eig[k])])
    return buf.getvalue()


def write_spectrum(path, s: SingularSpectrum) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spectrum_to_csv(s))
    return path


def read_spectrum(path) -> SingularSpectrum:
    meta: dict = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            else:
                rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if tuple(header) != SPECTRUM_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    mu, eig = [], []
    for row in reader:
        mu.append(float(row[1]))
        eig.append(float(row[2]) if row[2] else None)
    eigenvalues = None if not eig or any(e is None for e in eig) else np.array(eig)
    return SingularSpectrum(np.array(mu), eigenvalues, meta)


def write_estimate(path, estimate: TraceEstimate) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(estimate.to_json(), indent=2, sort_keys=True) + "\n")
    return path


def read_estimate(path) -> dict:
    return json.loads(Path(path).read_text())


def write_plotdata(path, estimate: TraceEstimate) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "D_n", "window_mean"])
    for n, dn, wm in estimate.plot_rows():
        writer.writerow([n, _num(dn), "" if np.isnan(wm) else _num(wm)])
    path.write_text(buf.getvalue())
    return path


__all__ = ["read_estimate", "read_spectrum", "spectrum_to_csv", "write_estimate", "write_plotdata",
           "write_spectrum"]
