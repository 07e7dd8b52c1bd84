"""Plain-text formats.

* grid signals: CSV ``index,re,im``
* spectra: CSV ``n,re,im``
* sampling sets: one point in [0, 1) per line (``#`` comments allowed)
* measurements: CSV ``j,t,re,im``
"""

from __future__ import annotations

import csv

import numpy as np

from .spaces import GridSignal, Spectrum


def _rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise ValueError(f"{path}: empty file")
        rows = list(reader)
        if [h.strip() for h in first] != header:
            # headerless file
            rows.insert(0, first)
    return [r for r in rows if r and not r[0].lstrip().startswith("#")]


def write_grid_signal(path, x: GridSignal):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "re", "im"])
        for i, v in enumerate(x.values):
            wr.writerow([i, repr(float(v.real)), repr(float(v.imag))])


def read_grid_signal(path) -> GridSignal:
    rows = _rows(path, ["index", "re", "im"])
    idx = np.array([int(r[0]) for r in rows])
    if not np.array_equal(idx, np.arange(idx.size)):
        raise ValueError(f"{path}: indices must run 0..L-1 in order")
    return GridSignal(np.array([float(r[1]) + 1j * float(r[2]) for r in rows]))


def write_spectrum(path, s: Spectrum):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "re", "im"])
        for n, v in zip(s.frequencies, s.coefficients):
            wr.writerow([int(n), repr(float(v.real)), repr(float(v.imag))])


def read_spectrum(path) -> Spectrum:
    rows = _rows(path, ["n", "re", "im"])
    n = np.array([int(r[0]) for r in rows])
    N = (n.size - 1) // 2
    if not np.array_equal(n, np.arange(-N, N + 1)):
        raise ValueError(f"{path}: frequencies must run -N..N in order")
    return Spectrum(np.array([float(r[1]) + 1j * float(r[2]) for r in rows]))


def write_points(path, points):
    with open(path, "w") as fh:
        for t in points:
            fh.write(f"{float(t)!r}\n")


def read_points(path) -> np.ndarray:
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                pts.append(float(line))
    return np.array(pts)


def write_measurements(path, points, values):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "t", "re", "im"])
        for j, (t, v) in enumerate(zip(points, np.asarray(values, dtype=complex))):
            wr.writerow([j, repr(float(t)), repr(float(v.real)), repr(float(v.imag))])


def read_measurements(path):
    """Returns ``(points, values)``."""
    rows = _rows(path, ["j", "t", "re", "im"])
    t = np.array([float(r[1]) for r in rows])
    v = np.array([float(r[2]) + 1j * float(r[3]) for r in rows])
    return t, v
