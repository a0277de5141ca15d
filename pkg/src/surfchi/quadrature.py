"""One-dimensional rules combined into tensor rules over chart domains."""

from functools import lru_cache

import numpy as np

# 16-point Gauss-Legendre per cell; a cell may carry up to 2*pi of phase
# (truncation error per cell ~1e-29 for a pure exponential).
GAUSS_ORDER = 16
CELL_PHASE = 2.0 * np.pi
MIN_CELLS = 8


@lru_cache(maxsize=64)
def _gauss_reference(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_cells(lo, hi, ncell, order=GAUSS_ORDER):
    """Composite Gauss-Legendre rule with `ncell` equal cells on [lo, hi]."""
    x, w = _gauss_reference(order)
    edges = np.linspace(lo, hi, ncell + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def periodic_trapezoid(lo, hi, n):
    nodes = lo + (hi - lo) * np.arange(n) / n
    weights = np.full(n, (hi - lo) / n)
    return nodes, weights


def axis_rule(lo, hi, periodic, phase_span, min_points=0):
    """Pick a rule able to integrate exp(-i*phase) where the phase changes by
    at most `phase_span` radians across [lo, hi]."""
    phase_span = float(abs(phase_span))
    if periodic:
        cycles = phase_span / (2.0 * np.pi)
        n = int(np.ceil(1.1 * cycles + 3.0 * cycles ** (1.0 / 3.0) + 24))
        n = max(n, min_points)
        return periodic_trapezoid(lo, hi, n)
    ncell = max(MIN_CELLS, int(np.ceil(phase_span / CELL_PHASE)))
    ncell = max(ncell, int(np.ceil(min_points / GAUSS_ORDER)))
    return gauss_cells(lo, hi, ncell)
