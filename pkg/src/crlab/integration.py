"""Tensor-product quadrature over chart parameter boxes and volume integrals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .immersion import Chart, FundamentalData, fundamental_from_jet
from .moebius import weight

DEFAULT_PERIODIC = 64
DEFAULT_GL = 48
CHUNK = 8192


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    scheme: tuple
    resolution: tuple

    def __len__(self) -> int:
        return len(self.weights)


def _uniform(lo: float, hi: float, count: int, shift: float = 0.0) -> tuple:
    step = (hi - lo) / count
    return lo + step * (np.arange(count) + shift), np.full(count, step)


def _gauss(lo: float, hi: float, count: int) -> tuple:
    x, w = leggauss(count)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _sinh_gauss(lo: float, hi: float, center: float, width: float, count: int) -> tuple:
    """Gauss-Legendre after a sinh change of variables clustering nodes at center."""
    a = np.arcsinh((lo - center) / width)
    b = np.arcsinh((hi - center) / width)
    x, w = leggauss(count)
    eta = a + 0.5 * (b - a) * (x + 1.0)
    return center + width * np.sinh(eta), 0.5 * (b - a) * width * np.cosh(eta) * w


def tensor_grid(axes: Sequence[tuple], scheme: tuple) -> QuadratureGrid:
    nodes = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    weights = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    w = np.ones_like(weights[0])
    for wi in weights:
        w = w * wi
    return QuadratureGrid(
        nodes=np.stack([n.ravel() for n in nodes], axis=1),
        weights=w.ravel(),
        scheme=scheme,
        resolution=tuple(len(a[0]) for a in axes),
    )


def build_grid(chart: Chart, resolution: Union[int, Sequence[int], None] = None) -> QuadratureGrid:
    """Uniform (trapezoid) nodes on periodic axes, Gauss-Legendre on the others."""
    if resolution is None:
        resolution = [DEFAULT_PERIODIC if p else DEFAULT_GL for p in chart.periodic]
    elif np.isscalar(resolution):
        resolution = [int(resolution)] * chart.m
    resolution = [int(r) for r in resolution]
    if len(resolution) != chart.m or min(resolution) < 4:
        raise ValueError(f"need one resolution >= 4 per axis, got {resolution}")
    axes, scheme = [], []
    for (lo, hi), per, count in zip(chart.bounds, chart.periodic, resolution):
        axes.append(_uniform(lo, hi, count) if per else _gauss(lo, hi, count))
        scheme.append("periodic-uniform" if per else "gauss-legendre")
    return tensor_grid(axes, tuple(scheme))


def clustered_grid(chart: Chart, center: np.ndarray, width: Union[float, Sequence[float]],
                   resolution: Union[int, Sequence[int]]) -> QuadratureGrid:
    """Grid concentrated around a parameter point, for integrands peaked there.

    Periodic axes integrate over the period window centred at the point.
    """
    center = np.asarray(center, dtype=float)
    widths = np.broadcast_to(np.asarray(width, dtype=float), (chart.m,))
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (chart.m,))
    axes = []
    for (lo, hi), per, c, wd, count in zip(chart.bounds, chart.periodic, center, widths, res):
        if per:
            half = 0.5 * (hi - lo)
            axes.append(_sinh_gauss(c - half, c + half, c, wd, int(count)))
        else:
            axes.append(_sinh_gauss(lo, hi, c, wd, int(count)))
    return tensor_grid(axes, ("sinh-gauss",) * chart.m)


def area_density(chart: Chart, grid: QuadratureGrid) -> tuple:
    """Points phi(u_k) and weights w_k sqrt(det g(u_k))."""
    pts, dens = [], []
    for start in range(0, len(grid), CHUNK):
        u = grid.nodes[start:start + CHUNK]
        p, d1, _ = chart.jet_batch(u)
        g = np.einsum("kin,kjn->kij", d1, d1)
        det = np.linalg.det(g)
        if np.any(det <= 0):
            raise ValueError("degenerate induced metric at a quadrature node")
        pts.append(p)
        dens.append(grid.weights[start:start + CHUNK] * np.sqrt(det))
    return np.concatenate(pts), np.concatenate(dens)


def volume(chart: Chart, grid: QuadratureGrid) -> float:
    return float(np.sum(area_density(chart, grid)[1]))


class WeightedVolume:
    """b -> sum_k w_k W_b(phi(u_k))^{m/2} sqrt(det g(u_k)), with the geometry cached."""

    def __init__(self, chart: Chart, grid: QuadratureGrid):
        self.points, self.density = area_density(chart, grid)
        self.m = chart.m

    def __call__(self, b: np.ndarray) -> float:
        return float(np.sum(self.density * weight(b, self.points) ** (0.5 * self.m)))


def weighted_volume(chart: Chart, grid: QuadratureGrid, b: np.ndarray) -> float:
    return WeightedVolume(chart, grid)(b)


def integrate(chart: Chart, grid: QuadratureGrid, integrand: Callable[[FundamentalData], np.ndarray]) -> float:
    """sum_k w_k f(data_k) sqrt(det g_k) for an integrand of the curvature data."""
    total = 0.0
    for start in range(0, len(grid), CHUNK):
        data = fundamental_from_jet(*chart.jet_batch(grid.nodes[start:start + CHUNK]))
        total += float(np.sum(grid.weights[start:start + CHUNK] * data.sqrt_det * integrand(data)))
    return total


def integrate_many(chart: Chart, grid: QuadratureGrid,
                   integrands: dict) -> dict:
    """Several curvature integrals in one pass over the grid."""
    totals = {k: 0.0 for k in integrands}
    for start in range(0, len(grid), CHUNK):
        data = fundamental_from_jet(*chart.jet_batch(grid.nodes[start:start + CHUNK]))
        dv = grid.weights[start:start + CHUNK] * data.sqrt_det
        for k, f in integrands.items():
            totals[k] += float(np.sum(dv * f(data)))
    return totals
