"""Parameterized horizontal immersions into S^{2n+1} and their curvature data.

A chart maps a box in R^m into the unit sphere of R^{2n+2}. All evaluation is
batched: parameter arrays have shape (K, m) and jets come back as
point (K, N), first derivatives (K, m, N) and second derivatives (K, m, m, N).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import apply_complex_structure, reeb_field

HORIZ_TOL = 1e-8


@dataclass(frozen=True)
class Chart:
    func: Callable[[np.ndarray], np.ndarray]
    m: int
    n: int
    bounds: tuple
    periodic: tuple
    jets: Optional[Callable[[np.ndarray], tuple]] = None
    name: str = "chart"
    fd_steps: tuple = (1e-5, 1e-4)

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if len(self.bounds) != self.m or len(self.periodic) != self.m:
            raise ValueError("bounds and periodic flags must have one entry per axis")

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n + 2

    def point(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return self.func(u[None, :])[0]
        return self.func(u)

    def jet_batch(self, u: np.ndarray) -> tuple:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.jets is not None:
            return self.jets(u)
        return fd_jets(self.func, u, *self.fd_steps)


def fd_jets(func: Callable, u: np.ndarray, h1: float = 1e-5, h2: float = 1e-4) -> tuple:
    """Central finite-difference jets of a batched map."""
    k, m = u.shape
    p = func(u)
    d1 = np.empty((k, m) + p.shape[1:])
    d2 = np.empty((k, m, m) + p.shape[1:])
    eye = np.eye(m)
    for i in range(m):
        d1[:, i] = (func(u + h1 * eye[i]) - func(u - h1 * eye[i])) / (2 * h1)
        fp, fm = func(u + h2 * eye[i]), func(u - h2 * eye[i])
        d2[:, i, i] = (fp - 2 * p + fm) / h2**2
        for j in range(i + 1, m):
            ei, ej = h2 * eye[i], h2 * eye[j]
            mixed = (func(u + ei + ej) - func(u + ei - ej) - func(u - ei + ej) + func(u - ei - ej)) / (4 * h2**2)
            d2[:, i, j] = mixed
            d2[:, j, i] = mixed
    return p, d1, d2


def evaluate_jet(chart: Chart, u: np.ndarray) -> tuple:
    u = np.asarray(u, dtype=float)
    p, d1, d2 = chart.jet_batch(u)
    if u.ndim == 1:
        return p[0], d1[0], d2[0]
    return p, d1, d2


def horizontality_residual(chart: Chart, nodes: np.ndarray) -> float:
    """max |theta(d_i phi)| over the given parameter nodes (or a grid object)."""
    nodes = getattr(nodes, "nodes", nodes)
    p, d1, _ = chart.jet_batch(nodes)
    t = reeb_field(p)
    return float(np.max(np.abs(np.einsum("kin,kn->ki", d1, t))))


def tensor_norm2(ginv: np.ndarray, t: np.ndarray) -> np.ndarray:
    """|T|^2 for a symmetric 2-tensor with vector values, T[..., i, j, :]."""
    return np.einsum("...ik,...jl,...ijn,...kln->...", ginv, ginv, t, t)


def vector_norm2(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


@dataclass
class FundamentalData:
    point: np.ndarray
    tangents: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    sqrt_det: np.ndarray
    reeb: np.ndarray
    second_fund: np.ndarray
    mean_curv: np.ndarray
    A_T: np.ndarray
    H_T: np.ndarray
    A_N: np.ndarray
    A_Nhat: np.ndarray
    H_N: np.ndarray
    H_Nhat: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    E_N: np.ndarray
    U: np.ndarray
    A_hat_traceless: np.ndarray

    @property
    def m(self) -> int:
        return self.metric.shape[-1]

    def take(self, idx) -> "FundamentalData":
        return FundamentalData(**{f.name: getattr(self, f.name)[idx] for f in dataclasses.fields(self)})

    def norm2(self, name: str) -> np.ndarray:
        value = getattr(self, name)
        if value.ndim >= 3 and value.shape[-3] == self.m and value.shape[-2] == self.m:
            return tensor_norm2(self.inverse_metric, value)
        return vector_norm2(value)

    def tangential(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ambient vectors onto T_p Sigma."""
        c = np.einsum("...n,...in->...i", v, self.tangents)
        return np.einsum("...i,...ij,...jn->...n", c, self.inverse_metric, self.tangents)


def fundamental_from_jet(p: np.ndarray, d1: np.ndarray, d2: np.ndarray,
                         horiz_tol: float = HORIZ_TOL) -> FundamentalData:
    """Curvature data from batched jets (shapes (K,N), (K,m,N), (K,m,m,N))."""
    m = d1.shape[1]
    t = reeb_field(p)
    resid = np.max(np.abs(np.einsum("kin,kn->ki", d1, t))) if len(p) else 0.0
    if resid > horiz_tol:
        raise ValueError(f"chart is not horizontal: |theta(d phi)| = {resid:.3e}")

    g = np.einsum("kin,kjn->kij", d1, d1)
    det = np.linalg.det(g)
    if np.any(det <= 0):
        raise ValueError("degenerate induced metric")
    ginv = np.linalg.inv(g)

    # project second derivatives off span{tangents, position}
    coef = np.einsum("kijn,kln->kijl", d2, d1)
    tang = np.einsum("kijl,klq,kqn->kijn", coef, ginv, d1)
    radial = np.einsum("kijn,kn->kij", d2, p)[..., None] * p[:, None, None, :]
    a = d2 - tang - radial
    a = 0.5 * (a + np.swapaxes(a, 1, 2))

    jd1 = apply_complex_structure(d1)
    a_t = np.einsum("kijn,kn->kij", a, t)
    sigma = np.einsum("kijn,kln->kijl", a, jd1)
    # J d_i phi has Gram matrix g, so the N-part is solved with g^{-1}
    a_n = np.einsum("kijl,klq,kqn->kijn", sigma, ginv, jd1)
    a_nhat = a - a_n - a_t[..., None] * t[:, None, None, :]

    trace = lambda x: np.einsum("kij,kij...->k...", ginv, x)
    h = trace(a)
    h_n = trace(a_n)
    h_nhat = trace(a_nhat)
    h_t = np.einsum("kn,kn->k", h, t)
    beta = np.einsum("kij,kijl->kl", ginv, sigma)

    e_n = (g[..., None] * h_n[:, None, None, :]
           + beta[:, :, None, None] * jd1[:, None, :, :]
           + beta[:, None, :, None] * jd1[:, :, None, :])
    u_tensor = a_n - e_n / (m + 2)
    a_hat = a_nhat - g[..., None] * h_nhat[:, None, None, :] / m

    return FundamentalData(
        point=p, tangents=d1, metric=g, inverse_metric=ginv, sqrt_det=np.sqrt(det), reeb=t,
        second_fund=a, mean_curv=h, A_T=a_t, H_T=h_t, A_N=a_n, A_Nhat=a_nhat, H_N=h_n,
        H_Nhat=h_nhat, sigma=sigma, beta=beta, E_N=e_n, U=u_tensor, A_hat_traceless=a_hat,
    )


def fundamental_data(chart: Chart, u: np.ndarray, horiz_tol: float = HORIZ_TOL) -> FundamentalData:
    u = np.asarray(u, dtype=float)
    data = fundamental_from_jet(*chart.jet_batch(u), horiz_tol=horiz_tol)
    return data.take(0) if u.ndim == 1 else data


# --- finite-difference stencils on the parameter domain ---------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.arange(-2, 3)


def _stencil_points(u: np.ndarray, h: float) -> tuple:
    """Points of the 5x5 tensor stencils around u for every axis pair."""
    m = len(u)
    eye = np.eye(m)
    pts = [u]
    index = {(): 0}
    for i in range(m):
        for a in _OFFSETS:
            if a:
                index[(i, a)] = len(pts)
                pts.append(u + a * h * eye[i])
    for i in range(m):
        for j in range(i + 1, m):
            for a in _OFFSETS:
                for b in _OFFSETS:
                    if a and b:
                        index[(i, a, j, b)] = len(pts)
                        pts.append(u + h * (a * eye[i] + b * eye[j]))
    return np.array(pts), index


def _derivatives(values: np.ndarray, index: dict, m: int, h: float) -> tuple:
    """First and second parameter derivatives of stencil samples (4th order)."""
    f0 = values[index[()]]
    get = lambda i, a: f0 if a == 0 else values[index[(i, a)]]
    d1 = np.stack([sum(_D1[k] * get(i, a) for k, a in enumerate(_OFFSETS)) / h for i in range(m)])
    d2 = np.empty((m, m) + f0.shape)
    for i in range(m):
        d2[i, i] = sum(_D2[k] * get(i, a) for k, a in enumerate(_OFFSETS)) / h**2
        for j in range(i + 1, m):
            acc = 0.0
            for ka, a in enumerate(_OFFSETS):
                for kb, b in enumerate(_OFFSETS):
                    if a and b:
                        acc = acc + _D1[ka] * _D1[kb] * values[index[(i, a, j, b)]]
            d2[i, j] = d2[j, i] = acc / h**2
    return d1, d2


def intrinsic_scalar_curvature(chart: Chart, u: np.ndarray, h: float = 1e-3) -> float:
    """Scalar curvature of the induced metric from finite differences of g."""
    u = np.asarray(u, dtype=float)
    m = chart.m
    if m == 1:
        return 0.0
    pts, index = _stencil_points(u, h)
    _, d1, _ = chart.jet_batch(pts)
    gs = np.einsum("kin,kjn->kij", d1, d1)
    g = gs[0]
    dg, ddg = _derivatives(gs, index, m, h)  # dg[k,i,j] = d_k g_ij
    ginv = np.linalg.inv(g)
    # Christoffel symbols of the first kind G1[p,l,j] and their derivatives
    g1 = 0.5 * (np.einsum("lpj->plj", dg) + np.einsum("jpl->plj", dg) - np.einsum("plj->plj", dg))
    dg1 = 0.5 * (np.einsum("klpj->kplj", ddg) + np.einsum("kjpl->kplj", ddg) - np.einsum("kplj->kplj", ddg))
    gam = np.einsum("ip,plj->ilj", ginv, g1)
    dginv = -np.einsum("ia,kab,bp->kip", ginv, dg, ginv)
    dgam = np.einsum("kip,plj->kilj", dginv, g1) + np.einsum("ip,kplj->kilj", ginv, dg1)
    # R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{kp} G^p_{lj} - G^i_{lp} G^p_{kj}
    riem = (np.einsum("kilj->ijkl", dgam) - np.einsum("likj->ijkl", dgam)
            + np.einsum("ikp,plj->ijkl", gam, gam) - np.einsum("ilp,pkj->ijkl", gam, gam))
    ric = np.einsum("ijil->jl", riem)
    return float(np.einsum("jl,jl->", ginv, ric))


def scalar_curvature_rhs(data: FundamentalData) -> float:
    m = data.m
    return float(m * (m - 1) + (m - 1) / m * data.norm2("mean_curv") - data.norm2("U")
                 - data.norm2("A_hat_traceless") - 2 * (m - 1) / (m * (m + 2)) * data.norm2("H_N"))


def scalar_curvature_residual(chart: Chart, u: np.ndarray, h: float = 1e-3) -> float:
    """R_intrinsic minus the curvature expression built from H, U, A-hat and H^N."""
    u = np.asarray(u, dtype=float)
    return intrinsic_scalar_curvature(chart, u, h) - scalar_curvature_rhs(fundamental_data(chart, u))


def _first_derivative_samples(chart: Chart, u: np.ndarray, h: float, quantity: Callable) -> np.ndarray:
    """d_i of quantity(data) at u, 5-point stencil along each axis."""
    m = chart.m
    eye = np.eye(m)
    pts = np.array([u + a * h * eye[i] for i in range(m) for a in _OFFSETS])
    vals = quantity(fundamental_from_jet(*chart.jet_batch(pts)))
    vals = vals.reshape((m, len(_OFFSETS)) + vals.shape[1:])
    return np.einsum("a,ia...->i...", _D1, vals) / h


def div_j_hn(chart: Chart, u: np.ndarray, h: float = 1e-3) -> float:
    """Surface divergence of J(H^N) at u."""
    u = np.asarray(u, dtype=float)

    def flux(d: FundamentalData) -> np.ndarray:
        v = apply_complex_structure(d.H_N)
        comps = np.einsum("kij,kjn,kn->ki", d.inverse_metric, d.tangents, v)
        return d.sqrt_det[:, None] * comps

    grads = _first_derivative_samples(chart, u, h, flux)
    sqrt_det = fundamental_data(chart, u).sqrt_det
    return float(np.trace(grads) / sqrt_det)


def beta_curl(chart: Chart, u: np.ndarray, h: float = 1e-3) -> float:
    """d_1 beta_2 - d_2 beta_1 on a 2-parameter chart."""
    if chart.m != 2:
        raise ValueError("beta_curl needs a 2-parameter chart")
    grads = _first_derivative_samples(chart, np.asarray(u, dtype=float), h, lambda d: d.beta)
    return float(grads[0, 1] - grads[1, 0])


def sample_interior(chart: Chart, count: int, seed: int, margin: float = 0.1) -> np.ndarray:
    """Seeded parameter points, kept away from the ends of non-periodic axes."""
    rng = np.random.default_rng(seed)
    cols = []
    for (lo, hi), per in zip(chart.bounds, chart.periodic):
        pad = 0.0 if per else margin * (hi - lo)
        cols.append(rng.uniform(lo + pad, hi - pad, size=count))
    return np.stack(cols, axis=1)


def check_chart(chart: Chart, nodes: Sequence, sphere_tol: float = 1e-10, rank_tol: float = 1e-8) -> None:
    """Raise if sampled points leave the sphere or the differential drops rank."""
    p, d1, _ = chart.jet_batch(np.asarray(nodes, dtype=float))
    off = np.max(np.abs(np.linalg.norm(p, axis=-1) - 1.0))
    if off > sphere_tol:
        raise ValueError(f"chart leaves the sphere by {off:.3e}")
    smin = np.min(np.linalg.svd(d1, compute_uv=False)[:, -1])
    if smin <= rank_tol:
        raise ValueError(f"chart differential is rank deficient (sigma_min={smin:.3e})")
