"""Radial integrals J and I, their limit constants C, the sextic sphere identity,
the alpha coefficient and the degeneration expansion of |Psi_b(Sigma)| as b -> -X(p)."""
from __future__ import annotations

import csv
from functools import lru_cache
from math import atan, gamma, log, log1p, pi, sqrt
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .catalog import _round_sphere_jets
from .immersion import Chart, FundamentalData
from .integration import _gauss, _uniform, area_density, clustered_grid, tensor_grid


def sphere_area(m: int) -> float:
    """|S^m| in R^{m+1}."""
    return 2.0 * pi ** ((m + 1) / 2.0) / gamma((m + 1) / 2.0)


# ---------------------------------------------------------------- J and I

@lru_cache(maxsize=4096)
def _j(k: int, l: int, tau: float, a: float) -> float:
    if k == 0:
        return a**l / l
    if l == 1:
        if k == 1:
            return atan(a * sqrt(tau)) / sqrt(tau)
        # parts recursion from J_{k-1,1}
        return (2 * k - 3) / (2 * k - 2) * _j(k - 1, 1, tau, a) + a / ((2 * k - 2) * (1 + tau * a * a) ** (k - 1))
    if l == 2:
        if k == 1:
            return log1p(a * a * tau) / (2 * tau)
        return (1.0 - (1.0 + tau * a * a) ** (1 - k)) / (2 * (k - 1) * tau)
    return (_j(k - 1, l - 2, tau, a) - _j(k, l - 2, tau, a)) / tau


def j_integral(k: int, l: int, tau: float, a: float) -> float:
    """J_{k,l}(tau; a) = int_0^a r^{l-1} / (1 + tau r^2)^k dr, from the exact recursions."""
    if int(k) != k or int(l) != l or k < 0 or l < 1:
        raise ValueError(f"need integers k >= 0, l >= 1, got ({k}, {l})")
    if not tau > 1.0 or not a > 0.0:
        raise ValueError("need tau > 1 and a > 0")
    return _j(int(k), int(l), float(tau), float(a))


def i_integral(k: int, l: int, t: float, eps: float) -> float:
    """I_{k,l}(t; eps) = int_eps^1 (1-x)^{l/2-1} / (1-(1-t)x)^k dx = 2 t^{-k} J_{k,l}(1/t - 1; sqrt(1-eps))."""
    if int(k) != k or int(l) != l or k < 1 or l < 1:
        raise ValueError(f"need integers k, l >= 1, got ({k}, {l})")
    if not (0.0 < t < 1.0 and 0.0 < eps < 1.0):
        raise ValueError("need t, eps in (0, 1)")
    tau = 1.0 / t - 1.0
    return 2.0 * t ** (-k) * _j(int(k), int(l), tau, sqrt(1.0 - eps))


def _scaled_i(k: int, l: int, t: float, eps: float) -> float:
    # t^{k - l/2} I_{k,l} = 2 (tau + 1)^{l/2} J_{k,l}(tau; a), without forming t^{-k}
    tau = 1.0 / t - 1.0
    return 2.0 * (tau + 1.0) ** (0.5 * l) * _j(k, l, tau, sqrt(1.0 - eps))


def _neville_at_zero(x: Sequence[float], y: Sequence[float]) -> float:
    p = list(y)
    n = len(x)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i])
    return p[0]


def c_coefficient(k: int, l: int, eps: float = 0.1, t: float = 1e-8, levels: int = 4) -> float:
    """C_{k,l} = lim_{t -> 0} t^{k - l/2} I_{k,l}(t; eps), for 2k > l.

    The scaled integral is a power series in s = sqrt(t) near 0, so values at
    s, s/2, s/4, ... are extrapolated to s = 0 (Neville)."""
    if int(k) != k or int(l) != l or l < 1 or not 2 * k > l:
        raise ValueError(f"no limit constant for (k, l) = ({k}, {l}); need 2k > l >= 1")
    s = sqrt(t)
    nodes = [s / 2**j for j in range(levels)]
    vals = [_scaled_i(int(k), int(l), x * x, eps) for x in nodes]
    return _neville_at_zero(nodes, vals)


def j_recursion_residual(k: int, l: int, tau: float, a: float) -> float:
    """Relative residual of J_{k,l} = (J_{k-1,l-2} - J_{k,l-2}) / tau with every term by quadrature."""
    from scipy.integrate import quad

    def direct(kk, ll):
        if kk == 0:
            return a**ll / ll
        f = lambda r: r ** (ll - 1) / (1 + tau * r * r) ** kk
        brk = [x for x in (1.0 / sqrt(tau), 10.0 / sqrt(tau)) if x < a]
        return quad(f, 0.0, a, points=brk or None, epsabs=0.0, epsrel=1e-13, limit=200)[0]

    lhs = direct(k, l)
    rhs = (direct(k - 1, l - 2) - direct(k, l - 2)) / tau
    return abs(lhs - rhs) / abs(lhs)


def c_recursion_residuals(k: int, l: int, eps: float = 0.1) -> tuple:
    """(|C_{k,l} - C_{k-1,l-2} + C_{k,l-2}|, |C_{k,l} - (l-2)/(2(k-1)) C_{k-1,l-2}|), for 2k > l >= 3."""
    if not (2 * k > l >= 3):
        raise ValueError("recursions hold for 2k > l >= 3")
    c = c_coefficient(k, l, eps)
    c1 = c_coefficient(k - 1, l - 2, eps)
    c2 = c_coefficient(k, l - 2, eps)
    return abs(c - c1 + c2), abs(c - (l - 2) / (2.0 * (k - 1)) * c1)


# ---------------------------------------------------------------- sextic identity

def symmetric_cubic(entries: np.ndarray) -> np.ndarray:
    """Symmetrize an (m, m, m) array over all index permutations."""
    c = np.asarray(entries, dtype=float)
    if c.ndim != 3 or not c.shape[0] == c.shape[1] == c.shape[2]:
        raise ValueError("need an (m, m, m) array")
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(np.transpose(c, p) for p in perms) / 6.0


def random_symmetric_cubic(m: int, seed: int) -> np.ndarray:
    return symmetric_cubic(np.random.default_rng(seed).standard_normal((m, m, m)))


def sextic_rhs(c: np.ndarray) -> float:
    m = c.shape[0]
    tr = np.einsum("ijj->i", c)
    return 9.0 * sphere_area(m - 1) / (m * (m + 2) * (m + 4)) * (2.0 / 3.0 * np.sum(c * c) + tr @ tr)


def sphere_quadrature(dim: int, polar: int = 32, azimuth: int = 16) -> tuple:
    """Nodes and weights on S^dim in R^{dim+1}: Gauss-Legendre in polar angles, uniform in azimuth.

    Exact (to rounding) for polynomials of degree < azimuth; spectrally accurate in the polar angles."""
    if dim == 0:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    axes = [_gauss(0.0, pi, polar) for _ in range(dim - 1)] + [_uniform(0.0, 2 * pi, azimuth)]
    grid = tensor_grid(axes, ())
    x, d1, _ = _round_sphere_jets(grid.nodes)
    g = np.einsum("kin,kjn->kij", d1, d1)
    return x, grid.weights * np.sqrt(np.abs(np.linalg.det(g)))


class SexticResult(NamedTuple):
    residual: float
    lhs: float
    rhs: float
    stderr: float
    method: str


def sextic_identity_residual(c: np.ndarray, method: Optional[str] = None, samples: int = 10**6,
                             seed: int = 0) -> SexticResult:
    """int_{S^{m-1}} (C^{ijk} xi_i xi_j xi_k)^2 dxi minus the closed form.

    method "quadrature" (default for m <= 3) or "montecarlo" (default for m >= 4;
    stderr is the standard error of the estimate, 0 for quadrature)."""
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    if method is None:
        method = "quadrature" if m <= 3 else "montecarlo"
    if method == "quadrature":
        xi, w = sphere_quadrature(m - 1)
        f = np.einsum("ijk,ni,nj,nk->n", c, xi, xi, xi) ** 2
        lhs, err = float(w @ f), 0.0
    elif method == "montecarlo":
        rng = np.random.default_rng(seed)
        area = sphere_area(m - 1)
        total, total2, done = 0.0, 0.0, 0
        while done < samples:
            nb = min(200_000, samples - done)
            xi = rng.standard_normal((nb, m))
            xi /= np.linalg.norm(xi, axis=1, keepdims=True)
            f = np.einsum("ijk,ni,nj,nk->n", c, xi, xi, xi) ** 2
            total += f.sum()
            total2 += (f * f).sum()
            done += nb
        mean = total / samples
        var = max(total2 / samples - mean * mean, 0.0)
        lhs, err = float(area * mean), float(area * sqrt(var / (samples - 1)))
    else:
        raise ValueError(f"unknown method {method!r}")
    rhs = float(sextic_rhs(c))
    return SexticResult(lhs - rhs, lhs, rhs, err, method)


# ---------------------------------------------------------------- expansion

def alpha_coefficient(data: FundamentalData, m: Optional[int] = None) -> np.ndarray:
    m = data.m if m is None else m
    return ((3 * m + 2) / (3 * m + 3) * data.norm2("U") + data.norm2("A_hat_traceless")
            - (m - 2) / (2 * m) * (m * m / ((m + 2) * (m + 1)) * data.norm2("H_N") + data.norm2("H_Nhat")))


def predicted_c1(alpha: float, m: int) -> float:
    """Coefficient of t(-log t) (m = 2) or t (m >= 3) in the degeneration expansion."""
    lead = 0.25 * sphere_area(m) * alpha
    return lead if m == 2 else lead * 2.0 / (m - 2)


def degenerate_weight(p: np.ndarray, t: float, z: np.ndarray) -> np.ndarray:
    """W_b(z) for b = -(1-t) p, written to avoid cancellation when t and |z - p| are small.

    1 - |b|^2 = t(2 - t) and 1 + <z, b> = t + (1-t)(|z-p|^2/2 - i Im<z, p>)."""
    n1 = len(p) // 2
    pc = p[:n1] + 1j * p[n1:]
    zc = z[:, :n1] + 1j * z[:, n1:]
    im = np.imag(zc @ pc.conj())
    re = 0.5 * np.sum((z - p) ** 2, axis=1)
    return t * (2.0 - t) / ((t + (1.0 - t) * re) ** 2 + ((1.0 - t) * im) ** 2)


def degenerate_volume(chart: Chart, u: np.ndarray, t: float, resolution: int, kappa: float = 1.0) -> float:
    """|Psi_{-(1-t)X(p)}(Sigma)| = int W_b^{m/2} dV on a grid clustered at u."""
    u = np.asarray(u, dtype=float)
    p, d1, _ = chart.jet_batch(u[None])
    scale = np.sqrt(np.einsum("in,in->i", d1[0], d1[0]))
    grid = clustered_grid(chart, u, kappa * sqrt(t) / scale, resolution)
    pts, dens = area_density(chart, grid)
    return float(dens @ degenerate_weight(p[0], t, pts) ** (0.5 * chart.m))


class ExpansionFit(NamedTuple):
    t_samples: np.ndarray
    values: np.ndarray
    coefficients: np.ndarray
    basis: tuple
    residual_norm: float
    resolutions: np.ndarray
    converged: bool


def expansion_basis(m: int, extended: bool = True) -> tuple:
    """Basis names; the first three (m = 2) or two (m != 2) are the reported c0, c1, c2.

    The extended basis adds the next correction terms so they do not leak into c1 over
    the fit window: t^2 log t, t^2 for m = 2 and t^{3/2}, t^2 otherwise."""
    if m == 2:
        return ("1", "t(-log t)", "t") + (("t^2 log t", "t^2") if extended else ())
    return ("1", "t") + (("t^1.5", "t^2") if extended else ())


_BASIS = {
    "1": lambda t: np.ones_like(t),
    "t(-log t)": lambda t: -t * np.log(t),
    "t": lambda t: t,
    "t^2 log t": lambda t: t * t * np.log(t),
    "t^2": lambda t: t * t,
    "t^1.5": lambda t: t**1.5,
}


def fit_expansion(t: Sequence[float], values: Sequence[float], m: int, extended: bool = True) -> tuple:
    """Least-squares coefficients in expansion_basis(m, extended) and the residual norm."""
    t = np.asarray(t, dtype=float)
    a = np.stack([_BASIS[name](t) for name in expansion_basis(m, extended)], axis=1)
    coef, *_ = np.linalg.lstsq(a, np.asarray(values, dtype=float), rcond=None)
    return coef, float(np.linalg.norm(a @ coef - values))


def default_t_samples(count: int = 12) -> np.ndarray:
    return np.logspace(-2, -4, count)


def degeneration_scan(chart: Chart, u: np.ndarray, t_list: Optional[Sequence[float]] = None,
                      base_resolution: int = 64, cap: int = 1024, rtol: float = 1e-11,
                      extended: bool = True) -> ExpansionFit:
    """Volumes of Psi_{-(1-t)X(p)}(Sigma), p = phi(u), and their expansion fit.

    Each value uses a sinh-clustered grid of width sqrt(t) around u; the resolution is
    doubled until two successive values agree to rtol or the cap is reached."""
    t_arr = np.asarray(default_t_samples() if t_list is None else t_list, dtype=float)
    if np.any(t_arr <= 0) or np.any(t_arr >= 1):
        raise ValueError("t values must lie in (0, 1)")
    t_arr = np.sort(t_arr)[::-1]
    values, used = [], []
    ok = True
    for t in t_arr:
        res = base_resolution
        prev = degenerate_volume(chart, u, t, res)
        while True:
            res *= 2
            cur = degenerate_volume(chart, u, t, res)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            if res >= cap:
                ok = False
                break
            prev = cur
        values.append(cur)
        used.append(res)
    values = np.array(values)
    coef, resid = fit_expansion(t_arr, values, chart.m, extended)
    return ExpansionFit(t_arr, values, coef, expansion_basis(chart.m, extended), resid, np.array(used), ok)


def write_scan_csv(path: str, fit: ExpansionFit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "resolution"])
        for t, v, r in zip(fit.t_samples, fit.values, fit.resolutions):
            w.writerow([repr(float(t)), repr(float(v)), int(r)])
