"""Built-in horizontal immersions with analytic jets."""
from __future__ import annotations

import importlib
from typing import Optional, Sequence

import numpy as np

from .immersion import Chart
from .moebius import CRAutomorphism, check_ball, compose_chart

SQRT3 = np.sqrt(3.0)
HEX_TORUS_AREA = 4.0 * SQRT3 * np.pi**2 / 3.0
HEX_LATTICE = np.array([[1.0, 0.0], [0.5, SQRT3 / 2.0]])


def _round_sphere_jets(u: np.ndarray) -> tuple:
    """Unit S^m in R^{m+1}, x = (sin t1 * S^{m-1}(rest), cos t1), S^1 = (cos, sin)."""
    k, m = u.shape
    if m == 1:
        c, s = np.cos(u[:, 0]), np.sin(u[:, 0])
        p = np.stack([c, s], axis=1)
        d1 = np.stack([-s, c], axis=1)[:, None, :]
        d2 = -p[:, None, None, :]
        return p, d1, d2
    t = u[:, 0]
    g, dg, ddg = _round_sphere_jets(u[:, 1:])
    s, c = np.sin(t)[:, None], np.cos(t)[:, None]
    p = np.concatenate([s * g, c], axis=1)
    d1 = np.zeros((k, m, m + 1))
    d2 = np.zeros((k, m, m, m + 1))
    d1[:, 0] = np.concatenate([c * g, -s], axis=1)
    d1[:, 1:, :m] = s[:, None] * dg
    d2[:, 0, 0] = np.concatenate([-s * g, -c], axis=1)
    d2[:, 0, 1:, :m] = c[:, None] * dg
    d2[:, 1:, 0, :m] = c[:, None] * dg
    d2[:, 1:, 1:, :m] = s[:, None, None] * ddg
    return p, d1, d2


def _embed(arrays: tuple, offset: int, dim: int) -> tuple:
    out = []
    for a in arrays:
        full = np.zeros(a.shape[:-1] + (dim,))
        full[..., offset:offset + a.shape[-1]] = a
        out.append(full)
    return tuple(out)


def geodesic_sphere(m: int = 2, n: int = 2) -> Chart:
    """Totally geodesic Legendrian/isotropic S^m: unit sphere of span{e_{n+2}, ..., e_{n+m+2}}.

    The plane is the imaginary slice {x = 0} (points i*y with y real). Parameters are
    hyperspherical angles; the point with all polar angles pi/2 and azimuth 0 is e_{n+2}.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    dim = 2 * n + 2
    jets = lambda u: _embed(_round_sphere_jets(u), n + 1, dim)
    bounds = tuple([(0.0, np.pi)] * (m - 1) + [(0.0, 2 * np.pi)])
    periodic = tuple([False] * (m - 1) + [True])
    return Chart(func=lambda u: jets(u)[0], m=m, n=n, bounds=bounds, periodic=periodic,
                 jets=jets, name=f"geodesic_sphere({m},{n})")


def whitney_sphere(m: int = 2, n: int = 2, b: Optional[Sequence[float]] = None) -> Chart:
    """Psi_b applied to the geodesic sphere."""
    base = geodesic_sphere(m, n)
    if b is None:
        return base
    b = check_ball(np.asarray(b, dtype=float))
    if b.shape != (2 * n + 2,):
        raise ValueError(f"b must have length {2 * n + 2}")
    return compose_chart(CRAutomorphism.from_b(b), base, name=f"whitney_sphere({m},{n})")


def _hex_torus_jets(u: np.ndarray) -> tuple:
    """phi_H = (e^{i 4 sqrt3 pi y/3}, e^{2 pi i (x - sqrt3 y/3)}, e^{-2 pi i (x + sqrt3 y/3)})/sqrt3,
    with (x, y) = s1 (1, 0) + s2 (1/2, sqrt3/2) in lattice coordinates s."""
    wave = np.array([[0.0, 4.0 * SQRT3 * np.pi / 3.0],
                     [2.0 * np.pi, -2.0 * np.pi * SQRT3 / 3.0],
                     [-2.0 * np.pi, -2.0 * np.pi * SQRT3 / 3.0]])
    freq = wave @ HEX_LATTICE.T          # phase_j = freq[j] . s
    ph = u @ freq.T                      # (K, 3)
    z = np.exp(1j * ph) / SQRT3
    dz = 1j * freq.T[None, :, :] * z[:, None, :]                       # (K, 2, 3)
    ddz = -(freq.T[:, None, :] * freq.T[None, :, :])[None] * z[:, None, None, :]
    real = lambda a: np.concatenate([a.real, a.imag], axis=-1)
    return real(z), real(dz), real(ddz)


def hexagonal_torus() -> Chart:
    return Chart(func=lambda u: _hex_torus_jets(u)[0], m=2, n=2, bounds=((0.0, 1.0), (0.0, 1.0)),
                 periodic=(True, True), jets=_hex_torus_jets, name="hexagonal_torus")


def horizontal_circle(n: int = 1) -> Chart:
    """Great circle cos(s) e_1 + sin(s) e_2 in the real slice."""
    if n < 1:
        raise ValueError("need n >= 1")
    dim = 2 * n + 2
    jets = lambda u: _embed(_round_sphere_jets(u), 0, dim)
    return Chart(func=lambda u: jets(u)[0], m=1, n=n, bounds=((0.0, 2 * np.pi),), periodic=(True,),
                 jets=jets, name=f"horizontal_circle({n})")


def perturbed_torus(amplitude: float = 0.1, mode: int = 1) -> Chart:
    """Non-minimal Legendrian torus: Psi_b(phi_H o shear) with b = amplitude * e_mode.

    Being a reparameterized CR image of phi_H, it is CR-equivalent to the hexagonal
    torus: W_CR and the CR-volume equal the hexagonal area, only the round-metric
    geometry changes.

    The shear s -> (s1 + amplitude sin(2 pi s2), s2) has unit Jacobian determinant,
    so it is a diffeomorphism of the torus for every amplitude; amplitude 0 gives phi_H.
    """
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1)")
    if not 1 <= mode <= 6:
        raise ValueError("mode selects a coordinate direction 1..6")
    a = float(amplitude)

    def jets(u):
        s1 = u[:, 0] + a * np.sin(2 * np.pi * u[:, 1])
        v = np.stack([s1, u[:, 1]], axis=1)
        p, d1, d2 = _hex_torus_jets(v)
        jac = np.zeros((len(u), 2, 2))   # jac[k, c, a] = d v_c / d u_a
        jac[:, 0, 0] = 1.0
        jac[:, 0, 1] = 2 * np.pi * a * np.cos(2 * np.pi * u[:, 1])
        jac[:, 1, 1] = 1.0
        hess = np.zeros((len(u), 2, 2, 2))
        hess[:, 0, 1, 1] = -(2 * np.pi) ** 2 * a * np.sin(2 * np.pi * u[:, 1])
        e1 = np.einsum("kcn,kca->kan", d1, jac)
        e2 = np.einsum("kcdn,kca,kdb->kabn", d2, jac, jac) + np.einsum("kcn,kcab->kabn", d1, hess)
        return p, e1, e2

    base = Chart(func=lambda u: jets(u)[0], m=2, n=2, bounds=((0.0, 1.0), (0.0, 1.0)),
                 periodic=(True, True), jets=jets, name="sheared_torus")
    if a == 0.0:
        return hexagonal_torus()
    b = np.zeros(6)
    b[mode - 1] = a
    return compose_chart(CRAutomorphism.from_b(b), base, name=f"perturbed_torus({a},{mode})")


CATALOG = {
    "geodesic_sphere": geodesic_sphere,
    "whitney_sphere": whitney_sphere,
    "hexagonal_torus": hexagonal_torus,
    "horizontal_circle": horizontal_circle,
    "perturbed_torus": perturbed_torus,
}

# known values for the default parameters of each entry
EXPECTED = {
    "geodesic_sphere": {"m": 2, "n": 2, "genus": 0, "volume": 4 * np.pi, "W_CR": 4 * np.pi, "cr_volume": 4 * np.pi},
    "whitney_sphere": {"m": 2, "n": 2, "genus": 0, "W_CR": 4 * np.pi, "cr_volume": 4 * np.pi},
    "hexagonal_torus": {"m": 2, "n": 2, "genus": 1, "volume": HEX_TORUS_AREA, "W_CR": HEX_TORUS_AREA,
                        "cr_volume": HEX_TORUS_AREA},
    "horizontal_circle": {"m": 1, "n": 1, "volume": 2 * np.pi},
    "perturbed_torus": {"m": 2, "n": 2, "genus": 1, "W_CR": HEX_TORUS_AREA},
}


def _plugin(spec: str, params: dict) -> Chart:
    """'package.module:factory' -> factory(**params), which must return a Chart."""
    mod, _, attr = spec.partition(":")
    try:
        factory = getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ValueError(f"cannot load chart plugin {spec!r}: {exc}")
    chart = factory(**params)
    if not isinstance(chart, Chart):
        raise ValueError(f"plugin {spec!r} did not return a Chart")
    return chart


def make_chart(name: str, **params) -> Chart:
    """Catalog entry by name, or a plugin given as 'module:factory'."""
    if ":" in name:
        return _plugin(name, params)
    if name not in CATALOG:
        raise ValueError(f"unknown chart {name!r}; choose from {sorted(CATALOG)}")
    return CATALOG[name](**params)
