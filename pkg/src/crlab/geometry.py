"""Euclidean, complex and contact structure on R^{2n+2} = C^{n+1} and S^{2n+1}.

Vectors are real arrays ordered (x_1..x_{n+1}, y_1..y_{n+1}) with z_j = x_j + i y_j.
The complex structure is J(d/dx_j) = -d/dy_j, J(d/dy_j) = d/dx_j, so J(x, y) = (y, -x);
in complex notation J acts as multiplication by -i.

Sign check: with omega = sum dx^dy one has omega(X, Y) = g(X, J Y) for this J, and
theta = (1/r) dr o J equals <., T>/r^2 with T = -J(X) = sum x_j d/dy_j - y_j d/dx_j,
so the printed formulas are mutually consistent.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

SPHERE_TOL = 1e-12


def dim_n(v: np.ndarray) -> int:
    size = np.shape(v)[-1]
    if size % 2 or size < 4:
        raise ValueError(f"ambient vectors need even length >= 4, got {size}")
    return size // 2 - 1


def apply_complex_structure(v: np.ndarray) -> np.ndarray:
    """J(x, y) = (y, -x), acting on the last axis."""
    v = np.asarray(v, dtype=float)
    h = dim_n(v) + 1
    return np.concatenate([v[..., h:], -v[..., :h]], axis=-1)


def reeb_field(p: np.ndarray) -> np.ndarray:
    """T = -J(X) = (-y, x)."""
    p = np.asarray(p, dtype=float)
    h = dim_n(p) + 1
    return np.concatenate([-p[..., h:], p[..., :h]], axis=-1)


def theta(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Contact form at p evaluated on v, theta_p(v) = <v, T(p)> / |p|^2."""
    p = np.asarray(p, dtype=float)
    return np.sum(v * reeb_field(p), axis=-1) / np.sum(p * p, axis=-1)


def to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    h = dim_n(v) + 1
    return v[..., :h] + 1j * v[..., h:]


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=-1)


def as_sphere_point(v: np.ndarray, tol: float = SPHERE_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    dim_n(v)
    err = np.max(np.abs(np.linalg.norm(v, axis=-1) - 1.0))
    if err > tol:
        raise ValueError(f"point is off the unit sphere by {err:.3e}")
    return v


def basis_vector(k: int, n: int) -> np.ndarray:
    """e_k (1-based) in R^{2n+2}."""
    e = np.zeros(2 * n + 2)
    e[k - 1] = 1.0
    return e


class ContactData(NamedTuple):
    reeb: np.ndarray
    theta_of: Callable[[np.ndarray], float]


def contact_at(p: np.ndarray) -> ContactData:
    p = as_sphere_point(p)
    t = reeb_field(p)
    return ContactData(reeb=t, theta_of=lambda v: float(np.dot(np.asarray(v, dtype=float), t)))


def horizontal_project(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto H_p = span{p, T(p)}^perp (p on the unit sphere).

    Works on stacked points/vectors along leading axes.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    t = reeb_field(p)
    vp = np.sum(v * p, axis=-1, keepdims=True)
    vt = np.sum(v * t, axis=-1, keepdims=True)
    return v - vp * p - vt * t


def complex_to_real_matrix(a: np.ndarray) -> np.ndarray:
    """Real 2(n+1) matrix of the complex-linear map z -> a z."""
    a = np.asarray(a, dtype=complex)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def real_to_complex_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    h = m.shape[0] // 2
    return m[:h, :h] + 1j * m[h:, :h]


def j_matrix(n: int) -> np.ndarray:
    h = n + 1
    eye = np.eye(h)
    zero = np.zeros((h, h))
    return np.block([[zero, eye], [-eye, zero]])
