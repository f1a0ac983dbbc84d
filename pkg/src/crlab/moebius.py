"""CR automorphisms of S^{2n+1}: Psi_b, unitaries, the weight W_b and the field S_b.

Psi_b is evaluated through complex arithmetic on z = x + i y. It is the restriction
of a holomorphic map, so its real differential at z applied to a real direction v is
the complex-linear map applied to the complex form of v; jets are pushed forward
analytically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    apply_complex_structure,
    complex_to_real_matrix,
    horizontal_project,
    j_matrix,
    real_to_complex_matrix,
    reeb_field,
    theta,
    to_complex,
    to_real,
)
from .immersion import Chart, FundamentalData, div_j_hn, fundamental_data

BALL_GUARD = 1.0 - 1e-9


def check_ball(b: np.ndarray, guard: float = BALL_GUARD) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    if not nb <= guard:
        raise ValueError(f"|b| = {float(nb)!r} exceeds the ball guard {guard}")
    return b


def _parts(b: np.ndarray):
    bc = to_complex(b)
    nb2 = float(np.vdot(bc, bc).real)
    s = np.sqrt(1.0 - nb2)
    return bc, nb2, s


def apply_psi_b(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Psi_b(z) = sqrt(1-|b|^2)(z+b)/(1+<z,b>) + (|b|^2+<z,b>) b / ((1+sqrt(1-|b|^2))(1+<z,b>)).

    <z,b> = sum conj(b_j) z_j. Accepts stacked points along leading axes.
    """
    b = check_ball(b)
    z = np.asarray(z, dtype=float)
    if not np.any(b):
        return z.copy()
    bc, nb2, s = _parts(b)
    zc = to_complex(z)
    w = zc @ bc.conj()
    den = 1.0 + w
    num = s * (zc + bc) + ((nb2 + w) / (1.0 + s))[..., None] * bc
    out = to_real(num / den[..., None])
    r = np.linalg.norm(out, axis=-1, keepdims=True)
    if np.any(np.abs(r - 1.0) > 1e-12) and np.all(np.abs(np.linalg.norm(z, axis=-1) - 1.0) <= 1e-12):
        out = out / r
    return out


def psi_b_differential(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Complex (n+1)x(n+1) matrix of d(Psi_b) at z."""
    b = check_ball(b)
    bc, nb2, s = _parts(b)
    zc = to_complex(z)
    den = 1.0 + zc @ bc.conj()
    lin = s * np.eye(len(bc)) + np.outer(bc, bc.conj()) / (1.0 + s)
    num = bc + lin @ zc
    return lin / den - np.outer(num, bc.conj()) / den**2


def _push_psi_b(b: np.ndarray, zc: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> tuple:
    """Push complex jets (K,h), (K,m,h), (K,m,m,h) through Psi_b."""
    bc, nb2, s = _parts(b)
    bconj = bc.conj()
    lin = lambda v: s * v + (v @ bconj)[..., None] * bc / (1.0 + s)
    den = 1.0 + zc @ bconj                      # (K,)
    num = bc + lin(zc)                          # (K,h)
    f = num / den[:, None]
    bv = v1 @ bconj                             # (K,m)
    lv = lin(v1)                                # (K,m,h)
    d1 = lv / den[:, None, None] - num[:, None, :] * (bv / den[:, None] ** 2)[..., None]
    dd = (-(lv[:, :, None, :] * bv[:, None, :, None]) - (lv[:, None, :, :] * bv[:, :, None, None])) \
        / den[:, None, None, None] ** 2 \
        + 2.0 * num[:, None, None, :] * (bv[:, :, None] * bv[:, None, :] / den[:, None, None] ** 3)[..., None]
    bv2 = v2 @ bconj
    d2 = dd + lin(v2) / den[:, None, None, None] - num[:, None, None, :] * (bv2 / den[:, None, None] ** 2)[..., None]
    return f, d1, d2


def weight(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """W_b(z) = (1-|b|^2) / ((1 + b.X)^2 + (J(b).X)^2)."""
    b = check_ball(b)
    z = np.asarray(z, dtype=float)
    jb = apply_complex_structure(b)
    bx = z @ b
    jbx = z @ jb
    return (1.0 - b @ b) / ((1.0 + bx) ** 2 + jbx**2)


def grad_inv_weight(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Euclidean gradient of 1/W_b."""
    b = check_ball(b)
    z = np.asarray(z, dtype=float)
    jb = apply_complex_structure(b)
    bx = (z @ b)[..., None]
    jbx = (z @ jb)[..., None]
    return (2.0 * (1.0 + bx) * b + 2.0 * jbx * jb) / (1.0 - b @ b)


def s_field(b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """S_b = -1/2 J(grad^H log W_b), a horizontal vector at p."""
    p = np.asarray(p, dtype=float)
    w = weight(b, p)
    grad_log_w = -np.asarray(w)[..., None] * grad_inv_weight(b, p)
    return -0.5 * apply_complex_structure(horizontal_project(p, grad_log_w))


# --- unitaries and composed automorphisms ----------------------------------

def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m, dtype=float)
    n = m.shape[0] // 2 - 1
    jm = j_matrix(n)
    return bool(np.max(np.abs(m.T @ m - np.eye(len(m)))) <= tol and np.max(np.abs(m @ jm - jm @ m)) <= tol)


def random_unitary(seed: int, n: int) -> np.ndarray:
    """Seeded element of U(n+1) as a real 2(n+1) matrix commuting with J."""
    rng = np.random.default_rng(seed)
    h = n + 1
    a = rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h))
    q, r = np.linalg.qr(a)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return complex_to_real_matrix(q)


def random_ball_point(rng: np.random.Generator, n: int, radius_max: float) -> np.ndarray:
    v = rng.standard_normal(2 * n + 2)
    return v / np.linalg.norm(v) * radius_max * rng.uniform() ** (1.0 / (2 * n + 2))


@dataclass(frozen=True)
class CRAutomorphism:
    """Composition of factors Psi_A o Psi_b, applied left to right in `factors`.

    Each factor is (A, b) with A a real unitary matrix (or None for identity).
    """

    factors: tuple = field(default_factory=tuple)

    @classmethod
    def from_b(cls, b: np.ndarray, a: Optional[np.ndarray] = None) -> "CRAutomorphism":
        return cls(((None if a is None else np.asarray(a, dtype=float), np.asarray(b, dtype=float)),))

    @classmethod
    def from_unitary(cls, a: np.ndarray) -> "CRAutomorphism":
        a = np.asarray(a, dtype=float)
        return cls(((a, np.zeros(a.shape[0])),))

    def then(self, other: "CRAutomorphism") -> "CRAutomorphism":
        """Apply self first, then other."""
        return CRAutomorphism(tuple(self.factors) + tuple(other.factors))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        for a, b in self.factors:
            z = apply_psi_b(b, z)
            if a is not None:
                z = z @ a.T
        return z

    def push_jet(self, p: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> tuple:
        zc, v1, v2 = to_complex(p), to_complex(d1), to_complex(d2)
        for a, b in self.factors:
            if np.any(b):
                zc, v1, v2 = _push_psi_b(check_ball(b), zc, v1, v2)
            if a is not None:
                ac = real_to_complex_matrix(a)
                zc, v1, v2 = zc @ ac.T, v1 @ ac.T, v2 @ ac.T
        return to_real(zc), to_real(v1), to_real(v2)

    def differential(self, z: np.ndarray) -> np.ndarray:
        """Complex matrix of the differential at z."""
        z = np.asarray(z, dtype=float)
        h = len(z) // 2
        total = np.eye(h, dtype=complex)
        for a, b in self.factors:
            if np.any(b):
                total = psi_b_differential(b, z) @ total
                z = apply_psi_b(b, z)
            if a is not None:
                total = real_to_complex_matrix(a) @ total
                z = a @ z
        return total

    def push_vector(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        return to_real(self.differential(z) @ to_complex(v))


def compose_chart(aut: CRAutomorphism, chart: Chart, name: Optional[str] = None) -> Chart:
    """The chart aut o chart with analytically pushed-forward jets."""
    base_jets = chart.jet_batch
    return Chart(
        func=lambda u: aut(chart.func(u)),
        m=chart.m,
        n=chart.n,
        bounds=chart.bounds,
        periodic=chart.periodic,
        jets=lambda u: aut.push_jet(*base_jets(u)),
        name=name or f"psi({chart.name})",
        fd_steps=chart.fd_steps,
    )


# --- checks against the conformal and curvature transformation laws ---------

def pullback_conformal_residual(b: np.ndarray, chart: Chart, nodes, h: float = 2e-4) -> float:
    """max |<dPsi(d_i phi), dPsi(d_j phi)> - W_b <d_i phi, d_j phi>|, with d(Psi o phi)
    from a fourth-order central difference of apply_psi_b along the chart."""
    nodes = np.asarray(getattr(nodes, "nodes", nodes), dtype=float)
    p, d1, _ = chart.jet_batch(nodes)
    eye = np.eye(chart.m)
    img_at = lambda i, k: apply_psi_b(b, chart.func(nodes + k * h * eye[i]))
    img = np.stack([(8 * (img_at(i, 1) - img_at(i, -1)) - (img_at(i, 2) - img_at(i, -2))) / (12 * h)
                    for i in range(chart.m)], axis=1)
    lhs = np.einsum("kin,kjn->kij", img, img)
    rhs = weight(b, p)[:, None, None] * np.einsum("kin,kjn->kij", d1, d1)
    return float(np.max(np.abs(lhs - rhs)))


def mean_curvature_transform_rhs(b: np.ndarray, data: FundamentalData, legendrian: bool = False) -> np.ndarray:
    """Mean curvature of Sigma with respect to the pulled-back metric Psi_b^* g.

    General form (1/W) H - (2/W) J(S^T) - (m/W) (J S)^perp; with legendrian=True the
    simplified (1/W) H - ((m+2)/W) J(S^T), valid when the N-hat bundle is zero.
    """
    p = data.point
    m = data.m
    w = weight(b, p)
    s = s_field(b, p)
    js_top = apply_complex_structure(data.tangential(s))
    if legendrian:
        return (data.mean_curv - (m + 2) * js_top) / w
    js = apply_complex_structure(s)
    js_perp = js - data.tangential(js)
    return (data.mean_curv - 2.0 * js_top - m * js_perp) / w


def div_transform_rhs(b: np.ndarray, chart: Chart, u: np.ndarray, h: float = 1e-3) -> float:
    """Divergence of J((H^b)^N) for the pulled-back metric, from data of Sigma itself."""
    b = check_ball(b)
    u = np.asarray(u, dtype=float)
    data = fundamental_data(chart, u)
    m = data.m
    p = data.point
    w = float(weight(b, p))
    s = s_field(b, p)
    grad = grad_inv_weight(b, p)
    grad_s = grad - (grad @ p) * p
    grad_sigma = data.tangential(grad)
    first = (div_j_hn(chart, u, h) + 2 * m * s @ data.H_N + (m + 2) * s @ data.H_Nhat) / w
    second = -m * (m + 2) / 4.0 * w * grad_sigma @ apply_complex_structure(grad_s)
    third = -m * (m + 2) / (1.0 - b @ b) * apply_complex_structure(b) @ p
    return float(first + second + third)


# --- point normalization -----------------------------------------------------

def _complement(frame: np.ndarray) -> np.ndarray:
    """Complex orthonormal basis of the Hermitian complement of the columns of frame."""
    u, _, _ = np.linalg.svd(frame, full_matrices=True)
    return u[:, frame.shape[1]:]


def aligning_unitary(p: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """Unitary sending p to e_1 and T_p Sigma onto span{e_2..e_{m+1}}."""
    n = len(p) // 2 - 1
    h = n + 1
    q, _ = np.linalg.qr(tangents.T)
    cols = [to_complex(p)] + [to_complex(q[:, j]) for j in range(q.shape[1])]
    frame = np.array(cols).T
    full = np.hstack([frame, _complement(frame)])
    return complex_to_real_matrix(full.conj().T)


def fixing_unitary(b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Unitary B with B Psi_b(p) = p and D(B o Psi_b)_p = sqrt(W_b(p)) I on H_p."""
    pc = to_complex(p)
    p_img = to_complex(apply_psi_b(b, p))
    q = psi_b_differential(b, p) / np.sqrt(weight(b, p))
    h = len(pc)
    basis = _complement(pc[:, None])
    mat = np.outer(pc, p_img.conj())
    for f in basis.T:
        mat = mat + np.outer(f, (q @ f).conj())
    return complex_to_real_matrix(mat)


def _coefficients(norm2: float, m: int, corrected: bool) -> tuple:
    if corrected:
        alpha = -norm2 / (m * m + norm2)
        beta = -m / (m * m + norm2)
    else:
        alpha = -4 * norm2 / (m * m + 4 * norm2)
        beta = -2 * m / (m * m + 4 * norm2)
    return alpha, beta


@dataclass
class NormalizationReport:
    stage_b: list
    mean_curv_norm: list
    div_jhn: list
    chart: Chart = None

    def as_dict(self) -> dict:
        return {
            "stage_b": [np.asarray(b).tolist() for b in self.stage_b],
            "mean_curv_norm": [float(x) for x in self.mean_curv_norm],
            "div_jhn": [float(x) for x in self.div_jhn],
        }


def normalize_at_point(chart: Chart, u: np.ndarray, corrected: bool = True, h: float = 1e-3) -> tuple:
    """Compose CR automorphisms so the image passes through p = phi(u) with the same
    tangent plane, zero mean curvature and zero div J(H^N) at p.

    Returns (list of (A, b) factors, applied in order as Psi_A o Psi_b, report).
    With corrected=False the stage-one/two coefficients use the printed factor 2/m
    (resp. 2/(m+2)); that choice overshoots and is kept only for comparison.
    """
    u = np.asarray(u, dtype=float)
    m = chart.m
    n = chart.n
    data = fundamental_data(chart, u)
    a0 = aligning_unitary(data.point, data.tangents)
    aut = CRAutomorphism.from_unitary(a0)
    e1 = np.zeros(2 * n + 2)
    e1[0] = 1.0
    en2 = np.zeros(2 * n + 2)
    en2[n + 1] = 1.0

    report = NormalizationReport(stage_b=[], mean_curv_norm=[], div_jhn=[])

    def state():
        c = compose_chart(aut, chart)
        d = fundamental_data(c, u)
        return c, d

    def record(c, d):
        report.mean_curv_norm.append(float(np.linalg.norm(d.mean_curv)))
        report.div_jhn.append(div_j_hn(c, u, h))

    cur, d = state()
    for stage in (1, 2, 3):
        if stage == 1:
            v = d.H_Nhat
            alpha, beta = _coefficients(float(v @ v), m, corrected)
            b = alpha * e1 + beta * v
        elif stage == 2:
            v = d.mean_curv
            alpha, beta = _coefficients(float(v @ v), m + 2, corrected)
            b = alpha * e1 + beta * v
        else:
            gamma = div_j_hn(cur, u, h)
            k2 = (m * (m + 2)) ** 2
            b = (-gamma**2 * e1 + m * (m + 2) * gamma * en2) / (gamma**2 + k2)
        report.stage_b.append(b)
        if np.any(b):
            aut = aut.then(CRAutomorphism.from_b(b, fixing_unitary(b, e1)))
            cur, d = state()
        record(cur, d)

    aut = aut.then(CRAutomorphism.from_unitary(a0.T))
    report.chart = compose_chart(aut, chart)
    factors = [(np.eye(2 * n + 2) if a is None else a, b) for a, b in aut.factors]
    return factors, report
