"""Riemannian base data (alpha, beta) on a coordinate chart."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .jets import Jet, scalar_part

CLOSED_CONFORMAL_TOL = 1e-9


class GeometryError(ValueError):
    pass


class NonInvertibleMetricError(GeometryError):
    pass


class DegenerateDirectionError(GeometryError):
    pass


def _solve(a: list[list], v: list) -> list:
    """Gaussian elimination that works on floats and jets alike (SPD input, no pivoting)."""
    n = len(v)
    m = [list(row) + [v[i]] for i, row in enumerate(a)]
    for k in range(n):
        if abs(scalar_part(m[k][k])) < 1e-300:
            raise NonInvertibleMetricError("metric is singular")
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            for j in range(k, n + 1):
                m[i][j] = m[i][j] - f * m[k][j]
    out = [0.0] * n
    for i in reversed(range(n)):
        acc = m[i][n]
        for j in range(i + 1, n):
            acc = acc - m[i][j] * out[j]
        out[i] = acc / m[i][i]
    return out


@dataclass(frozen=True)
class ManifoldModel:
    """A Riemannian metric ``a_ij(x)`` and one-form ``b_i(x)`` on a chart.

    ``metric`` and ``oneform`` take a list of coordinates (floats or jets) and
    return nested lists of the same kind, so every x-derivative can be taken
    by jets.  ``kind`` is ``"euclidean_conformal"`` for the flat preset.
    """

    n: int
    metric: Callable[[list], list[list]]
    oneform: Callable[[list], list]
    kind: str = "general_callable"
    b0: float = float("inf")
    c0: float | None = None
    d: tuple[float, ...] | None = None
    params: dict = field(default_factory=dict)

    def metric_at(self, x) -> np.ndarray:
        a = np.array(self.metric(list(map(float, x))), dtype=float)
        if not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
            raise GeometryError("metric is not symmetric")
        return a

    def oneform_at(self, x) -> np.ndarray:
        return np.array(self.oneform(list(map(float, x))), dtype=float)

    def inverse_metric_at(self, x) -> np.ndarray:
        a = self.metric_at(x)
        eig = np.linalg.eigvalsh(a)
        if eig.min() <= 0:
            raise NonInvertibleMetricError(f"metric not positive definite at x={list(x)} (min eig {eig.min():.3g})")
        return np.linalg.inv(a)

    def b_squared(self, x):
        """``b^2 = a^{ij} b_i b_j``; accepts jets."""
        b = self.oneform(x)
        if self.kind == "euclidean_conformal":
            return sum(bi * bi for bi in b)
        up = _solve(self.metric(x), b)
        return sum(bi * ui for bi, ui in zip(b, up))

    def check_point(self, x) -> None:
        eig = np.linalg.eigvalsh(self.metric_at(x))
        if eig.min() <= 0:
            raise NonInvertibleMetricError(f"metric not positive definite at x={list(x)}")
        b2 = float(self.b_squared(list(map(float, x))))
        if b2 >= self.b0**2:
            raise GeometryError(f"b^2={b2:.6g} exceeds bound b0^2={self.b0**2:.6g}")


def euclidean_conformal(n: int, c0: float, d: Sequence[float] | None = None, b0: float = float("inf")) -> ManifoldModel:
    """Flat metric with ``b_i(x) = c0*x_i + d_i``, closed and conformal with ``c = c0``."""
    d = tuple(float(v) for v in (d if d is not None else [0.0] * n))
    if len(d) != n:
        raise GeometryError(f"d has length {len(d)}, expected {n}")
    c0 = float(c0)

    def metric(x):
        return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

    def oneform(x):
        return [c0 * x[i] + d[i] for i in range(n)]

    return ManifoldModel(n, metric, oneform, "euclidean_conformal", b0, c0, d, {"c0": c0, "d": list(d)})


def general_model(n: int, metric, oneform, b0: float = float("inf"), **params) -> ManifoldModel:
    return ManifoldModel(n, metric, oneform, "general_callable", b0, params=params)


# -- first derivatives in x --------------------------------------------------


def _x_derivatives(model: ManifoldModel, x):
    """``da[k, i, j] = d_k a_ij`` and ``db[k, i] = d_k b_i`` at ``x``."""
    n = model.n
    da = np.zeros((n, n, n))
    db = np.zeros((n, n))
    if model.kind == "euclidean_conformal":
        db[:] = model.c0 * np.eye(n)
        return da, db
    for k in range(n):
        xs = [Jet.variable(float(x[i]), 1, 1.0 if i == k else 0.0) for i in range(n)]
        a = model.metric(xs)
        b = model.oneform(xs)
        for i in range(n):
            db[k, i] = b[i][1] if isinstance(b[i], Jet) else 0.0
            for j in range(n):
                da[k, i, j] = a[i][j][1] if isinstance(a[i][j], Jet) else 0.0
    return da, db


def christoffel(model: ManifoldModel, x) -> np.ndarray:
    """``gamma[i, j, k] = Gamma^i_jk`` of ``a`` at ``x``."""
    n = model.n
    if model.kind == "euclidean_conformal":
        return np.zeros((n, n, n))
    ainv = model.inverse_metric_at(x)
    da, _ = _x_derivatives(model, x)
    # lower[l, j, k] = 1/2 (d_j a_lk + d_k a_lj - d_l a_jk)
    lower = 0.5 * (np.einsum("jlk->ljk", da) + np.einsum("klj->ljk", da) - da)
    return np.einsum("il,ljk->ijk", ainv, lower)


def covariant_derivative_oneform(model: ManifoldModel, x) -> np.ndarray:
    """``db[i, j] = b_{i|j} = d_j b_i - Gamma^k_ij b_k``."""
    _, dxb = _x_derivatives(model, x)
    gamma = christoffel(model, x)
    b = model.oneform_at(x)
    return dxb.T - np.einsum("kij,k->ij", gamma, b)


@dataclass
class RSInvariants:
    r_ij: np.ndarray
    s_ij: np.ndarray
    r00: float
    r_i: np.ndarray
    r0: float
    r_up: np.ndarray
    r: float
    s_i: np.ndarray
    s0: float
    s_up: np.ndarray
    s0_up: np.ndarray
    b_cov: np.ndarray
    c: float | None = None


def rs_split(model: ManifoldModel, x, y) -> RSInvariants:
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise DegenerateDirectionError("y must be nonzero")
    bij = covariant_derivative_oneform(model, x)
    r_ij = 0.5 * (bij + bij.T)
    s_ij = 0.5 * (bij - bij.T)
    ainv = model.inverse_metric_at(x)
    b_up = ainv @ model.oneform_at(x)
    r_i = b_up @ r_ij  # r_i = b^j r_ji
    s_i = b_up @ s_ij
    c = float(np.trace(ainv @ bij)) / model.n
    return RSInvariants(
        r_ij=r_ij,
        s_ij=s_ij,
        r00=float(y @ r_ij @ y),
        r_i=r_i,
        r0=float(r_i @ y),
        r_up=ainv @ r_i,
        r=float(b_up @ r_i),
        s_i=s_i,
        s0=float(s_i @ y),
        s_up=ainv @ s_i,
        s0_up=ainv @ (s_ij @ y),
        b_cov=bij,
        c=c,
    )


@dataclass
class ClosedConformalResult:
    holds: bool
    c_values: list[float]
    max_residual: float


def closed_conformal_check(model: ManifoldModel, sample_points, tol: float = CLOSED_CONFORMAL_TOL) -> ClosedConformalResult:
    """Test ``b_{i|j} = c(x) a_ij`` with ``c`` estimated by the trace."""
    pts = list(sample_points)
    if not pts:
        raise ValueError("closed_conformal_check needs at least one sample point")
    cs, worst = [], 0.0
    for x in pts:
        bij = covariant_derivative_oneform(model, x)
        a = model.metric_at(x)
        c = float(np.trace(np.linalg.solve(a, bij))) / model.n
        cs.append(c)
        worst = max(worst, float(np.abs(bij - c * a).max()))
    return ClosedConformalResult(worst <= tol, cs, worst)


def conformal_factor(model: ManifoldModel, x) -> float:
    if model.kind == "euclidean_conformal":
        return float(model.c0)
    res = closed_conformal_check(model, [x])
    if not res.holds:
        raise GeometryError(f"one-form is not closed and conformal at x={list(x)} (residual {res.max_residual:.3g})")
    return res.c_values[0]


def alpha_spray(model: ManifoldModel, x, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise DegenerateDirectionError("y must be nonzero")
    return 0.5 * np.einsum("ijk,j,k->i", christoffel(model, x), y, y)


def direction_with_s(model: ManifoldModel, x, s: float, rng_vec, scale: float = 1.0) -> np.ndarray:
    """A vector ``y`` at ``x`` with ``beta/alpha = s`` and ``alpha = scale``.

    ``rng_vec`` is any vector used to pick the component orthogonal to ``b``.
    """
    a = model.metric_at(x)
    b = model.oneform_at(x)
    b_up = np.linalg.solve(a, b)
    bnorm = float(np.sqrt(b @ b_up))
    if bnorm == 0.0:
        raise GeometryError("one-form vanishes at x; s is identically 0")
    if abs(s) > bnorm:
        raise GeometryError(f"|s|={abs(s):.6g} exceeds b={bnorm:.6g}")
    e1 = b_up / bnorm
    w = np.asarray(rng_vec, dtype=float)
    w = w - (w @ a @ e1) * e1
    wn = float(np.sqrt(w @ a @ w))
    if wn < 1e-12:
        raise GeometryError("could not build a transverse direction")
    w = w / wn
    cos = s / bnorm
    return scale * (cos * e1 + np.sqrt(max(0.0, 1 - cos * cos)) * w)
