"""Fundamental tensor, sprays and Berwald/Landsberg/mean-Landsberg curvature.

Every quantity has a closed-form route built from :class:`ScalarPack` and at
least one independent route built from jet derivatives of ``F^2`` or of the
spray.  Array index conventions: ``B[i, j, k, l] = B^i_jkl``,
``L[j, k, l]``, ``J[j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .geometry import (
    DegenerateDirectionError,
    GeometryError,
    ManifoldModel,
    alpha_spray,
    christoffel,
    conformal_factor,
    direction_with_s,
    rs_split,
)
from .jets import Jet, mixed_partial, symmetric_derivative_tensor
from .phi import PhiModel, ScalarPack, scalar_pack

TINY = 1e-30


class RouteUnavailableError(ValueError):
    pass


class SingularMetricError(ArithmeticError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class PointState:
    x: np.ndarray
    y: np.ndarray
    alpha: float
    beta: float
    s: float
    b2: float
    l_up: np.ndarray
    l_low: np.ndarray
    a: np.ndarray
    a_inv: np.ndarray
    b_low: np.ndarray
    b_up: np.ndarray

    @property
    def n(self) -> int:
        return len(self.x)


def point_state(model: ManifoldModel, x, y) -> PointState:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise DegenerateDirectionError("y must be nonzero")
    a = model.metric_at(x)
    a_inv = model.inverse_metric_at(x)
    b = model.oneform_at(x)
    alpha = math.sqrt(float(y @ a @ y))
    beta = float(b @ y)
    l_up = y / alpha
    return PointState(x, y, alpha, beta, beta / alpha, float(b @ a_inv @ b), l_up, a @ l_up, a, a_inv, b, a_inv @ b)


# -- F^2 as a jet-capable function ------------------------------------------


def finsler_squared(model: ManifoldModel, phi: PhiModel, x, y):
    """``F^2 = alpha^2 phi(b^2, beta/alpha)^2``; ``x`` and ``y`` may hold jets."""
    n = model.n
    a = model.metric(x)
    b = model.oneform(x)
    alpha2 = sum(a[i][j] * y[i] * y[j] for i in range(n) for j in range(n))
    beta = sum(b[i] * y[i] for i in range(n))
    alpha = jets.sqrt(alpha2)
    p = phi(model.b_squared(x), beta / alpha)
    return alpha2 * p * p


def finsler(model: ManifoldModel, phi: PhiModel, x, y) -> float:
    return math.sqrt(float(finsler_squared(model, phi, list(map(float, x)), list(map(float, y)))))


# -- fundamental tensor ----------------------------------------------------------


def _pack(phi: PhiModel, st: PointState, check: bool = True) -> ScalarPack:
    return scalar_pack(phi, st.b2, st.s, check=check)


def fundamental_tensor(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_form", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    if route == "closed_form":
        sp = _pack(phi, st, check)
        b, l = st.b_low, st.l_low
        return (
            sp.rho * st.a
            + sp.rho0 * np.outer(b, b)
            + sp.rho1 * (np.outer(b, l) + np.outer(l, b))
            - st.s * sp.rho1 * np.outer(l, l)
        )
    if route == "oracle":
        xs = list(st.x)
        hess = symmetric_derivative_tensor(lambda yy: [finsler_squared(model, phi, xs, yy)], st.y, 2, 1)[0]
        return 0.5 * hess
    raise ValueError(f"unknown route {route!r}")


def det_formula(model: ManifoldModel, phi: PhiModel, x, y, check: bool = True) -> float:
    st = point_state(model, x, y)
    sp = _pack(phi, st, check)
    n = model.n
    return sp.phi ** (n + 1) * sp.D1 ** (n - 2) * sp.D2 * float(np.linalg.det(st.a))


def inverse_fundamental_tensor(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_form", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    if route == "closed_form":
        sp = _pack(phi, st, check)
        bu, y_ = st.b_up, st.y
        return (
            st.a_inv
            + sp.eta * np.outer(bu, bu)
            + sp.eta0 / st.alpha * (np.outer(bu, y_) + np.outer(y_, bu))
            + sp.eta1 / st.alpha**2 * np.outer(y_, y_)
        ) / sp.rho
    if route == "matrix_inverse":
        return _invert(fundamental_tensor(model, phi, x, y, "oracle", check))
    raise ValueError(f"unknown route {route!r}")


def _invert(g: np.ndarray) -> np.ndarray:
    cond = float(np.linalg.cond(g))
    if not math.isfinite(cond) or cond > 1e14:
        raise SingularMetricError("fundamental tensor is singular", cond)
    return np.linalg.inv(g)


# -- sprays ------------------------------------------------------------------


def _conformal_c(model: ManifoldModel, x) -> float:
    try:
        return conformal_factor(model, x)
    except GeometryError as exc:
        raise RouteUnavailableError(f"closed_conformal route unavailable: {exc}") from None


def spray(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_conformal", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    if route == "closed_conformal":
        c = _conformal_c(model, st.x)
        sp = _pack(phi, st, check)
        return alpha_spray(model, st.x, st.y) + c * st.alpha**2 * (sp.E * st.l_up + sp.H * st.b_up)
    if route == "general":
        sp = _pack(phi, st, check)
        rs = rs_split(model, st.x, st.y)
        al = st.alpha
        common = -2 * al * sp.Q * rs.s0 + rs.r00 + 2 * al * al * sp.R * rs.r
        return (
            alpha_spray(model, st.x, st.y)
            + al * sp.Q * rs.s0_up
            + (sp.Theta * common + al * sp.Omega * (rs.r0 + rs.s0)) * st.l_up
            + (sp.Psi * common + al * sp.Pi * (rs.r0 + rs.s0)) * st.b_up
            - al * al * sp.R * (rs.r_up + rs.s_up)
        )
    if route == "oracle":
        n = model.n
        if check:
            phi.domain.check(st.b2, st.s)
        g = fundamental_tensor(model, phi, x, y, "oracle", check)
        z = np.concatenate([st.x, st.y])

        def f(zz):
            return finsler_squared(model, phi, zz[:n], zz[n:])

        along = np.concatenate([st.y, np.zeros(n)])
        rhs = np.zeros(n)
        for l in range(n):
            e = np.zeros(2 * n)
            e[n + l] = 1.0
            dx = np.zeros(2 * n)
            dx[l] = 1.0
            rhs[l] = mixed_partial(f, z, [along, e]) - mixed_partial(f, z, [dx])
        return 0.25 * _invert(g) @ rhs
    raise ValueError(f"unknown route {route!r}")


# -- Berwald -----------------------------------------------------------------


def _cyc(t: np.ndarray) -> np.ndarray:
    """Sum over the cyclic permutation k -> l -> j -> k of the last three indices."""
    if t.ndim == 4:
        return t + np.einsum("iklj->ijkl", t) + np.einsum("iljk->ijkl", t)
    return t + np.einsum("klj->jkl", t) + np.einsum("ljk->jkl", t)


def _o3(u, v, w) -> np.ndarray:
    return np.einsum("j,k,l->jkl", u, v, w)


def u_tensor(sp: ScalarPack, st: PointState) -> np.ndarray:
    """``U^i_jkl`` with ``B = (c/alpha) U``."""
    s = sp.s
    E, E2, E22, E222 = sp.E, sp.E2, sp.E22, sp.E222
    H2, H22, H222 = sp.H2, sp.H22, sp.H222
    a, l, lu, b, bu = st.a, st.l_low, st.l_up, st.b_low, st.b_up
    d = np.eye(st.n)
    t1 = (
        np.einsum("kl,ij->ijkl", (E - s * E2) * a + E22 * np.outer(b, b), d)
        + s * (3 * E22 + s * E222) * np.einsum("i,jkl->ijkl", lu, _o3(l, b, l))
        - (E22 + s * E222) * np.einsum("i,jkl->ijkl", lu, _o3(l, b, b))
    )
    t2 = -(
        s * E22 * (
            np.einsum("jl,k,i->ijkl", a, b, lu)
            + np.einsum("k,l,ij->ijkl", l, b, d)
            + np.einsum("l,k,ij->ijkl", l, b, d)
        )
        + (E - s * E2 - s * s * E22) * (np.einsum("jl,i,k->ijkl", a, lu, l) + np.einsum("l,ij,k->ijkl", l, d, l))
    )
    t3 = np.einsum(
        "i,jkl->ijkl", lu, (3 * E - 3 * s * E2 - 6 * s * s * E22 - s**3 * E222) * _o3(l, l, l) + E222 * _o3(b, b, b)
    )
    t4 = np.einsum(
        "i,jkl->ijkl",
        bu,
        (H2 - s * H22) * np.einsum("j,kl->jkl", b - s * l, a)
        - (H2 - s * H22 - s * s * H222) * _o3(l, l, b)
        - s * H222 * _o3(l, b, b),
    )
    t5 = np.einsum("i,jkl->ijkl", bu, s * (3 * H2 - 3 * s * H22 - s * s * H222) * _o3(l, l, l) + H222 * _o3(b, b, b))
    return _cyc(t1) + _cyc(t2) + t3 + _cyc(t4) + t5


def _spray_function(model: ManifoldModel, sp: ScalarPack, st: PointState, c: float):
    """Closed-conformal spray as a jet-capable function of ``y`` with ``x`` frozen."""
    gamma = christoffel(model, st.x)
    a, b, bu = st.a, st.b_low, st.b_up
    n = st.n
    e_der = [sp.E, sp.E2, sp.E22, sp.E222]
    h_der = [sp.H, sp.H2, sp.H22, sp.H222]

    def g(y):
        alpha2 = sum(a[i, j] * y[i] * y[j] for i in range(n) for j in range(n))
        alpha = jets.sqrt(alpha2)
        s = sum(b[i] * y[i] for i in range(n)) / alpha
        e = s.compose(e_der) if isinstance(s, Jet) else sp.E
        h = s.compose(h_der) if isinstance(s, Jet) else sp.H
        out = []
        for i in range(n):
            ga = 0.5 * sum(gamma[i, j, k] * y[j] * y[k] for j in range(n) for k in range(n) if gamma[i, j, k] != 0.0)
            out.append(ga + c * (alpha * e * y[i] + alpha2 * h * bu[i]))
        return out

    return g


def berwald_curvature(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_form", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    c = _conformal_c(model, st.x)
    sp = _pack(phi, st, check)
    if route == "closed_form":
        return c / st.alpha * u_tensor(sp, st)
    if route == "oracle":
        return symmetric_derivative_tensor(_spray_function(model, sp, st, c), st.y, 3, st.n)
    raise ValueError(f"unknown route {route!r}")


# -- Landsberg ---------------------------------------------------------------


def v_tensor(sp: ScalarPack, st: PointState) -> np.ndarray:
    """``V_jkl`` with ``L = -(c/2) phi V``."""
    s, phi, phi2, lam = sp.s, sp.phi, sp.phi2, sp.Lam
    E, E2, E22, E222 = sp.E, sp.E2, sp.E22, sp.E222
    H2, H22, H222 = sp.H2, sp.H22, sp.H222
    a, l, b = st.a, st.l_low, st.b_low
    m = phi * l + phi2 * (b - s * l)
    v1 = (
        np.einsum("j,kl->jkl", m, (E - s * E2) * a + E22 * np.outer(b, b))
        - phi * _o3(l, b, (E22 + s * E222) * (b - s * l) - 2 * E22 * s * l)
    )
    v2 = -(
        s * E22 * (phi * np.einsum("jl,k->jkl", a, b) + _o3(m, b, l) + _o3(m, l, b))
        + (E - s * E2 - s * s * E22) * (phi * np.einsum("jl,k->jkl", a, l) + _o3(m, l, l))
    )
    v3 = phi * ((3 * E - 3 * s * E2 - 6 * s * s * E22 - s**3 * E222) * _o3(l, l, l) + E222 * _o3(b, b, b))
    v4 = lam * (
        (H2 - s * H22) * (np.einsum("j,kl->jkl", b - s * l, a) - _o3(l, l, b)) - s * H222 * _o3(l, b - s * l, b)
    )
    v5 = lam * (s * (3 * H2 - 3 * s * H22 - s * s * H222) * _o3(l, l, l) + H222 * _o3(b, b, b))
    return _cyc(v1) + _cyc(v2) + v3 + _cyc(v4) + v5


def landsberg_curvature(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_form", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    if route == "closed_form":
        c = _conformal_c(model, st.x)
        sp = _pack(phi, st, check)
        return -0.5 * c * sp.phi * v_tensor(sp, st)
    if route == "contraction":
        g = fundamental_tensor(model, phi, x, y, "oracle", check)
        bw = berwald_curvature(model, phi, x, y, "oracle", check)
        return _landsberg_from(g, bw, st.y)
    raise ValueError(f"unknown route {route!r}")


def _landsberg_from(g: np.ndarray, bw: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -0.5 * np.einsum("m,im,ijkl->jkl", y, g, bw)


# -- mean Landsberg ------------------------------------------------------------


def w_coefficient(sp: ScalarPack, n: int) -> float:
    """Scalar ``w`` with ``W_j = w (b_j - s l_j)``, summed term by term as displayed."""
    s, phi, phi2, lam, eta = sp.s, sp.phi, sp.phi2, sp.Lam, sp.eta
    dl = sp.b2 - s * s
    e0, h0 = sp.E - s * sp.E2, sp.H2 - s * sp.H22
    return (
        e0 * (n + 1) * phi2
        + 3 * sp.E22 * phi2 * dl
        - s * sp.E22 * (n + 1) * phi
        + sp.E222 * phi * dl
        + (h0 * (n + 1) + sp.H222 * dl) * lam
        + 3 * eta * e0 * phi2 * dl
        + 3 * eta * sp.E22 * phi2 * dl * dl
        - 3 * s * eta * sp.E22 * phi * dl
        + eta * sp.E222 * dl * dl * phi
        + eta * (3 * h0 * dl + sp.H222 * dl * dl) * lam
    )


def proof_contraction_terms(sp: ScalarPack, n: int) -> tuple[float, float]:
    """Scalar prefactors of ``(b_j - s l_j)`` in ``a^{kl} V_jkl`` and ``eta b^k b^l V_jkl``."""
    s, phi, phi2, lam, eta = sp.s, sp.phi, sp.phi2, sp.Lam, sp.eta
    dl = sp.b2 - s * s
    e0, h0 = sp.E - s * sp.E2, sp.H2 - s * sp.H22
    first = (
        e0 * (n + 1) * phi2
        + 3 * sp.E22 * phi2 * dl
        - s * sp.E22 * (n + 1) * phi
        + sp.E222 * phi * dl
        + (h0 * (n + 1) + sp.H222 * dl) * lam
    )
    second = (
        3 * eta * e0 * phi2 * dl
        + 3 * eta * sp.E22 * phi2 * dl**2
        - 3 * s * eta * sp.E22 * phi * dl
        + eta * sp.E222 * dl**2 * phi
        + eta * (3 * h0 * dl + sp.H222 * dl**2) * lam
    )
    return first, second


@dataclass(frozen=True)
class Regrouping:
    groups: tuple[float, float, float, float]
    total: float
    direct: float
    factor_main: float  # 1 + n + 3(b^2-s^2) eta
    factor_h: float  # (b^2-s^2)[1 + (b^2-s^2) eta]
    factor_e22: float  # 3(b^2-s^2)[1+(b^2-s^2)eta] phi_2 - [1+n+3(b^2-s^2)eta] s phi

    @property
    def residual(self) -> float:
        scale = max(abs(self.direct), sum(abs(g) for g in self.groups), TINY)
        return abs(self.total - self.direct) / scale


def w_regrouping(sp: ScalarPack, n: int) -> Regrouping:
    """The four-group form of ``w`` and the auxiliary factors it relies on."""
    s, phi, phi2, lam, eta = sp.s, sp.phi, sp.phi2, sp.Lam, sp.eta
    dl = sp.b2 - s * s
    main = 1 + n + 3 * dl * eta
    fh = dl * (1 + dl * eta)
    fe = 3 * fh * phi2 - main * s * phi
    g1 = main * ((sp.E - s * sp.E2) * phi2 + (sp.H2 - s * sp.H22) * lam)
    g2 = fh * lam * sp.H222
    g3 = fe * sp.E22
    g4 = fh * phi * sp.E222
    return Regrouping((g1, g2, g3, g4), g1 + g2 + g3 + g4, w_coefficient(sp, n), main, fh, fe)


def mean_landsberg(model: ManifoldModel, phi: PhiModel, x, y, route: str = "closed_form", check: bool = True) -> np.ndarray:
    st = point_state(model, x, y)
    if route == "closed_form":
        c = _conformal_c(model, st.x)
        sp = _pack(phi, st, check)
        return -c * sp.phi / (2 * sp.rho) * w_coefficient(sp, st.n) * (st.b_low - st.s * st.l_low)
    if route == "contraction":
        g = fundamental_tensor(model, phi, x, y, "oracle", check)
        lg = landsberg_curvature(model, phi, x, y, "contraction", check)
        return np.einsum("kl,jkl->j", _invert(g), lg)
    raise ValueError(f"unknown route {route!r}")


# -- discrepancy measure ---------------------------------------------------------


def _family_scale(sp: ScalarPack) -> float:
    vals = (sp.E, sp.s * sp.E2, sp.E22, sp.E222, sp.H, sp.H2, sp.H22, sp.H222)
    return max(abs(v) for v in vals)


def natural_scale(kind: str, sp: ScalarPack, st: PointState, c: float) -> float:
    """Magnitude of the building blocks of a curvature quantity at this point.

    Used as a floor in relative discrepancies so that quantities which vanish
    identically (Berwald families) are compared against the size of the terms
    that cancel, not against roundoff.
    """
    b = math.sqrt(st.b2)
    fam = _family_scale(sp) * (1 + b) ** 3
    blocks = abs(sp.phi) + abs(sp.phi2) * (1 + b) + abs(sp.Lam)
    if kind == "spray":
        return abs(c) * st.alpha**2 * (abs(sp.E) + abs(sp.H) * b)
    if kind == "berwald":
        return abs(c) / st.alpha * fam
    if kind == "landsberg":
        return 0.5 * abs(c) * abs(sp.phi) * fam * blocks
    if kind == "mean_landsberg":
        return 0.5 * abs(c) * abs(sp.phi) * fam * blocks * (st.n + abs(sp.eta) * st.b2) / abs(sp.rho)
    raise ValueError(f"unknown kind {kind!r}")


def discrepancy(a: np.ndarray, b: np.ndarray, scale: float = 0.0) -> float:
    """``max|a-b| / max(max|a|, max|b|, scale)``; zero when both vanish."""
    diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0
    if diff == 0.0:
        return 0.0
    den = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), scale, TINY)
    return diff / den


# -- full report -------------------------------------------------------------------


@dataclass
class CurvatureReport:
    x: np.ndarray
    y: np.ndarray
    b2: float
    s: float
    c: float
    g: dict[str, np.ndarray] = field(default_factory=dict)
    g_inv: dict[str, np.ndarray] = field(default_factory=dict)
    det: dict[str, float] = field(default_factory=dict)
    spray: dict[str, np.ndarray] = field(default_factory=dict)
    berwald: dict[str, np.ndarray] = field(default_factory=dict)
    landsberg: dict[str, np.ndarray] = field(default_factory=dict)
    mean_landsberg: dict[str, np.ndarray] = field(default_factory=dict)
    discrepancies: dict[str, float] = field(default_factory=dict)
    identities: dict[str, float] = field(default_factory=dict)
    positive_definite: bool = True

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies.values(), default=0.0)


def curvature_report(model: ManifoldModel, phi: PhiModel, x, y, check: bool = True) -> CurvatureReport:
    """All routes at one point, with per-quantity discrepancies and contraction identities."""
    st = point_state(model, x, y)
    sp = _pack(phi, st, check)
    c = _conformal_c(model, st.x)
    rep = CurvatureReport(st.x, st.y, st.b2, st.s, c)

    g_cf = fundamental_tensor(model, phi, x, y, "closed_form", check)
    g_or = fundamental_tensor(model, phi, x, y, "oracle", check)
    rep.g = {"closed_form": g_cf, "oracle": g_or}
    rep.positive_definite = bool(np.linalg.eigvalsh(g_or).min() > 0)
    gi_cf = inverse_fundamental_tensor(model, phi, x, y, "closed_form", check)
    gi_mi = _invert(g_or)
    rep.g_inv = {"closed_form": gi_cf, "matrix_inverse": gi_mi}
    rep.det = {"closed_form": det_formula(model, phi, x, y, check), "oracle": float(np.linalg.det(g_or))}

    rep.spray = {r: spray(model, phi, x, y, r, check) for r in ("oracle", "general", "closed_conformal")}
    b_cf = c / st.alpha * u_tensor(sp, st)
    b_or = symmetric_derivative_tensor(_spray_function(model, sp, st, c), st.y, 3, st.n)
    rep.berwald = {"closed_form": b_cf, "oracle": b_or}
    l_cf = -0.5 * c * sp.phi * v_tensor(sp, st)
    l_ct = _landsberg_from(g_or, b_or, st.y)
    rep.landsberg = {"closed_form": l_cf, "contraction": l_ct}
    j_cf = -c * sp.phi / (2 * sp.rho) * w_coefficient(sp, st.n) * (st.b_low - st.s * st.l_low)
    j_ct = np.einsum("kl,jkl->j", gi_mi, l_ct)
    rep.mean_landsberg = {"closed_form": j_cf, "contraction": j_ct}

    d = rep.discrepancies
    d["g"] = discrepancy(g_cf, g_or)
    d["det"] = discrepancy(rep.det["closed_form"], rep.det["oracle"])
    d["g_inv"] = discrepancy(gi_cf, gi_mi)
    sscale = natural_scale("spray", sp, st, c)
    d["spray_oracle_vs_general"] = discrepancy(rep.spray["oracle"], rep.spray["general"], sscale)
    d["spray_general_vs_closed_conformal"] = discrepancy(rep.spray["general"], rep.spray["closed_conformal"], sscale)
    d["spray_oracle_vs_closed_conformal"] = discrepancy(rep.spray["oracle"], rep.spray["closed_conformal"], sscale)
    d["berwald"] = discrepancy(b_cf, b_or, natural_scale("berwald", sp, st, c))
    d["landsberg"] = discrepancy(l_cf, l_ct, natural_scale("landsberg", sp, st, c))
    d["mean_landsberg"] = discrepancy(j_cf, j_ct, natural_scale("mean_landsberg", sp, st, c))

    ids = rep.identities
    ids["inverse"] = float(np.max(np.abs(gi_cf @ g_cf - np.eye(st.n))))
    f2 = st.alpha**2 * sp.phi**2
    ids["g_yy"] = abs(float(st.y @ g_or @ st.y) - f2) / f2
    lscale = max(float(np.max(np.abs(l_cf))), natural_scale("landsberg", sp, st, c), TINY)
    ids["L_y"] = float(np.max(np.abs(np.einsum("jkl,k->jl", l_cf, st.y)))) / (lscale * st.alpha)
    jscale = max(float(np.max(np.abs(j_cf))), natural_scale("mean_landsberg", sp, st, c), TINY)
    ids["J_y"] = abs(float(j_cf @ st.y)) / (jscale * st.alpha)
    return rep


# -- sampling --------------------------------------------------------------------


def sample_point(model: ManifoldModel, phi: PhiModel, rng, box: float = 2.0, max_tries: int = 1000):
    """A random admissible ``(x, y)``: ``b^2`` and ``s/b`` uniform over the model's working ranges."""
    dom = phi.domain
    n = model.n
    for _ in range(max_tries):
        if model.kind == "euclidean_conformal" and model.c0 != 0.0:
            b2 = rng.uniform(*dom.b2_range)
            w = np.array([rng.normal() for _ in range(n)])
            w /= np.linalg.norm(w)
            x = (math.sqrt(b2) * w - np.array(model.d)) / model.c0
        else:
            x = np.array([rng.uniform(-box, box) for _ in range(n)])
        try:
            model.check_point(x)
        except GeometryError:
            continue
        b2 = float(model.b_squared(list(x)))
        if model.kind != "euclidean_conformal" or model.c0 != 0.0:
            lo, hi = dom.b2_range
            if not lo <= b2 <= hi:
                continue
        frac = rng.uniform(*dom.s_range)
        s = frac * math.sqrt(b2)
        if not dom.contains(b2, s):
            continue
        rvec = [rng.normal() for _ in range(n)]
        try:
            y = direction_with_s(model, x, s, rvec, rng.uniform(0.5, 2.0))
        except GeometryError:
            continue
        return x, y
    raise GeometryError("could not draw an admissible sample point")


def sample_points(model: ManifoldModel, phi: PhiModel, count: int, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    return [sample_point(model, phi, rng) for _ in range(count)]
