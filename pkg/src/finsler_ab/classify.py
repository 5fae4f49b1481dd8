"""Condition residuals over (b^2, s) grids and metric-class verdicts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import w_regrouping
from .jets import JetError
from .phi import PhiDomainError, PhiModel, PositivityError, SingularScalarError, scalar_pack
from .quadrature import QuadratureError

log = logging.getLogger(__name__)

HOLDS, FAILS, INDETERMINATE = "holds", "fails", "indeterminate"
RESIDUAL_NAMES = ("E22", "H222", "combined", "E_minus_sE2", "H2_minus_sH22")
WEAK_SET = ("E22", "H222", "combined")
BERWALD_SET = ("E_minus_sE2", "H2_minus_sH22")
INDETERMINATE_FRACTION = 0.10
FACTOR_FLOOR = 1e-12
CELL_ERRORS = (SingularScalarError, PhiDomainError, PositivityError, QuadratureError, JetError, ZeroDivisionError, OverflowError)


@dataclass(frozen=True)
class GridSpec:
    """Grid over ``b^2`` and ``s/b``; ``None`` ranges fall back to the model's domain."""

    nb: int = 40
    ns: int = 40
    b2_range: tuple[float, float] | None = None
    s_range: tuple[float, float] | None = None

    def cells(self, phi: PhiModel) -> list[tuple[float, float]]:
        lo, hi = self.b2_range or phi.domain.b2_range
        slo, shi = self.s_range or phi.domain.s_range
        if self.nb < 1 or self.ns < 1:
            raise ValueError("grid resolution must be positive")
        out = []
        for i in range(self.nb):
            b2 = lo + (hi - lo) * (i + 0.5) / self.nb
            for j in range(self.ns):
                frac = slo + (shi - slo) * (j + 0.5) / self.ns
                out.append((b2, frac * math.sqrt(b2)))
        return out


@dataclass
class ConditionGrid:
    b2: np.ndarray
    s: np.ndarray
    residuals: dict[str, np.ndarray]
    convex_d1: np.ndarray
    convex_d2: np.ndarray
    valid: np.ndarray
    scale: float
    errors: list[str] = field(default_factory=list)

    @property
    def indeterminate_fraction(self) -> float:
        return float(1.0 - self.valid.mean()) if self.valid.size else 1.0

    def max_residual(self, name: str, normalized: bool = False) -> float:
        r = self.residuals[name][self.valid]
        if r.size == 0:
            return float("nan")
        m = float(r.max())
        return m / self.scale if normalized else m


def condition_residuals(phi: PhiModel, grid: GridSpec | None = None) -> ConditionGrid:
    """The five condition residuals at each grid cell; failing cells are marked invalid."""
    grid = grid or GridSpec()
    cells = grid.cells(phi)
    m = len(cells)
    res = {k: np.full(m, np.nan) for k in RESIDUAL_NAMES}
    d1 = np.zeros(m, dtype=bool)
    d2 = np.zeros(m, dtype=bool)
    valid = np.zeros(m, dtype=bool)
    errors = []
    scale = 1.0
    for idx, (b2, s) in enumerate(cells):
        try:
            sp = scalar_pack(phi, b2, s)
        except CELL_ERRORS as exc:
            errors.append(f"b2={b2:.6g} s={s:.6g}: {exc}")
            continue
        valid[idx] = True
        d1[idx] = sp.D1 > 0
        d2[idx] = sp.D2 > 0
        res["E22"][idx] = abs(sp.E22)
        res["H222"][idx] = abs(sp.H222)
        res["combined"][idx] = abs((sp.E - s * sp.E2) * sp.phi2 + (sp.H2 - s * sp.H22) * sp.Lam)
        res["E_minus_sE2"][idx] = abs(sp.E - s * sp.E2)
        res["H2_minus_sH22"][idx] = abs(sp.H2 - s * sp.H22)
        scale = max(scale, abs(sp.E), abs(sp.H))
    if errors:
        log.info("%d of %d cells indeterminate for %s", len(errors), m, phi.name)
    b2s = np.array([c[0] for c in cells])
    ss = np.array([c[1] for c in cells])
    return ConditionGrid(b2s, ss, res, d1, d2, valid, scale, errors)


@dataclass
class Classification:
    model: str
    is_berwald: str
    is_landsberg: str
    is_weak_landsberg: str
    max_residuals: dict[str, float]
    normalization: float
    convexity: dict[str, float]
    indeterminate_fraction: float
    tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def verdicts(self) -> dict[str, str]:
        return {"berwald": self.is_berwald, "landsberg": self.is_landsberg, "weak_landsberg": self.is_weak_landsberg}

    def summary(self) -> str:
        return ", ".join(f"{k}: {v}" for k, v in self.verdicts.items())


def _verdict(grid: ConditionGrid, names, tol: float) -> str:
    if grid.indeterminate_fraction > INDETERMINATE_FRACTION:
        return INDETERMINATE
    worst = max(grid.max_residual(n, normalized=True) for n in names)
    return HOLDS if worst <= tol else FAILS


_STRENGTH = ("is_berwald", "is_landsberg", "is_weak_landsberg")


def _enforce_monotonicity(cls: Classification) -> None:
    # a stronger class holding while a weaker one does not is contradictory;
    # the stronger verdict is demoted rather than the weaker promoted
    for strong, weak in zip(_STRENGTH, _STRENGTH[1:]):
        if getattr(cls, strong) == HOLDS and getattr(cls, weak) != HOLDS:
            cls.notes.append(f"monotonicity: {strong} demoted because {weak} is {getattr(cls, weak)}")
            setattr(cls, strong, INDETERMINATE)


def classify_metric(
    phi: PhiModel, grid: GridSpec | None = None, tol: float = 1e-6, c0: float | None = None, cond: ConditionGrid | None = None
) -> Classification:
    """Berwald / Landsberg / weak-Landsberg verdicts from the condition residuals.

    ``c0 == 0`` (parallel one-form) makes every curvature vanish, so all three
    classes hold regardless of ``phi``; the residuals are still reported.
    """
    cond = cond or condition_residuals(phi, grid)
    maxima = {n: cond.max_residual(n) for n in RESIDUAL_NAMES}
    valid = cond.valid
    convexity = {
        "D1_positive_fraction": float(cond.convex_d1[valid].mean()) if valid.any() else float("nan"),
        "D2_positive_fraction": float(cond.convex_d2[valid].mean()) if valid.any() else float("nan"),
        "regularity": phi.regularity,
    }
    cls = Classification(
        phi.name,
        _verdict(cond, BERWALD_SET, tol),
        _verdict(cond, WEAK_SET, tol),
        _verdict(cond, WEAK_SET, tol),
        maxima,
        cond.scale,
        convexity,
        cond.indeterminate_fraction,
        tol,
    )
    if cond.indeterminate_fraction > INDETERMINATE_FRACTION:
        cls.notes.append(f"{cond.indeterminate_fraction:.1%} of cells indeterminate; first: {cond.errors[0]}")
    if c0 is not None and c0 == 0.0:
        cls.is_berwald = cls.is_landsberg = cls.is_weak_landsberg = HOLDS
        cls.notes.append("c0 = 0: parallel one-form, all curvatures vanish")
    _enforce_monotonicity(cls)
    return cls


@dataclass
class EquivalenceEntry:
    model: str
    classification: Classification
    verdicts_equal: bool
    max_regroup_residual: float
    min_abs_factor: dict[str, float]
    vanishing_cells: list[tuple[float, float, str]]


@dataclass
class EquivalenceReport:
    entries: list[EquivalenceEntry]
    n: int

    @property
    def all_equal(self) -> bool:
        return all(e.verdicts_equal for e in self.entries)


def theorem_equivalence_report(phis: list[PhiModel], grid: GridSpec | None = None, n: int = 3, tol: float = 1e-6) -> EquivalenceReport:
    """Verdict equality, the four-group regrouping of ``w`` and the auxiliary factors, per model."""
    if not phis:
        raise ValueError("need at least one model")
    grid = grid or GridSpec()
    entries = []
    for phi in phis:
        cond = condition_residuals(phi, grid)
        cls = classify_metric(phi, grid, tol, cond=cond)
        worst = 0.0
        mins = {"main": math.inf, "h": math.inf, "e22": math.inf}
        vanish = []
        for b2, s in grid.cells(phi):
            try:
                sp = scalar_pack(phi, b2, s)
            except CELL_ERRORS:
                continue
            rg = w_regrouping(sp, n)
            worst = max(worst, rg.residual)
            for key, val in (("main", rg.factor_main), ("h", rg.factor_h), ("e22", rg.factor_e22)):
                mins[key] = min(mins[key], abs(val))
                if abs(val) <= FACTOR_FLOOR:
                    vanish.append((b2, s, key))
        entries.append(
            EquivalenceEntry(phi.name, cls, cls.is_landsberg == cls.is_weak_landsberg, worst, mins, vanish)
        )
    return EquivalenceReport(entries, n)
