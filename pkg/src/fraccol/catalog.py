"""Named sources, initial conditions and exact solutions.

Problems are configured declaratively, so every function that enters a
solve comes from this catalog.  Manufactured sources carry the exact
solution they were built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .spatial import Coefficient, EllipticCoefficients, SpatialGrid, TridiagonalMatrix, coefficient
from .specfun import gamma

__all__ = [
    "TimeProfile",
    "SeparableExact",
    "Source",
    "InitialCondition",
    "ScalarSource",
    "source_from_spec",
    "initial_from_spec",
    "exact_from_spec",
    "time_profile",
]


def _power_caputo_factor(p: float, alpha: float) -> float:
    # D^α t^p = Γ(p+1)/Γ(p+1-α) t^(p-α); constants have zero derivative
    if p == 0.0:
        return 0.0
    if alpha == 1.0:
        return p
    return gamma(p + 1.0) / gamma(p + 1.0 - alpha)


@dataclass(frozen=True)
class TimeProfile:
    """``g(t) = Σ coef · t^power`` with ``power = 0`` or ``power >= 1``."""

    terms: tuple = ((1.0, 1.0),)

    def __post_init__(self):
        terms = tuple((float(c), float(p)) for c, p in self.terms)
        for c, p in terms:
            if not (math.isfinite(c) and math.isfinite(p)):
                raise DomainError("time profile terms must be finite")
            if p != 0.0 and p < 1.0:
                raise DomainError(f"powers must be 0 or >= 1, got {p}")
        object.__setattr__(self, "terms", terms)

    def value(self, t: float) -> float:
        return math.fsum(c * t**p for c, p in self.terms)

    def caputo(self, t: float, alpha: float) -> float:
        return math.fsum(c * _power_caputo_factor(p, alpha) * t ** (p - alpha) for c, p in self.terms if p != 0.0)

    def to_dict(self) -> list:
        return [list(term) for term in self.terms]


def time_profile(spec) -> TimeProfile:
    if isinstance(spec, TimeProfile):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return TimeProfile(((float(spec), 0.0),))
    try:
        return TimeProfile(tuple(tuple(term) for term in spec))
    except (TypeError, ValueError):
        raise DomainError(f"cannot interpret time profile {spec!r}") from None


@dataclass(frozen=True)
class SeparableExact:
    """``u(x, t) = sin(k π (x - xl) / L) · g(t)``, zero on the boundary."""

    profile: TimeProfile = TimeProfile()
    wavenumber: int = 1

    def __post_init__(self):
        if int(self.wavenumber) != self.wavenumber or self.wavenumber < 1:
            raise DomainError("wavenumber must be a positive integer")

    def _arg(self, grid):
        return self.wavenumber * math.pi / grid.length

    def shape(self, grid: SpatialGrid) -> np.ndarray:
        return np.sin(self._arg(grid) * (grid.x - grid.xl))

    def value(self, grid: SpatialGrid, t: float) -> np.ndarray:
        return self.shape(grid) * self.profile.value(t)

    def caputo(self, grid: SpatialGrid, t: float, alpha: float) -> np.ndarray:
        return self.shape(grid) * self.profile.caputo(t, alpha)

    def continuous_operator_shape(self, grid: SpatialGrid, coeff: EllipticCoefficients) -> np.ndarray:
        """``L`` applied to the spatial shape, at the interior nodes."""
        x = grid.x
        w = self._arg(grid)
        s = np.sin(w * (x - grid.xl))
        ds = w * np.cos(w * (x - grid.xl))
        d2s = -(w**2) * s
        return -coeff.a(x) * d2s - coeff.a.derivative(x) * ds + coeff.b(x) * ds + coeff.c(x) * s

    def to_dict(self) -> dict:
        return {"type": "separable", "wavenumber": self.wavenumber, "time": self.profile.to_dict()}


def exact_from_spec(spec) -> SeparableExact:
    if isinstance(spec, SeparableExact):
        return spec
    if not isinstance(spec, dict) or spec.get("type", "separable") != "separable":
        raise DomainError(f"unknown exact solution {spec!r}")
    return SeparableExact(time_profile(spec.get("time", [[1.0, 1.0]])), int(spec.get("wavenumber", 1)))


@dataclass(frozen=True)
class Source:
    """Right-hand side ``f(x, t)`` of the linear problem.

    ``zero``; ``constant`` (``value``); ``separable`` (``sin(kπ(x-xl)/L) g(t)``);
    ``manufactured`` from an exact solution, with the spatial operator taken
    either as the assembled matrix (``discrete``) or analytically
    (``continuous``).
    """

    kind: str = "zero"
    value: float = 0.0
    exact: SeparableExact | None = None
    profile: TimeProfile | None = None
    wavenumber: int = 1
    operator: str = "discrete"

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "separable", "manufactured"):
            raise DomainError(f"unknown source kind {self.kind!r}")
        if self.kind == "manufactured" and self.exact is None:
            raise DomainError("a manufactured source needs an exact solution")
        if self.operator not in ("discrete", "continuous"):
            raise DomainError("operator must be 'discrete' or 'continuous'")

    def __call__(self, t: float, alpha: float, grid: SpatialGrid, coeff: EllipticCoefficients, Lh: TridiagonalMatrix):
        if self.kind == "zero":
            return np.zeros(grid.N)
        if self.kind == "constant":
            return np.full(grid.N, float(self.value))
        if self.kind == "separable":
            return SeparableExact(self.profile, self.wavenumber).value(grid, t)
        ex = self.exact
        if self.operator == "discrete":
            Lu = Lh.matvec(ex.shape(grid)) * ex.profile.value(t)
        else:
            Lu = ex.continuous_operator_shape(grid, coeff) * ex.profile.value(t)
        return ex.caputo(grid, t, alpha) + Lu

    def to_dict(self) -> dict:
        if self.kind == "manufactured":
            return {"type": "manufactured", "exact": self.exact.to_dict(), "operator": self.operator}
        if self.kind == "separable":
            return {"type": "separable", "wavenumber": self.wavenumber, "time": self.profile.to_dict()}
        if self.kind == "constant":
            return {"type": "constant", "value": self.value}
        return {"type": "zero"}


def source_from_spec(spec) -> Source:
    if isinstance(spec, Source):
        return spec
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError(f"cannot interpret source {spec!r}")
    kind = spec["type"]
    if kind == "zero":
        return Source()
    if kind == "constant":
        return Source("constant", value=float(spec["value"]))
    if kind == "separable":
        return Source("separable", profile=time_profile(spec["time"]), wavenumber=int(spec.get("wavenumber", 1)))
    if kind == "manufactured":
        return Source("manufactured", exact=exact_from_spec(spec["exact"]), operator=spec.get("operator", "discrete"))
    raise DomainError(f"unknown source kind {kind!r}")


@dataclass(frozen=True)
class InitialCondition:
    """``zero``, ``sine`` (``amplitude · sin(kπ(x-xl)/L)``) or the exact solution at 0."""

    kind: str = "zero"
    amplitude: float = 1.0
    wavenumber: int = 1
    exact: SeparableExact | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "sine", "exact"):
            raise DomainError(f"unknown initial condition {self.kind!r}")
        if self.kind == "exact" and self.exact is None:
            raise DomainError("initial kind 'exact' needs an exact solution")

    def __call__(self, grid: SpatialGrid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.N)
        if self.kind == "sine":
            return self.amplitude * SeparableExact(TimeProfile(((1.0, 0.0),)), self.wavenumber).shape(grid)
        return self.exact.value(grid, 0.0)


def initial_from_spec(spec, exact: SeparableExact | None = None) -> InitialCondition:
    if isinstance(spec, InitialCondition):
        return spec
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError(f"cannot interpret initial condition {spec!r}")
    kind = spec["type"]
    if kind == "sine":
        return InitialCondition("sine", float(spec.get("amplitude", 1.0)), int(spec.get("wavenumber", 1)))
    if kind == "exact":
        if exact is None:
            raise DomainError("initial kind 'exact' needs a manufactured source")
        return InitialCondition("exact", exact=exact)
    return InitialCondition(kind)


@dataclass(frozen=True)
class ScalarSource:
    """Source ``f(t)`` for the fractional ODE ``D^α u + ĉ(t) u = f``.

    Either explicit power terms, or manufactured from an exact
    ``u(t) = Σ coef t^power`` with the reaction ``ĉ``.
    """

    profile: TimeProfile = field(default_factory=lambda: TimeProfile(()))
    exact: TimeProfile | None = None

    def __call__(self, t: float, alpha: float, c: Coefficient) -> float:
        if self.exact is None:
            return self.profile.value(t)
        return self.exact.caputo(t, alpha) + float(c(t)) * self.exact.value(t)

    @classmethod
    def manufactured(cls, exact) -> "ScalarSource":
        return cls(exact=time_profile(exact))

    @classmethod
    def terms(cls, terms) -> "ScalarSource":
        return cls(profile=time_profile(terms))


def reaction(spec) -> Coefficient:
    """``ĉ(t)`` for fractional ODEs; same catalog as the spatial coefficients."""
    return coefficient(spec)
