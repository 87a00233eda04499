"""Finite differences for ``L u = -(a u')' + b u' + c u`` on an interval.

Homogeneous Dirichlet conditions are built in: only the ``N`` interior
nodes carry unknowns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "SpatialGrid",
    "Coefficient",
    "coefficient",
    "COEFFICIENT_KINDS",
    "EllipticCoefficients",
    "CoefficientWarning",
    "TridiagonalMatrix",
    "assemble_operator",
    "apply_operator",
]


class CoefficientWarning(UserWarning):
    """Neither ``c >= 0`` nor ``c - b'/2 >= 0`` holds on the grid."""


@dataclass(frozen=True)
class SpatialGrid:
    N: int
    xl: float = 0.0
    xr: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        if not (math.isfinite(self.xl) and math.isfinite(self.xr)) or not self.xr > self.xl:
            raise DomainError(f"need finite xl < xr, got ({self.xl}, {self.xr})")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return (self.xr - self.xl) / (self.N + 1)

    @property
    def length(self) -> float:
        return self.xr - self.xl

    @property
    def x(self) -> np.ndarray:
        """Interior nodes."""
        return self.xl + self.h * np.arange(1, self.N + 1)

    @property
    def midpoints(self) -> np.ndarray:
        """``x_{i+1/2}`` for ``i = 0..N``."""
        return self.xl + self.h * (np.arange(self.N + 1) + 0.5)


COEFFICIENT_KINDS = {
    "constant": ("value",),
    "linear": ("intercept", "slope"),
    "sine": ("offset", "amplitude", "frequency"),
    "polynomial": ("coefficients",),
}


@dataclass(frozen=True)
class Coefficient:
    """A named coefficient function with its derivative.

    ``constant``: ``value``; ``linear``: ``intercept + slope x``;
    ``sine``: ``offset + amplitude sin(pi frequency x)``;
    ``polynomial``: ascending ``coefficients``.
    """

    kind: str
    params: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise DomainError(f"unknown coefficient kind {self.kind!r}")
        names = COEFFICIENT_KINDS[self.kind]
        if self.kind == "polynomial":
            coeffs = tuple(float(v) for v in self.params)
            if not coeffs:
                raise DomainError("polynomial needs at least one coefficient")
            object.__setattr__(self, "params", coeffs)
        elif len(self.params) != len(names):
            raise DomainError(f"{self.kind} takes parameters {names}")
        else:
            object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if not all(math.isfinite(v) for v in self.params):
            raise DomainError("coefficient parameters must be finite")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p[0])
        if self.kind == "linear":
            return p[0] + p[1] * x
        if self.kind == "sine":
            return p[0] + p[1] * np.sin(math.pi * p[2] * x)
        return np.polynomial.polynomial.polyval(x, p)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, p[1])
        if self.kind == "sine":
            return p[1] * math.pi * p[2] * np.cos(math.pi * p[2] * x)
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(p))

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            return {"type": "polynomial", "coefficients": list(self.params)}
        return {"type": self.kind, **dict(zip(COEFFICIENT_KINDS[self.kind], self.params))}


def coefficient(spec) -> Coefficient:
    """Build a :class:`Coefficient` from a number, a ``Coefficient`` or a dict.

    >>> coefficient({"type": "linear", "intercept": 1, "slope": 1})(0.5)
    array(1.5)
    """
    if isinstance(spec, Coefficient):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Coefficient("constant", (float(spec),))
    if not isinstance(spec, dict) or "type" not in spec:
        raise DomainError(f"cannot interpret coefficient {spec!r}")
    kind = spec["type"]
    if kind not in COEFFICIENT_KINDS:
        raise DomainError(f"unknown coefficient kind {kind!r}")
    names = COEFFICIENT_KINDS[kind]
    extra = set(spec) - set(names) - {"type"}
    if extra:
        raise DomainError(f"unexpected fields for {kind}: {sorted(extra)}")
    if kind == "polynomial":
        return Coefficient(kind, tuple(spec.get("coefficients", ())))
    defaults = {"offset": 0.0, "intercept": 0.0, "frequency": 1.0}
    try:
        params = tuple(spec[n] if n in spec else defaults[n] for n in names)
    except KeyError as exc:
        raise DomainError(f"{kind} coefficient is missing {exc.args[0]!r}") from None
    return Coefficient(kind, params)


@dataclass(frozen=True)
class EllipticCoefficients:
    a: Coefficient = Coefficient("constant", (1.0,))
    b: Coefficient = Coefficient("constant", (0.0,))
    c: Coefficient = Coefficient("constant", (0.0,))

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, coefficient(getattr(self, name)))

    def validate(self, grid: SpatialGrid) -> None:
        """Raise if ``a`` is not positive; warn if the reaction sign test fails."""
        a_mid = self.a(grid.midpoints)
        a_nodes = self.a(grid.x)
        if not (np.all(a_mid > 0.0) and np.all(a_nodes > 0.0)):
            raise DomainError("diffusion coefficient a must be positive on the grid")
        x = grid.x
        c = self.c(x)
        if not (np.all(c >= 0.0) or np.all(c - 0.5 * self.b.derivative(x) >= 0.0)):
            warnings.warn(
                "neither c >= 0 nor c - b'/2 >= 0 holds at the grid nodes",
                CoefficientWarning,
                stacklevel=2,
            )


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise DomainError("off-diagonals must have length N - 1")
        for name in ("sub", "diag", "sup"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub, self.sup))

    def matvec(self, u) -> np.ndarray:
        """``L u`` for a vector or for the rows of a 2-D array of shape ``(..., N)``."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n:
            raise DomainError(f"vector length {u.shape[-1]} does not match N = {self.n}")
        out = self.diag * u
        out[..., 1:] += self.sub * u[..., :-1]
        out[..., :-1] += self.sup * u[..., 1:]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def assemble_operator(grid: SpatialGrid, coeff: EllipticCoefficients) -> TridiagonalMatrix:
    """Conservative central-difference matrix of ``L``.

    Row ``i`` is ``-[a_{i+1/2}(u_{i+1}-u_i) - a_{i-1/2}(u_i-u_{i-1})]/h^2
    + b_i (u_{i+1}-u_{i-1})/(2h) + c_i u_i`` with zero boundary values.
    """
    coeff.validate(grid)
    h = grid.h
    a = coeff.a(grid.midpoints)
    x = grid.x
    b = coeff.b(x)
    c = coeff.c(x)
    diag = (a[:-1] + a[1:]) / h**2 + c
    sub = -a[1:-1] / h**2 - b[1:] / (2.0 * h)
    sup = -a[1:-1] / h**2 + b[:-1] / (2.0 * h)
    return TridiagonalMatrix(sub, diag, sup)


def apply_operator(Lh: TridiagonalMatrix, u) -> np.ndarray:
    """Matrix-vector product ``Lh u``."""
    return Lh.matvec(u)
