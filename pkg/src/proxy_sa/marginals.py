"""One-dimensional input distributions and the Poincaré weight F(1-F)/rho^2.

Inputs are independent, so an input space is just an ordered tuple of
marginals. Only the uniform family is built in; any other continuous law with
a positive density can be registered through :meth:`Marginal.custom` or
:meth:`Marginal.from_scipy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SingularityError, ValidationError

# Points whose CDF (or survival) value is this close to 0 are treated as
# sitting on the support boundary.
BOUNDARY_TOL = 1e-12

# Size of the quantile grid used to check user-supplied marginals.
REGISTRATION_GRID = 1000


def _as_output(x, values):
    if np.ndim(x) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class Marginal:
    """A continuous distribution on an open interval ``(lo, hi)``.

    Use :func:`uniform`, :meth:`custom` or :meth:`from_scipy` rather than the
    raw constructor.

    Attributes
    ----------
    kind : str
        ``"uniform"`` or ``"custom"``.
    lo, hi : float
        Support endpoints; either may be infinite for custom kinds.
    scale : float
        Length scale used for finite-difference steps. Support width for
        bounded supports.
    c_optimal : float or None
        Optimal (unweighted) Poincaré constant when known.
    """

    kind: str
    lo: float
    hi: float
    scale: float
    c_optimal: Optional[float] = None
    name: str = ""
    _cdf: Optional[Callable] = field(default=None, repr=False, compare=False)
    _sf: Optional[Callable] = field(default=None, repr=False, compare=False)
    _pdf: Optional[Callable] = field(default=None, repr=False, compare=False)
    _ppf: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"support must satisfy lo < hi, got ({self.lo}, {self.hi})")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError(f"scale must be positive and finite, got {self.scale}")

    # -- constructors ----------------------------------------------------

    @classmethod
    def custom(
        cls,
        cdf: Callable,
        pdf: Callable,
        quantile: Callable,
        lo: float = -math.inf,
        hi: float = math.inf,
        *,
        sf: Optional[Callable] = None,
        scale: Optional[float] = None,
        c_optimal: Optional[float] = None,
        name: str = "custom",
        check: bool = True,
    ) -> "Marginal":
        """Register a user-defined marginal from vectorised callables.

        ``sf`` (survival function, 1 - cdf) is optional but improves accuracy
        of the weight in the upper tail. ``scale`` defaults to the support
        width when finite, else to the interquartile range.

        The invariants (positive density, monotone CDF, quantile inverting
        the CDF) are checked on a 10^3-point quantile grid unless
        ``check=False``.
        """
        lo, hi = float(lo), float(hi)
        if scale is None:
            if math.isfinite(lo) and math.isfinite(hi):
                scale = hi - lo
            else:
                scale = float(quantile(0.75) - quantile(0.25))
        m = cls(
            kind="custom",
            lo=lo,
            hi=hi,
            scale=float(scale),
            c_optimal=c_optimal,
            name=name,
            _cdf=cdf,
            _sf=sf,
            _pdf=pdf,
            _ppf=quantile,
        )
        if check:
            m.check_invariants()
        return m

    @classmethod
    def from_scipy(cls, dist, *, c_optimal: Optional[float] = None, name: str = "") -> "Marginal":
        """Wrap a frozen ``scipy.stats`` continuous distribution."""
        lo, hi = (float(v) for v in dist.support())
        return cls.custom(
            dist.cdf,
            dist.pdf,
            dist.ppf,
            lo,
            hi,
            sf=dist.sf,
            c_optimal=c_optimal,
            name=name or getattr(dist.dist, "name", "scipy"),
        )

    # -- distribution functions -----------------------------------------

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def cdf(self, x):
        """F(x), clamped to 0 below and 1 above the support."""
        xa = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.clip((xa - self.lo) / self.width, 0.0, 1.0)
        else:
            out = np.asarray(self._cdf(xa), dtype=float)
            out = np.where(xa <= self.lo, 0.0, np.where(xa >= self.hi, 1.0, out))
        return _as_output(x, out)

    def sf(self, x):
        """Survival function 1 - F(x)."""
        xa = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            out = np.clip((self.hi - xa) / self.width, 0.0, 1.0)
        elif self._sf is not None:
            out = np.asarray(self._sf(xa), dtype=float)
            out = np.where(xa <= self.lo, 1.0, np.where(xa >= self.hi, 0.0, out))
        else:
            out = 1.0 - np.asarray(self.cdf(xa), dtype=float)
        return _as_output(x, out)

    def pdf(self, x):
        """Density; zero outside the open support."""
        xa = np.asarray(x, dtype=float)
        inside = (xa > self.lo) & (xa < self.hi)
        if self.kind == "uniform":
            out = np.where(inside, 1.0 / self.width, 0.0)
        else:
            with np.errstate(all="ignore"):
                out = np.where(inside, np.asarray(self._pdf(xa), dtype=float), 0.0)
        return _as_output(x, out)

    def quantile(self, p):
        """Inverse CDF for ``0 < p < 1``."""
        pa = np.asarray(p, dtype=float)
        if np.any(~((pa > 0.0) & (pa < 1.0))):
            raise DomainError(f"quantile needs 0 < p < 1, got {p!r}")
        if self.kind == "uniform":
            out = self.lo + pa * self.width
        else:
            out = np.asarray(self._ppf(pa), dtype=float)
        return _as_output(p, out)

    def poincare_weight(self, x):
        """The weight F(x)(1 - F(x)) / rho(x)^2.

        Raises
        ------
        SingularityError
            If a point is outside the support, within ``BOUNDARY_TOL`` of it
            (in probability), or where the density vanishes.
        """
        xa = np.asarray(x, dtype=float)
        F, S, rho = self._checked_parts(xa)
        return _as_output(x, F * S / (rho * rho))

    def log_poincare_weight(self, x):
        """``log`` of :meth:`poincare_weight`, same error contract."""
        xa = np.asarray(x, dtype=float)
        F, S, rho = self._checked_parts(xa)
        return _as_output(x, np.log(F) + np.log(S) - 2.0 * np.log(rho))

    def weight_defined(self, x) -> np.ndarray:
        """Mask of points where :meth:`poincare_weight` is defined."""
        xa = np.asarray(x, dtype=float)
        return self._parts(xa)[3]

    def _parts(self, xa):
        F = np.asarray(self.cdf(xa), dtype=float)
        S = np.asarray(self.sf(xa), dtype=float)
        rho = np.asarray(self.pdf(xa), dtype=float)
        ok = (F > BOUNDARY_TOL) & (S > BOUNDARY_TOL) & (rho > 0.0) & np.isfinite(rho)
        return F, S, rho, ok

    def _checked_parts(self, xa):
        F, S, rho, ok = self._parts(xa)
        bad = ~ok
        if np.any(bad):
            first = np.flatnonzero(np.atleast_1d(bad))[0]
            value = float(np.atleast_1d(xa)[first])
            raise SingularityError(
                f"Poincaré weight undefined at x={value!r} (position {first}): "
                f"on or too close to the boundary of ({self.lo}, {self.hi})"
            )
        return F, S, rho

    # -- checks and serialisation ---------------------------------------

    def check_invariants(self, n: int = REGISTRATION_GRID) -> None:
        """Validate density positivity, CDF monotonicity and quantile round trip."""
        p = np.arange(1, n + 1) / (n + 1)
        x = np.asarray(self.quantile(p), dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.name}: quantile returned non-finite values")
        if np.any((x <= self.lo) | (x >= self.hi)):
            raise ValidationError(f"{self.name}: quantile left the support")
        if np.any(np.diff(x) <= 0):
            raise ValidationError(f"{self.name}: quantile is not increasing")
        if np.any(np.asarray(self.pdf(x)) <= 0):
            raise ValidationError(f"{self.name}: density must be positive inside the support")
        F = np.asarray(self.cdf(x))
        if np.any(np.diff(F) < 0):
            raise ValidationError(f"{self.name}: cdf is not nondecreasing")
        back = np.asarray(self.quantile(F))
        if not np.allclose(back, x, rtol=1e-12, atol=1e-12 * self.scale):
            worst = float(np.max(np.abs(back - x)))
            raise ValidationError(f"{self.name}: quantile(cdf(x)) != x (max error {worst:.3g})")
        edges = np.asarray(self.cdf(np.array([self.lo, self.hi])))
        if edges[0] != 0.0 or edges[1] != 1.0:
            raise ValidationError(f"{self.name}: cdf must be 0 at lo and 1 at hi")

    def to_dict(self) -> dict:
        if self.kind != "uniform":
            raise ValidationError("only uniform marginals can be serialised")
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, spec: dict) -> "Marginal":
        kind = spec.get("kind")
        if kind != "uniform":
            raise ValidationError(f"unsupported marginal kind in configuration: {kind!r}")
        try:
            return uniform(float(spec["lo"]), float(spec["hi"]))
        except KeyError as exc:
            raise ValidationError(f"uniform marginal needs 'lo' and 'hi': {spec!r}") from exc


def uniform(lo: float = 0.0, hi: float = 1.0) -> Marginal:
    """Uniform distribution on ``(lo, hi)``; both ends must be finite."""
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError("uniform support must be finite")
    return Marginal(kind="uniform", lo=lo, hi=hi, scale=hi - lo,
                    c_optimal=((hi - lo) / math.pi) ** 2, name="uniform")


@dataclass(frozen=True)
class InputSpace:
    """Product of independent marginals, one per input."""

    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if len(self.marginals) < 1:
            raise ValidationError("an input space needs at least one marginal")
        for m in self.marginals:
            if not isinstance(m, Marginal):
                raise ValidationError(f"expected Marginal, got {type(m).__name__}")

    @classmethod
    def uniform(cls, lo: float, hi: float, d: int) -> "InputSpace":
        return cls(tuple(uniform(lo, hi) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.marginals)

    def __len__(self):
        return self.d

    def __getitem__(self, j):
        return self.marginals[j]

    @property
    def lower(self) -> np.ndarray:
        return np.array([m.lo for m in self.marginals])

    @property
    def upper(self) -> np.ndarray:
        return np.array([m.hi for m in self.marginals])

    def cdf(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.column_stack([m.cdf(X[:, j]) for j, m in enumerate(self.marginals)])

    def quantile(self, P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(P)
        return np.column_stack([m.quantile(P[:, j]) for j, m in enumerate(self.marginals)])

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Row mask of points inside the closed support."""
        X = np.atleast_2d(X)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def to_list(self) -> list:
        return [m.to_dict() for m in self.marginals]

    @classmethod
    def from_list(cls, specs: Sequence[dict]) -> "InputSpace":
        return cls(tuple(Marginal.from_dict(s) for s in specs))
