"""Finite-difference cross-partials and per-sample derivative stacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import subsets as _subsets
from .errors import CapabilityError, DomainError, ShapeError, ValidationError
from .models import ModelSpec
from .sampling import SampleMatrix

MAX_FD_ORDER = 3

_POLICIES = ("shrink", "clip")
_MODES = ("auto", "analytic", "fd")


@dataclass(frozen=True)
class FDScheme:
    """Finite-difference settings.

    Attributes
    ----------
    rel_step : float
        Step as a fraction of each marginal's length scale (the support
        width for bounded supports).
    boundary_policy : {"shrink", "clip"}
        ``"shrink"`` switches to a one-sided second-order stencil when the
        central stencil would leave the support. ``"clip"`` refuses and raises
        :class:`DomainError` instead.
    """

    rel_step: float = 1e-5
    boundary_policy: str = "shrink"

    def __post_init__(self):
        if not self.rel_step > 0:
            raise ValidationError(f"rel_step must be positive, got {self.rel_step}")
        if self.boundary_policy not in _POLICIES:
            raise ValidationError(f"boundary_policy must be one of {_POLICIES}")

    def steps(self, model: ModelSpec) -> np.ndarray:
        return np.array([self.rel_step * m.scale for m in model.space])


@dataclass(frozen=True)
class DerivativeStack:
    """Values of ``d^|u| f / dx_u`` at each sample row, shape ``(m, N)``."""

    subset: tuple
    values: np.ndarray
    source: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ShapeError(f"derivative stack must be (m, N), got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            row = int(np.flatnonzero(~np.all(np.isfinite(vals), axis=1))[0])
            raise ValidationError(f"non-finite derivative for subset {_subsets.render(self.subset)} at row {row}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def _nested(model, X, order, h, lo, hi, policy):
    if not order:
        return model.evaluate(X)
    j, rest = order[0], order[1:]
    x = X[:, j]
    central = (x - h[j] > lo[j]) & (x + h[j] < hi[j])
    forward = ~central & (x + 2 * h[j] < hi[j]) & (x - h[j] <= lo[j])
    backward = ~central & ~forward & (x - 2 * h[j] > lo[j])
    if not np.all(central):
        stuck = ~(central | forward | backward)
        if policy == "clip" or np.any(stuck):
            row = int(np.flatnonzero(~central)[0])
            raise DomainError(
                f"finite-difference stencil for x{j + 1} leaves the support "
                f"({lo[j]}, {hi[j]}) at point {X[row].tolist()}"
            )
    out = np.empty((X.shape[0], model.n_out))

    def shifted(rows, k):
        Y = X[rows].copy()
        Y[:, j] = Y[:, j] + k * h[j]
        return Y

    if np.any(central):
        Xp, Xm = shifted(central, 1), shifted(central, -1)
        width = (Xp[:, j] - Xm[:, j])[:, None]
        out[central] = (_nested(model, Xp, rest, h, lo, hi, policy)
                        - _nested(model, Xm, rest, h, lo, hi, policy)) / width
    for rows, sign in ((forward, 1), (backward, -1)):
        if np.any(rows):
            X0, X1, X2 = shifted(rows, 0), shifted(rows, sign), shifted(rows, 2 * sign)
            step = (X1[:, j] - X0[:, j])[:, None]
            f0 = _nested(model, X0, rest, h, lo, hi, policy)
            f1 = _nested(model, X1, rest, h, lo, hi, policy)
            f2 = _nested(model, X2, rest, h, lo, hi, policy)
            out[rows] = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step)
    return out


def cross_partial_fd(model: ModelSpec, u, x, scheme: FDScheme = FDScheme()) -> np.ndarray:
    """Nested central-difference estimate of ``d^|u| f / dx_u``.

    ``x`` is one point ``(d,)`` or a batch ``(m, d)``. Away from the support
    boundary each index of ``u`` costs a factor 2 in model evaluations.

    Raises
    ------
    CapabilityError
        If ``|u| > 3``.
    DomainError
        If a stencil would leave the support under the ``"clip"`` policy.
    """
    u = _subsets.normalize(u, model.d)
    if len(u) > MAX_FD_ORDER:
        raise CapabilityError(f"finite differences support |u| <= {MAX_FD_ORDER}, got {len(u)}")
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise ShapeError(f"expected points with {model.d} coordinates, got shape {np.shape(x)}")
    h = scheme.steps(model)
    lo, hi = model.space.lower, model.space.upper
    out = _nested(model, X, [j - 1 for j in u], h, lo, hi, scheme.boundary_policy)
    return out[0] if single else out


def partial_stack(model: ModelSpec, u, samples: SampleMatrix, scheme: FDScheme = FDScheme(),
                  mode: str = "auto") -> DerivativeStack:
    """Cross-partials of ``model`` at every row of ``samples``.

    ``mode="auto"`` prefers the analytic form and falls back to finite
    differences; ``"analytic"`` requires it; ``"fd"`` always differences.
    """
    if mode not in _MODES:
        raise ValidationError(f"derivative mode must be one of {_MODES}, got {mode!r}")
    u = _subsets.normalize(u, model.d)
    X = samples.values if isinstance(samples, SampleMatrix) else np.atleast_2d(samples)
    if mode != "fd" and model.supports_partial(u):
        return DerivativeStack(u, model.analytic_partial(u, X), "analytic")
    if mode == "analytic":
        raise CapabilityError(f"{model.name} has no analytic partial for subset {_subsets.render(u)}")
    return DerivativeStack(u, cross_partial_fd(model, u, X, scheme), "fd")
