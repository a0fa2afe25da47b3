"""Poincaré constants, classical DGSM bounds and aggregated variance bounds."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import optimize

from . import subsets as _subsets
from .differentiation import DerivativeStack
from .errors import (
    DegenerateModelError,
    DivergenceError,
    IncompleteInputError,
    ValidationError,
)
from .estimators import CovMatrix, dgsm_matrix
from .marginals import Marginal

# Tail probes p = 10^-k used to detect unbounded suprema.
_TAIL_EXPONENTS = range(4, 13)
_GROWTH = 1.01


@dataclass(frozen=True)
class PoincareConstants:
    """Poincaré-type constants of one marginal.

    Attributes
    ----------
    c_optimal : float or None
        Classical optimal constant, when known in closed form.
    c_new : float
        ``min(sup_w / 2, 4 sup_cheeger^2)``.
    sup_w : float
        ``sup F (1 - F) / rho^2`` (``inf`` when unbounded).
    sup_cheeger : float
        ``sup F (1 - F) / rho`` (``inf`` when unbounded).
    """

    marginal: Marginal
    c_optimal: Optional[float]
    c_new: float
    sup_w: float
    sup_cheeger: float

    @property
    def c_best(self) -> float:
        """Smallest available constant."""
        if self.c_optimal is None:
            return self.c_new
        return min(self.c_optimal, self.c_new)


def _sup_on_quantiles(marginal: Marginal, func, grid_points: int) -> float:
    p = np.arange(1, grid_points + 1) / (grid_points + 1)
    vals = func(p, marginal)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < grid_points - 1:
        neg = lambda q: -float(func(np.array([q]), marginal)[0])  # noqa: E731
        try:
            res = optimize.minimize_scalar(neg, bracket=(p[k - 1], p[k], p[k + 1]), method="golden")
        except ValueError:
            # Flat top: the grid point already ties its neighbours.
            res = optimize.minimize_scalar(neg, bounds=(p[k - 1], p[k + 1]), method="bounded")
        if res.success and p[k - 1] <= res.x <= p[k + 1]:
            best = max(best, -float(res.fun))
    # Probe both tails; a value that exceeds the grid maximum and keeps
    # growing toward the boundary is treated as unbounded.
    for tail in (lambda e: 10.0**-e, lambda e: 1.0 - 10.0**-e):
        probes = np.array([tail(e) for e in _TAIL_EXPONENTS])
        tv = func(probes, marginal)
        if tv[-1] > best and np.all(tv[1:] > _GROWTH * tv[:-1]):
            return math.inf
        best = max(best, float(np.max(tv)))
    return best


def _w(p, marginal):
    x = marginal.quantile(p)
    rho = np.asarray(marginal.pdf(x))
    return p * (1.0 - p) / rho**2


def _cheeger(p, marginal):
    x = marginal.quantile(p)
    rho = np.asarray(marginal.pdf(x))
    return p * (1.0 - p) / rho


def poincare_constants(marginal: Marginal, grid_points: int = 4096) -> PoincareConstants:
    """Suprema of the weight and the Cheeger-type ratio, and the derived constants.

    Uniform marginals use closed forms. Others are scanned on the quantile
    grid ``k / (G + 1)``, refined by golden-section search around the grid
    maximum and probed in both tails.

    Raises
    ------
    DivergenceError
        If both suprema are unbounded, so no constant is available.
    """
    if grid_points < 128:
        raise ValidationError("grid_points must be >= 128")
    if marginal.kind == "uniform":
        width = marginal.width
        sup_w = width**2 / 4.0
        sup_ch = width / 4.0
        c_opt = (width / math.pi) ** 2
    else:
        sup_w = _sup_on_quantiles(marginal, _w, grid_points)
        sup_ch = _sup_on_quantiles(marginal, _cheeger, grid_points)
        c_opt = marginal.c_optimal
        if math.isinf(sup_w) and math.isinf(sup_ch):
            raise DivergenceError(f"both suprema diverge for marginal {marginal.name!r}")
    c_new = min(sup_w / 2.0, 4.0 * sup_ch**2)
    return PoincareConstants(marginal, c_opt, c_new, sup_w, sup_ch)


@dataclass(frozen=True)
class InteractionSets:
    """For each input ``j``, the subsets containing ``j`` with non-zero cross-partial.

    ``sets[j - 1]`` is a tuple of sorted 1-based tuples.
    """

    sets: tuple

    def __post_init__(self):
        d = len(self.sets)
        clean = []
        for j, family in enumerate(self.sets, start=1):
            fam = tuple(sorted({_subsets.normalize(u, d) for u in family}, key=_subsets.sort_key))
            for u in fam:
                if j not in u:
                    raise ValidationError(f"subset {_subsets.render(u)} listed for input {j} does not contain it")
            if not 1 <= len(fam) <= 2 ** (d - 1):
                raise ValidationError(f"input {j} needs between 1 and {2 ** (d - 1)} subsets, got {len(fam)}")
            clean.append(fam)
        object.__setattr__(self, "sets", tuple(clean))

    @property
    def d(self) -> int:
        return len(self.sets)

    @classmethod
    def from_active(cls, active: Sequence, d: int) -> "InteractionSets":
        """Build from the list of all active subsets."""
        act = [_subsets.normalize(u, d) for u in active]
        return cls(tuple(tuple(u for u in act if j in u) for j in range(1, d + 1)))

    @classmethod
    def from_mapping(cls, mapping: Mapping, d: int) -> "InteractionSets":
        keys = {int(k) for k in mapping}
        if keys != set(range(1, d + 1)):
            raise ValidationError(f"interaction sets must list inputs 1..{d}, got {sorted(keys)}")
        return cls(tuple(tuple(mapping[k] if k in mapping else mapping[str(k)]) for k in range(1, d + 1)))

    def active(self) -> list:
        """Union of all sets, singletons first."""
        return sorted({u for fam in self.sets for u in fam}, key=_subsets.sort_key)

    def to_json(self) -> dict:
        return {str(j): [list(u) for u in fam] for j, fam in enumerate(self.sets, start=1)}


def load_interaction_sets(path, d: int) -> InteractionSets:
    """Read interaction sets from a file.

    Accepted forms: a JSON object ``{"1": [[1], [1, 3]], ...}``, a JSON list of
    active subsets ``[[1], [1, 3], ...]``, or plain text with active subsets
    separated by ``;`` or newlines (``1;1,3;2``).
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        chunks = text.replace("\n", ";")
        return InteractionSets.from_active(_subsets.parse_list(chunks), d)
    if isinstance(data, dict):
        return InteractionSets.from_mapping({int(k): v for k, v in data.items()}, d)
    if isinstance(data, list):
        return InteractionSets.from_active(data, d)
    raise ValidationError(f"cannot read interaction sets from {path}")


def dgsm(stack: DerivativeStack) -> CovMatrix:
    """Unweighted derivative measure ``mean_i d_u f(X_i) d_u f(X_i)^T``."""
    return dgsm_matrix(stack)


def classical_bound(dgsm_u: CovMatrix, constants: Sequence[PoincareConstants], u, sigma_trace: float,
                    norm: str = "trace") -> float:
    """``prod_{k in u} C_best(mu_k) * trace(DGSM_u) / trace(Sigma)``.

    ``constants`` lists one entry per input (indexed by ``u``). With
    ``norm="frobenius"`` the second-type analogue ``||DGSM_u||_F / (N trace Sigma)``
    is used.
    """
    u = _subsets.normalize(u, len(constants))
    if not sigma_trace > 0:
        raise DegenerateModelError("sigma_trace must be positive")
    factor = math.prod(constants[k - 1].c_best for k in u)
    if norm == "trace":
        return factor * dgsm_u.trace / sigma_trace
    if norm == "frobenius":
        return factor * dgsm_u.frobenius / (dgsm_u.n * sigma_trace)
    raise ValidationError(f"norm must be 'trace' or 'frobenius', got {norm!r}")


def general_bound_sum(proxies: Mapping, d: int, interaction_sets: Optional[InteractionSets] = None) -> float:
    """Sum of non-normalised trace proxies over the subsets that can be active.

    Without ``interaction_sets`` every non-empty subset of ``{1..d}`` must be
    present. With them, only the declared active subsets are required.

    Raises
    ------
    IncompleteInputError
        If a required subset is missing.
    """
    values = {_subsets.normalize(k, d): float(v) for k, v in proxies.items()}
    if interaction_sets is None:
        required = _subsets.nonempty_subsets(range(1, d + 1))
    else:
        if interaction_sets.d != d:
            raise ValidationError("interaction sets do not match the input dimension")
        required = interaction_sets.active()
    missing = [u for u in required if u not in values]
    if missing:
        shown = ", ".join(_subsets.render(u) for u in missing[:5])
        raise IncompleteInputError(f"missing proxies for {len(missing)} subset(s): {shown}")
    return math.fsum(values[u] for u in required)


def ordered_interaction_bound(per_input_D: Sequence[float], sets: InteractionSets):
    """Greedy bound ``sum_k |A_(k) minus earlier sets| / 2 * D_(k)``.

    Inputs are taken in increasing order of ``D_j`` (ties to the smaller
    index). Returns ``(bound, order)`` with a 1-based ``order``.
    """
    D = [float(x) for x in per_input_D]
    if len(D) != sets.d:
        raise ValidationError(f"{len(D)} values for {sets.d} interaction sets")
    order = sorted(range(1, len(D) + 1), key=lambda j: (D[j - 1], j))
    covered = set()
    terms = []
    for j in order:
        fresh = set(sets.sets[j - 1]) - covered
        terms.append(len(fresh) / 2.0 * D[j - 1])
        covered |= fresh
    return math.fsum(terms), order


def centered_inputs_bound(per_input_D: Sequence[float], j0: Sequence[int]):
    """``D_(1) / 2`` with ``(1) = argmin_{j in J0} D_j``, for declared centred inputs.

    ``j0`` must list inputs ``j`` for which ``E_j f = 0``; this is not checked.
    Returns ``(bound, index)``.
    """
    j0 = _subsets.normalize(j0, len(per_input_D))
    best = min(j0, key=lambda j: (per_input_D[j - 1], j))
    return float(per_input_D[best - 1]) / 2.0, best
