"""Unit-hypercube point sets and their transport to the input space.

Two generators are available: the unscrambled Sobol sequence (via
``scipy.stats.qmc``) and a seeded PCG64 stream. Both return points strictly
inside (0, 1) so that the Poincaré weight is always defined after the inverse
CDF transform.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import CapabilityError, ShapeError, ValidationError
from .marginals import InputSpace

# Dimension limit of the direction-number table shipped with scipy
# (Joe and Kuo, new-joe-kuo-6.21201).
SOBOL_MAX_DIM = 21201

_TINY = np.nextafter(0.0, 1.0)
_ONE_MINUS = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class UnitSample:
    """An ``m x d`` point set in the open unit cube.

    Attributes
    ----------
    points : ndarray, shape (m, d)
    generator : str
        ``"sobol"`` or ``"prng"``.
    seed_or_skip : int
        Number of Sobol points skipped, or the base seed of the PRNG stream.
    """

    points: np.ndarray
    generator: str
    seed_or_skip: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ShapeError(f"points must be a non-empty (m, d) array, got shape {pts.shape}")
        if not np.all((pts > 0.0) & (pts < 1.0)):
            raise ValidationError("unit sample entries must lie strictly inside (0, 1)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SampleMatrix:
    """Sample points in the input space, one row per draw."""

    values: np.ndarray
    space: InputSpace

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.space.d:
            raise ShapeError(
                f"sample matrix needs shape (m, {self.space.d}), got {vals.shape}"
            )
        inside = (vals > self.space.lower) & (vals < self.space.upper)
        if not np.all(inside):
            row = int(np.flatnonzero(~np.all(inside, axis=1))[0])
            raise ValidationError(f"sample row {row} is not strictly inside the support: {vals[row].tolist()}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic seed ladder for replicated studies.

    Replicate ``r`` draws from ``PCG64(SeedSequence(base_seed, spawn_key=(r,)))``.
    This is the same derivation ``SeedSequence.spawn`` uses for children, so
    streams for distinct ``r`` are independent for all practical purposes.
    """

    base_seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if self.replicate_index < 0:
            raise ValidationError("replicate_index must be >= 0")
        if self.base_seed < 0:
            raise ValidationError("base_seed must be >= 0")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.base_seed, spawn_key=(self.replicate_index,))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def replicate(self, r: int) -> "SeedPolicy":
        return SeedPolicy(self.base_seed, r)


def _interior(points: np.ndarray) -> np.ndarray:
    return np.clip(points, _TINY, _ONE_MINUS)


def sobol_points(m: int, d: int, skip: int = 0) -> UnitSample:
    """First ``m`` Sobol points after discarding ``skip`` points.

    The all-zero first point of the sequence is always dropped before
    ``skip`` is applied, so ``skip=0`` starts at ``(0.5, ..., 0.5)``. Any
    remaining zero coordinate is replaced by the smallest positive double.

    Raises
    ------
    CapabilityError
        If ``d`` exceeds ``SOBOL_MAX_DIM``.
    """
    if m < 1 or d < 1:
        raise ValidationError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    if skip < 0:
        raise ValidationError("skip must be >= 0")
    if d > SOBOL_MAX_DIM:
        raise CapabilityError(
            f"Sobol direction numbers cover at most {SOBOL_MAX_DIM} dimensions, got d={d}"
        )
    engine = qmc.Sobol(d, scramble=False)
    engine.fast_forward(1 + int(skip))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = engine.random(m)
    return UnitSample(_interior(pts), "sobol", int(skip))


def prng_points(m: int, d: int, seed: SeedPolicy) -> UnitSample:
    """``m x d`` uniform draws from the PCG64 stream named by ``seed``."""
    if m < 1 or d < 1:
        raise ValidationError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    pts = seed.generator().random((m, d))
    return UnitSample(_interior(pts), "prng", seed.base_seed)


def replicate_points(sampler: str, m: int, d: int, *, seed: int = 0, skip: int = 0,
                     replicate: int = 0) -> UnitSample:
    """Point set for replicate ``replicate`` of a study.

    Sobol replicates take consecutive, non-overlapping blocks of the
    sequence (``skip + replicate * m``); PRNG replicates use the seed ladder.
    """
    if sampler == "sobol":
        return sobol_points(m, d, skip + replicate * m)
    if sampler == "prng":
        return prng_points(m, d, SeedPolicy(seed, replicate))
    raise ValidationError(f"unknown sampler {sampler!r}; expected 'sobol' or 'prng'")


def transform(unit: UnitSample, space: InputSpace) -> SampleMatrix:
    """Map unit points through each marginal's quantile function.

    Results are nudged off the support endpoints when rounding lands on
    them, so every value is strictly interior.
    """
    if unit.d != space.d:
        raise ShapeError(f"unit sample has d={unit.d} but the input space has d={space.d}")
    values = space.quantile(unit.points)
    lo, hi = space.lower, space.upper
    values = np.clip(values, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))
    return SampleMatrix(values, space)
