"""Study configuration read from JSON files."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import subsets as _subsets
from .errors import ValidationError

_SAMPLERS = ("sobol", "prng")
_DERIVATIVES = ("auto", "analytic", "fd")
_ESTIMATORS = ("first", "second")
_FORMATS = ("csv", "json")

# Keys with a fixed meaning; any other top-level key is a model parameter.
_FIELDS = ("model", "params", "sampler", "m", "seed", "skip", "replicates", "derivatives",
           "fd_step", "order", "subsets", "estimators", "out", "format", "workers")


@dataclass(frozen=True)
class StudyConfig:
    """Everything needed to reproduce one replicated proxy study.

    Attributes
    ----------
    model : str
        Built-in model name.
    params : dict
        Keyword overrides passed to the model factory.
    sampler : {"sobol", "prng"}
    m : int
        Points per replicate, at least 2.
    seed, skip : int
        PRNG base seed and Sobol skip offset.
    replicates : int
        Number of replicates ``R``, at least 1.
    derivatives : {"auto", "analytic", "fd"}
    fd_step : float
        Relative finite-difference step.
    order : int
        Highest subset size used when ``subsets`` is not given.
    subsets : tuple or None
        Explicit list of 1-based subsets.
    estimators : tuple
        Proxy types to report, ``"first"`` and/or ``"second"``.
    out : str or None
        Output path; ``None`` writes to stdout.
    format : {"csv", "json"}
    workers : int
        Replicate threads (capped by ``PROXY_SA_THREADS``).
    """

    model: str
    params: dict = field(default_factory=dict)
    sampler: str = "sobol"
    m: int = 1000
    seed: int = 0
    skip: int = 0
    replicates: int = 30
    derivatives: str = "auto"
    fd_step: float = 1e-5
    order: int = 2
    subsets: Optional[tuple] = None
    estimators: tuple = ("first", "second")
    out: Optional[str] = None
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.model, str) or not self.model:
            raise ValidationError("config needs a model name")
        if self.sampler not in _SAMPLERS:
            raise ValidationError(f"sampler must be one of {_SAMPLERS}, got {self.sampler!r}")
        if self.derivatives not in _DERIVATIVES:
            raise ValidationError(f"derivatives must be one of {_DERIVATIVES}, got {self.derivatives!r}")
        if self.format not in _FORMATS:
            raise ValidationError(f"format must be one of {_FORMATS}, got {self.format!r}")
        for name in ("m", "seed", "skip", "replicates", "order", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
        if self.m < 2:
            raise ValidationError(f"m must be >= 2, got {self.m}")
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if self.seed < 0 or self.skip < 0:
            raise ValidationError("seed and skip must be non-negative")
        if self.order < 1:
            raise ValidationError(f"order must be >= 1, got {self.order}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if not float(self.fd_step) > 0:
            raise ValidationError(f"fd_step must be positive, got {self.fd_step}")
        est = (self.estimators,) if isinstance(self.estimators, str) else tuple(self.estimators)
        if not est or any(e not in _ESTIMATORS for e in est):
            raise ValidationError(f"estimators must be drawn from {_ESTIMATORS}, got {self.estimators!r}")
        object.__setattr__(self, "estimators", tuple(e for e in _ESTIMATORS if e in est))
        object.__setattr__(self, "params", dict(self.params))
        if self.subsets is not None:
            subs = _subsets.parse_list(self.subsets) if isinstance(self.subsets, str) else self.subsets
            object.__setattr__(self, "subsets", tuple(_subsets.normalize(u) for u in subs))

    def resolve_subsets(self, d: int) -> list:
        """Subsets to estimate for a model with ``d`` inputs, checked against ``d``."""
        if self.subsets is None:
            return _subsets.up_to_order(d, self.order)
        return sorted({_subsets.normalize(u, d) for u in self.subsets}, key=_subsets.sort_key)

    def with_overrides(self, **changes) -> "StudyConfig":
        """Copy with the non-``None`` entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        data = asdict(self)
        data["subsets"] = None if self.subsets is None else [list(u) for u in self.subsets]
        data["estimators"] = list(self.estimators)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        known = {k: v for k, v in data.items() if k in _FIELDS}
        extra = {k: v for k, v in data.items() if k not in _FIELDS}
        params = dict(known.pop("params", None) or {})
        params.update(extra)
        try:
            return cls(params=params, **known)
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from exc


def load_config(path) -> StudyConfig:
    """Read a :class:`StudyConfig` from a JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return StudyConfig.from_dict(data)
