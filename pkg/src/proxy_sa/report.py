"""End-to-end studies and their tabular reports."""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

from . import subsets as _subsets
from .bounds import InteractionSets, general_bound_sum, ordered_interaction_bound, poincare_constants
from .config import StudyConfig
from .differentiation import FDScheme
from .errors import CapabilityError, DivergenceError, ProxySAError, ReportIOError, ValidationError
from .estimators import replicate_study
from .models import builtin
from .oracle import closed_form_reference

CSV_COLUMNS = ("subset", "kind", "true_index", "classical_bound", "proxy_mean", "proxy_std",
               "estimator", "m", "R", "deriv_source")
COMPARE_COLUMNS = CSV_COLUMNS + ("U_u", "new_proxy")
ZERO_CUTOFF = 1e-12


@dataclass(frozen=True)
class ReportRow:
    """One line of a report: a subset seen through one proxy type."""

    subset: tuple
    kind: str
    true_index: Optional[float]
    classical_bound: Optional[float]
    proxy_mean: float
    proxy_std: float
    estimator: str
    m: int
    R: int
    deriv_source: str

    def __post_init__(self):
        object.__setattr__(self, "subset", tuple(self.subset))
        if not self.proxy_std >= 0:
            raise ValidationError(f"proxy_std must be >= 0, got {self.proxy_std}")

    @property
    def sort_key(self):
        return (_subsets.sort_key(self.subset), self.estimator != "first")


@dataclass(frozen=True)
class ReportTable:
    """Rows sorted singletons first, then by size and lexicographically.

    ``metadata`` carries the config echo, version string and wall time. It is
    written to JSON only, so CSV output depends on the rows alone.
    """

    rows: tuple
    metadata: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=lambda r: r.sort_key)))

    def __len__(self):
        return len(self.rows)

    def row(self, subset, estimator: str = "first") -> ReportRow:
        u = _subsets.normalize(subset)
        for r in self.rows:
            if r.subset == u and r.estimator == estimator:
                return r
        raise KeyError((u, estimator))

    def subsets(self) -> list:
        return list(dict.fromkeys(r.subset for r in self.rows))


def version_string() -> str:
    """Package version plus the short git revision when available."""
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0.0.0"
    try:
        sha = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{base}+g{sha}" if sha else base


@contextmanager
def _stage(name: str):
    """Prefix errors raised inside the block with ``[name]``, keeping their type."""
    try:
        yield
    except ProxySAError as exc:
        msg = str(exc)
        if msg.startswith("["):
            raise
        try:
            wrapped = type(exc)(f"[{name}] {msg}")
        except TypeError:
            raise exc from None
        raise wrapped from exc


def _classical_constants(model):
    try:
        return [poincare_constants(mg) for mg in model.space]
    except DivergenceError:
        return None


def run_study(config: StudyConfig, *, classical: bool = True) -> ReportTable:
    """Sample, differentiate, estimate and aggregate as described by ``config``.

    Closed-form indices fill ``true_index`` for the built-ins that have one.
    With ``classical`` the DGSM of each subset is estimated on the same samples
    and turned into the classical bound ``U_u``.

    Raises
    ------
    ProxySAError
        Any package error, re-raised with the failing stage in its message.
    """
    t0 = time.perf_counter()
    with _stage("model"):
        model = builtin(config.model, **config.params)
    with _stage("subsets"):
        subsets = config.resolve_subsets(model.d)
    with _stage("estimation"):
        study = replicate_study(
            model, subsets, sampler=config.sampler, m=config.m, replicates=config.replicates,
            seed=config.seed, skip=config.skip, scheme=FDScheme(config.fd_step),
            mode=config.derivatives, with_dgsm=classical, workers=config.workers,
        )
    refs = {}
    with _stage("reference"):
        try:
            order = max(len(u) for u in subsets)
            refs = {r.subset: r for r in closed_form_reference(model, order)}
        except CapabilityError:
            refs = {}
    constants = None
    if classical:
        with _stage("bounds"):
            constants = _classical_constants(model)

    rows = []
    for s in study.summaries:
        u = s.subset
        kind = "total" if len(u) == 1 else "total_interaction"
        ref = refs.get(u)
        factor = math.prod(constants[k - 1].c_best for k in u) if constants else None
        for est in config.estimators:
            first = est == "first"
            bound = None
            if factor is not None:
                bound = factor * (s.dgsm_ratio_mean if first else s.dgsm_frob_ratio_mean)
            true = None if ref is None else (ref.value_first_type if first else ref.value_second_type)
            rows.append(ReportRow(
                subset=u, kind=kind, true_index=true, classical_bound=bound,
                proxy_mean=s.first_mean if first else s.second_mean,
                proxy_std=s.first_std if first else s.second_std,
                estimator=est, m=config.m, R=config.replicates, deriv_source=s.source,
            ))
    meta = {
        "config": config.to_dict(),
        "model": model.name,
        "version": version_string(),
        "wall_time": time.perf_counter() - t0,
        "sigma_trace_mean": math.fsum(study.sigma_traces) / len(study.sigma_traces),
        "nub_trace_means": {
            _subsets.render(s.subset): math.fsum(e.trace_value for e in s.estimates) / len(s.estimates)
            for s in study.summaries
        },
    }
    return ReportTable(tuple(rows), meta)


def aggregated_bounds(table: ReportTable, d: int, interaction_sets: Optional[InteractionSets] = None) -> dict:
    """General and ordered variance bounds built from a study's NUB traces.

    Values are normalized by the mean output-variance trace, so each bound
    should be at least 1. Entries that need missing subsets are ``None``.
    """
    traces = {_subsets.parse(k): v for k, v in table.metadata.get("nub_trace_means", {}).items()}
    sigma = table.metadata.get("sigma_trace_mean")
    out = {"general_bound": None, "ordered_bound": None, "order": None}
    if not traces or not sigma:
        return out
    try:
        out["general_bound"] = general_bound_sum(traces, d, interaction_sets) / sigma
    except ProxySAError:
        pass
    if interaction_sets is not None and all((j,) in traces for j in range(1, d + 1)):
        D = [2.0 * traces[(j,)] for j in range(1, d + 1)]
        bound, order = ordered_interaction_bound(D, interaction_sets)
        out["ordered_bound"], out["order"] = bound / sigma, order
    return out


# -- serialization ---------------------------------------------------------------


def format_number(value) -> str:
    """Three decimals; ``None`` is empty and values below ``1e-12`` print as ``0.000``."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if abs(value) < ZERO_CUTOFF:
        return "0.000"
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


def _csv_cells(row: ReportRow, compare: bool) -> list:
    cells = [_subsets.render(row.subset), row.kind, format_number(row.true_index),
             format_number(row.classical_bound), format_number(row.proxy_mean),
             format_number(row.proxy_std), row.estimator, str(row.m), str(row.R), row.deriv_source]
    if compare:
        cells += [format_number(row.classical_bound), format_number(row.proxy_mean)]
    return cells


def render_csv(table: ReportTable, *, compare: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS if compare else CSV_COLUMNS)
    for row in table.rows:
        writer.writerow(_csv_cells(row, compare))
    return buf.getvalue()


def _row_dict(row: ReportRow) -> dict:
    data = asdict(row)
    data["subset"] = _subsets.render(row.subset)
    return data


def render_json(table: ReportTable) -> str:
    payload = {"metadata": table.metadata, "rows": [_row_dict(r) for r in table.rows]}
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def write_report(table: ReportTable, path, format: str = "csv", *, compare: bool = False) -> None:
    """Write ``table`` as CSV (3-decimal) or JSON (full precision).

    Raises
    ------
    ReportIOError
        If the file cannot be written.
    """
    if format not in ("csv", "json"):
        raise ValidationError(f"format must be 'csv' or 'json', got {format!r}")
    text = render_csv(table, compare=compare) if format == "csv" else render_json(table)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {path}: {exc}") from exc


def _opt_float(text: str):
    return None if text == "" else float(text)


def read_report(path, format: Optional[str] = None) -> ReportTable:
    """Read a report written by :func:`write_report`.

    CSV keeps the rounded values; JSON restores the table exactly.
    """
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ReportIOError(f"cannot read report {path}: {exc}") from exc
    if fmt == "json":
        payload = json.loads(text)
        rows = []
        for r in payload["rows"]:
            r = dict(r, subset=_subsets.parse(r["subset"]))
            rows.append(ReportRow(**r))
        return ReportTable(tuple(rows), payload.get("metadata", {}))
    reader = csv.DictReader(io.StringIO(text))
    rows = [
        ReportRow(
            subset=_subsets.parse(r["subset"]), kind=r["kind"], true_index=_opt_float(r["true_index"]),
            classical_bound=_opt_float(r["classical_bound"]), proxy_mean=float(r["proxy_mean"]),
            proxy_std=float(r["proxy_std"]), estimator=r["estimator"], m=int(r["m"]), R=int(r["R"]),
            deriv_source=r["deriv_source"],
        )
        for r in reader
    ]
    return ReportTable(tuple(rows))
