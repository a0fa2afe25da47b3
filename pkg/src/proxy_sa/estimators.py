"""Sensitivity functionals and the proxy-measure estimators.

The central quantity is the weighted derivative outer-product matrix

    NUB_u = E[ d_u f(X) d_u f(X)^T prod_{k in u} F_k (1 - F_k) / rho_k^2 ] / 2^|u|

estimated by a sample mean. Normalising its trace (or Frobenius norm) by the
output variance gives the first- (or second-) type proxy of the total
(``|u| = 1``) or total-interaction (``|u| >= 2``) sensitivity index.

Sums over samples use ``math.fsum`` in row order, so results do not depend
on how work is split across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import subsets as _subsets
from .differentiation import DerivativeStack, FDScheme, partial_stack
from .errors import (
    DegenerateModelError,
    InsufficientDataError,
    ShapeError,
    SingularityError,
    ValidationError,
)
from .models import ModelSpec
from .sampling import SampleMatrix, replicate_points, transform

PSD_REL_TOL = 1e-10
SYM_ABS_TOL = 1e-12


def _fsum_columns(T: np.ndarray) -> np.ndarray:
    """Exactly rounded column sums of a 2-D array."""
    return np.array([math.fsum(T[:, k]) for k in range(T.shape[1])])


def _mean_and_se(T: np.ndarray):
    """Column means (compensated) and standard errors of the mean."""
    m = T.shape[0]
    mean = _fsum_columns(T) / m
    if m < 2:
        return mean, np.full(T.shape[1], np.nan)
    resid = T - mean
    var = _fsum_columns(resid * resid) / (m - 1)
    return mean, np.sqrt(var / m)


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric ``N x N`` matrix such as an output covariance or NUB matrix.

    The entries are symmetrised on construction.
    """

    entries: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise ShapeError(f"covariance matrix must be square, got shape {E.shape}")
        if np.any(np.abs(E - E.T) > SYM_ABS_TOL * max(1.0, float(np.max(np.abs(E))))):
            raise ValidationError("matrix is not symmetric")
        E = 0.5 * (E + E.T)
        E.setflags(write=False)
        object.__setattr__(self, "entries", E)

    @classmethod
    def zeros(cls, n: int) -> "CovMatrix":
        return cls(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    @property
    def frobenius(self) -> float:
        if self.n == 1:
            return abs(float(self.entries[0, 0]))
        return float(np.linalg.norm(self.entries, "fro"))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def is_psd(self, rel_tol: float = PSD_REL_TOL) -> bool:
        """Eigenvalues >= ``-rel_tol * trace``."""
        return self.min_eigenvalue >= -rel_tol * max(abs(self.trace), 0.0)

    def __float__(self):
        if self.n != 1:
            raise ShapeError("only a 1 x 1 matrix converts to float")
        return float(self.entries[0, 0])

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __add__(self, other):
        return CovMatrix(self.entries + np.asarray(other))

    def __sub__(self, other):
        return CovMatrix(self.entries - np.asarray(other))

    def to_list(self):
        return self.entries.tolist()


@dataclass(frozen=True)
class ProxyEstimate:
    """Proxy-measure of one subset from one sample.

    ``trace_se`` is the standard error of ``trace_value`` over sample rows,
    meaningful for independent draws only.
    """

    subset: tuple
    nub: CovMatrix
    trace_value: float
    frob_value: float
    ub_first_type: float
    ub_second_type: float
    m: int
    source: str
    trace_se: float = float("nan")


@dataclass(frozen=True)
class FunctionalEstimate:
    """Monte Carlo value of a sensitivity functional at one point."""

    subset: tuple
    at_point: np.ndarray
    value: np.ndarray
    inner_m: int
    std_error: np.ndarray

    def __post_init__(self):
        if self.inner_m < 1:
            raise ValidationError("inner_m must be >= 1")
        if not np.all(np.isfinite(self.value)):
            raise ValidationError("functional estimate is not finite")


# -- covariance and NUB --------------------------------------------------------


def output_covariance(outputs) -> CovMatrix:
    """Unbiased sample covariance (divisor ``m - 1``) of ``(m, N)`` outputs."""
    Y = np.asarray(outputs, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, n = Y.shape
    if m < 2:
        raise InsufficientDataError(f"need at least 2 samples for a covariance, got {m}")
    mean = _fsum_columns(Y) / m
    R = Y - mean
    outer = (R[:, :, None] * R[:, None, :]).reshape(m, n * n)
    return CovMatrix(_fsum_columns(outer).reshape(n, n) / (m - 1))


def _weights(u, samples: SampleMatrix) -> np.ndarray:
    """Per-row product of Poincaré weights over ``u``."""
    X = samples.values
    cols = [j - 1 for j in u]
    for j in cols:
        ok = samples.space[j].weight_defined(X[:, j])
        if not np.all(ok):
            row = int(np.flatnonzero(~ok)[0])
            raise SingularityError(
                f"Poincaré weight of x{j + 1} undefined at sample row {row} (value {X[row, j]!r})"
            )
    if len(cols) == 1:
        j = cols[0]
        return np.asarray(samples.space[j].poincare_weight(X[:, j]), dtype=float)
    logw = sum(np.asarray(samples.space[j].log_poincare_weight(X[:, j])) for j in cols)
    return np.exp(logw)


def _nub_terms(stack: DerivativeStack, samples: SampleMatrix) -> np.ndarray:
    if stack.m != samples.m:
        raise ShapeError(f"derivative stack has {stack.m} rows but the sample has {samples.m}")
    w = _weights(stack.subset, samples) / 2.0 ** len(stack.subset)
    D = stack.values
    n = D.shape[1]
    return (w[:, None, None] * D[:, :, None] * D[:, None, :]).reshape(stack.m, n * n)


def nub_matrix(stack: DerivativeStack, samples: SampleMatrix) -> CovMatrix:
    """Unbiased estimate of NUB_u from a derivative stack and its sample."""
    T = _nub_terms(stack, samples)
    n = stack.values.shape[1]
    return CovMatrix(_fsum_columns(T).reshape(n, n) / stack.m)


def nub_trace_terms(stack: DerivativeStack, samples: SampleMatrix) -> np.ndarray:
    """Per-row contributions whose mean is ``trace(NUB_u)``."""
    w = _weights(stack.subset, samples) / 2.0 ** len(stack.subset)
    return w * np.sum(stack.values**2, axis=1)


def trace_proxy(nub: CovMatrix) -> float:
    """Trace of the NUB matrix."""
    return nub.trace


def frob_proxy(nub: CovMatrix) -> float:
    """Frobenius norm of the NUB matrix (absolute value when ``N = 1``)."""
    return nub.frobenius


def normalized_proxies(nub: CovMatrix, sigma: CovMatrix, n_out: Optional[int] = None):
    """``(trace(nub) / trace(sigma), ||nub||_F / (N trace(sigma)))``.

    Raises
    ------
    DegenerateModelError
        If the output variance is zero.
    """
    n_out = nub.n if n_out is None else n_out
    tr_sigma = sigma.trace
    if not (tr_sigma > 0 and math.isfinite(tr_sigma)):
        raise DegenerateModelError(f"output variance trace is {tr_sigma}; indices are undefined")
    first = trace_proxy(nub) / tr_sigma
    second = frob_proxy(nub) / (float(n_out) * tr_sigma)
    return first, second


def estimate_proxy(model: ModelSpec, u, samples: SampleMatrix, *, sigma: Optional[CovMatrix] = None,
                   scheme: FDScheme = FDScheme(), mode: str = "auto") -> ProxyEstimate:
    """Full pipeline for one subset on one sample."""
    u = _subsets.normalize(u, model.d)
    if sigma is None:
        sigma = output_covariance(model.evaluate(samples.values))
    stack = partial_stack(model, u, samples, scheme, mode)
    nub = nub_matrix(stack, samples)
    first, second = normalized_proxies(nub, sigma, model.n_out)
    terms = nub_trace_terms(stack, samples)
    _, se = _mean_and_se(terms[:, None])
    return ProxyEstimate(u, nub, trace_proxy(nub), frob_proxy(nub), first, second,
                         samples.m, stack.source, float(se[0]))


def dgsm_matrix(stack: DerivativeStack) -> CovMatrix:
    """Unweighted mean of derivative outer products."""
    D = stack.values
    m, n = D.shape
    outer = (D[:, :, None] * D[:, None, :]).reshape(m, n * n)
    return CovMatrix(_fsum_columns(outer).reshape(n, n) / m)


# -- functionals ---------------------------------------------------------------


def _kernel(marginal, t, x):
    """(F(t) - 1[t >= x]) / rho(t)."""
    ok = marginal.weight_defined(t)
    if not np.all(ok):
        row = int(np.flatnonzero(~ok)[0])
        raise SingularityError(f"kernel undefined at inner row {row} (value {t[row]!r})")
    return (marginal.cdf(t) - (t >= x)) / marginal.pdf(t)


def _inner_values(inner, d):
    V = inner.values if isinstance(inner, SampleMatrix) else np.atleast_2d(np.asarray(inner, dtype=float))
    if V.shape[1] != d:
        raise ShapeError(f"inner sample needs {d} columns, got {V.shape[1]}")
    return V


def _functional(model, u, x, rows_terms, m):
    value, se = _mean_and_se(rows_terms)
    return FunctionalEstimate(u, np.asarray(x, dtype=float), value, m, se)


def first_order_functional(model: ModelSpec, j: int, x_j: float, inner, scheme: FDScheme = FDScheme(),
                           mode: str = "auto") -> FunctionalEstimate:
    """Derivative-based first-order functional of input ``j`` at ``x_j``.

    Averages ``d_j f(x') (F_j(x'_j) - 1[x'_j >= x_j]) / rho_j(x'_j)`` over the
    rows ``x'`` of ``inner`` (a sample of the full input space).
    """
    (j,) = _subsets.normalize([j], model.d)
    marg = model.space[j - 1]
    if not (marg.lo < x_j < marg.hi):
        raise ValidationError(f"x_{j} = {x_j} is outside the support of input {j}")
    V = _inner_values(inner, model.d)
    D = partial_stack(model, (j,), V, scheme, mode).values
    K = _kernel(marg, V[:, j - 1], x_j)
    return _functional(model, (j,), [x_j], D * K[:, None], V.shape[0])


def tief_functional(model: ModelSpec, u, x, inner, scheme: FDScheme = FDScheme(),
                    mode: str = "auto") -> FunctionalEstimate:
    """Total-interaction effect functional of ``u`` at the point ``x``.

    Averages ``d_u f(x'_u, x_~u) prod_{j in u} (F_j(x'_j) - 1[x'_j >= x_j]) / rho_j(x'_j)``
    over inner draws ``x'_u``. ``inner`` has either ``d`` columns (only the
    ``u`` columns are used) or ``|u|`` columns. The result equals
    ``prod_{j in u} (I - E_j) f`` evaluated at ``x``.
    """
    u = _subsets.normalize(u, model.d)
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ShapeError(f"x must have {model.d} coordinates")
    cols = [j - 1 for j in u]
    V = inner.values if isinstance(inner, SampleMatrix) else np.atleast_2d(np.asarray(inner, dtype=float))
    if V.shape[1] == model.d:
        Vu = V[:, cols]
    elif V.shape[1] == len(u):
        Vu = V
    else:
        raise ShapeError(f"inner sample needs {model.d} or {len(u)} columns, got {V.shape[1]}")
    P = np.tile(x, (Vu.shape[0], 1))
    P[:, cols] = Vu
    D = partial_stack(model, u, P, scheme, mode).values
    K = np.ones(P.shape[0])
    for j in cols:
        K = K * _kernel(model.space[j], P[:, j], x[j])
    return _functional(model, u, x, D * K[:, None], P.shape[0])


def anova_component(model: ModelSpec, u, x, inner, scheme: FDScheme = FDScheme(),
                    mode: str = "auto") -> FunctionalEstimate:
    """Derivative-based ANOVA component ``f_u`` at ``x`` (``|u| <= 2``).

    Evaluates

        sum_{w subset u} sum_{nonempty v subset w} (-1)^{|u|-|w|} (-1)^{|v|+1}
            E[ d_v f(x'_v, x_{w \\ v}, x'_{~w}) prod_{j in v} K_j(x'_j; x_j) ]

    with one shared set of inner draws ``x'``. The inner sum over ``v``
    equals ``E[f | x_w] - E[f]``, so the outer alternating sum is the usual
    Sobol-Hoeffding component. ``x`` may be a full ``d``-vector or just the
    ``|u|`` coordinates of ``u``.
    """
    u = _subsets.normalize(u, model.d)
    if len(u) > 2:
        raise ValidationError("anova_component supports |u| <= 2")
    x = np.asarray(x, dtype=float).ravel()
    if x.size == len(u) and x.size != model.d:
        xu = dict(zip(u, x))
    elif x.size == model.d:
        xu = {j: x[j - 1] for j in u}
    else:
        raise ShapeError(f"x must have {model.d} or {len(u)} coordinates")
    V = _inner_values(inner, model.d)
    m = V.shape[0]
    total = np.zeros((m, model.n_out))
    for w in _subsets.nonempty_subsets(u):
        for v in _subsets.nonempty_subsets(w):
            sign = (-1) ** (len(u) - len(w)) * (-1) ** (len(v) + 1)
            P = V.copy()
            for j in set(w) - set(v):
                P[:, j - 1] = xu[j]
            D = partial_stack(model, v, P, scheme, mode).values
            K = np.ones(m)
            for j in v:
                K = K * _kernel(model.space[j - 1], P[:, j - 1], xu[j])
            total += sign * D * K[:, None]
    return _functional(model, u, np.array([xu[j] for j in u]), total, m)


# -- replicated studies -------------------------------------------------------


@dataclass(frozen=True)
class SubsetSummary:
    """Replicate statistics for one subset."""

    subset: tuple
    first_mean: float
    first_std: float
    second_mean: float
    second_std: float
    source: str
    estimates: tuple = field(repr=False, default=())
    dgsm_ratio_mean: Optional[float] = None
    dgsm_frob_ratio_mean: Optional[float] = None


@dataclass(frozen=True)
class StudyResult:
    """Output of :func:`replicate_study`."""

    model: ModelSpec
    summaries: tuple
    sigma_traces: tuple
    m: int
    replicates: int

    def summary(self, u) -> SubsetSummary:
        u = tuple(u)
        for s in self.summaries:
            if s.subset == u:
                return s
        raise KeyError(u)


def _worker_count(requested: int) -> int:
    cap = os.environ.get("PROXY_SA_THREADS")
    n = max(1, int(requested))
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValidationError(f"PROXY_SA_THREADS must be an integer, got {cap!r}") from None
    return n


def _one_replicate(model, subsets, r, *, sampler, m, seed, skip, scheme, mode, with_dgsm):
    unit = replicate_points(sampler, m, model.d, seed=seed, skip=skip, replicate=r)
    samples = transform(unit, model.space)
    sigma = output_covariance(model.evaluate(samples.values))
    out = []
    for u in subsets:
        stack = partial_stack(model, u, samples, scheme, mode)
        nub = nub_matrix(stack, samples)
        first, second = normalized_proxies(nub, sigma, model.n_out)
        _, se = _mean_and_se(nub_trace_terms(stack, samples)[:, None])
        est = ProxyEstimate(u, nub, trace_proxy(nub), frob_proxy(nub), first, second,
                            m, stack.source, float(se[0]))
        ratio = None
        if with_dgsm:
            dg = dgsm_matrix(stack)
            ratio = (dg.trace / sigma.trace, dg.frobenius / (dg.n * sigma.trace))
        out.append((est, ratio))
    return sigma.trace, out


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def replicate_study(model: ModelSpec, subsets, *, sampler: str = "sobol", m: int = 1000,
                    replicates: int = 30, seed: int = 0, skip: int = 0,
                    scheme: FDScheme = FDScheme(), mode: str = "auto",
                    with_dgsm: bool = False, workers: int = 1) -> StudyResult:
    """Run ``replicates`` independent proxy estimations and aggregate them.

    Replicate ``r`` uses Sobol points ``skip + r*m ...`` or the PRNG stream
    ``(seed, r)``. Means and sample standard deviations (``ddof=1``) are
    reported per subset for both proxy types. With ``with_dgsm`` the means of
    ``trace(DGSM_u) / trace(Sigma)`` and ``||DGSM_u||_F / (N trace(Sigma))``
    are also recorded.
    """
    if m < 2:
        raise InsufficientDataError("m must be >= 2")
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    subsets = [_subsets.normalize(u, model.d) for u in subsets]
    kwargs = dict(sampler=sampler, m=m, seed=seed, skip=skip, scheme=scheme, mode=mode,
                  with_dgsm=with_dgsm)
    n_workers = _worker_count(workers)
    if n_workers == 1:
        runs = [_one_replicate(model, subsets, r, **kwargs) for r in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            runs = list(pool.map(lambda r: _one_replicate(model, subsets, r, **kwargs), range(replicates)))

    summaries = []
    for k, u in enumerate(subsets):
        ests = tuple(run[1][k][0] for run in runs)
        first = [e.ub_first_type for e in ests]
        second = [e.ub_second_type for e in ests]
        ratios = [run[1][k][1] for run in runs]
        summaries.append(
            SubsetSummary(
                subset=u,
                first_mean=math.fsum(first) / len(first),
                first_std=_std(first),
                second_mean=math.fsum(second) / len(second),
                second_std=_std(second),
                source=ests[0].source,
                estimates=ests,
                dgsm_ratio_mean=math.fsum(r[0] for r in ratios) / len(ratios) if with_dgsm else None,
                dgsm_frob_ratio_mean=math.fsum(r[1] for r in ratios) / len(ratios) if with_dgsm else None,
            )
        )
    return StudyResult(model, tuple(summaries), tuple(run[0] for run in runs), m, replicates)
