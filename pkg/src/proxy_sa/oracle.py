"""Ground truth for the estimators.

* Jansen pick-freeze estimates of total-effect covariance matrices.
* Closed-form total and total-interaction indices of the built-in models.
* Tensor Gauss-Legendre checks, at ``d <= 2``, of the single-sample variance
  identity, the weighted Poincaré inequality and the derivative-based ANOVA
  structure (centering, orthogonality, variance split).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Optional

import numpy as np

from . import subsets as _subsets
from .differentiation import FDScheme, partial_stack
from .errors import (
    CapabilityError,
    DegenerateModelError,
    IncompleteInputError,
    InsufficientDataError,
    ValidationError,
)
from .estimators import CovMatrix, _mean_and_se, output_covariance
from .models import ModelSpec, builtin
from .sampling import SeedPolicy

DEFAULT_TOL = 1e-10
ANOVA_TOL = 1e-8


@dataclass(frozen=True)
class ReferenceIndex:
    """A reference value of a sensitivity index.

    ``value_first_type`` is ``trace(D) / trace(Sigma)``; ``value_second_type``
    is ``||D||_F / (N trace(Sigma))``. ``matrix`` holds the non-normalised
    ``D`` when available and ``std_error`` the standard error of its trace.
    """

    subset: tuple
    kind: str
    value_first_type: float
    value_second_type: float
    provenance: str
    matrix: Optional[CovMatrix] = field(default=None, repr=False)
    sigma: Optional[CovMatrix] = field(default=None, repr=False)
    std_error: float = float("nan")


@dataclass(frozen=True)
class EqualityReport:
    """Outcome of one numerical check.

    ``relation`` is ``"=="`` (pass iff ``residual <= tolerance``) or ``"<="``
    (lhs is dominated by rhs; pass iff ``slack >= -tolerance``).
    """

    statement: str
    relation: str
    lhs: object
    rhs: object
    residual: float
    tolerance: float
    slack: float = float("nan")

    @property
    def passed(self) -> bool:
        if self.relation == "<=":
            return self.slack >= -self.tolerance
        return self.residual <= self.tolerance

    def as_dict(self) -> dict:
        def plain(v):
            return np.asarray(v).tolist()

        return {
            "statement": self.statement,
            "relation": self.relation,
            "lhs": plain(self.lhs),
            "rhs": plain(self.rhs),
            "residual": self.residual,
            "tolerance": self.tolerance,
            "slack": self.slack,
            "passed": self.passed,
        }


def _reference(u, D: CovMatrix, sigma: CovMatrix, provenance: str, std_error=float("nan")):
    tr = sigma.trace
    if not tr > 0:
        raise DegenerateModelError("output variance is zero; indices are undefined")
    kind = "total" if len(u) == 1 else "total_interaction"
    return ReferenceIndex(u, kind, D.trace / tr, D.frobenius / (float(D.n) * tr),
                          provenance, D, sigma, std_error)


# -- pick-freeze ---------------------------------------------------------------


def jansen_total(model: ModelSpec, u, A: np.ndarray, B: np.ndarray):
    """Jansen estimate of ``D_u^tot`` from two independent input matrices.

    Returns ``(D, terms)`` where ``terms`` are the per-row contributions to
    ``trace(D)``.
    """
    u = _subsets.normalize(u, model.d)
    cols = [j - 1 for j in u]
    AB = np.array(A, dtype=float, copy=True)
    AB[:, cols] = B[:, cols]
    diff = model.evaluate(A) - model.evaluate(AB)
    m, n = diff.shape
    outer = 0.5 * (diff[:, :, None] * diff[:, None, :]).reshape(m, n * n)
    mean, _ = _mean_and_se(outer)
    D = CovMatrix(mean.reshape(n, n))
    return D, 0.5 * np.sum(diff**2, axis=1)


def pick_freeze_total(model: ModelSpec, u, m: int, seed: SeedPolicy = SeedPolicy()) -> ReferenceIndex:
    """Total (or, through :func:`superset_index`, total-interaction) reference by pick-freeze.

    Two independent ``m x d`` PRNG matrices are drawn from ``seed``. The output
    covariance is estimated from both.
    """
    if m < 2:
        raise InsufficientDataError("pick-freeze needs m >= 2")
    u = _subsets.normalize(u, model.d)
    P = seed.generator().random((m, 2 * model.d))
    P = np.clip(P, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    A = model.space.quantile(P[:, : model.d])
    B = model.space.quantile(P[:, model.d :])
    D, terms = jansen_total(model, u, A, B)
    sigma = output_covariance(np.vstack([model.evaluate(A), model.evaluate(B)]))
    _, se = _mean_and_se(terms[:, None])
    ref = _reference(u, D, sigma, "pick-freeze", float(se[0]))
    return ReferenceIndex(u, "total", ref.value_first_type, ref.value_second_type,
                          "pick-freeze", D, sigma, float(se[0]))


def superset_index(totals: Mapping, u=None, sigma: Optional[CovMatrix] = None) -> ReferenceIndex:
    """Total-interaction index from total-effect matrices by inclusion-exclusion.

    ``D_u^sup = sum_{nonempty v subset u} (-1)^{|v|+1} D_v^tot``.

    ``totals`` maps subsets to matrices (or scalars). Without ``sigma`` the
    inputs are taken as already normalised.

    Raises
    ------
    IncompleteInputError
        If some non-empty subset of ``u`` is missing.
    """
    mats = {_subsets.normalize(k): v for k, v in totals.items()}
    if u is None:
        u = max(mats, key=len)
    u = _subsets.normalize(u)
    acc = None
    for v in _subsets.nonempty_subsets(u):
        if v not in mats:
            raise IncompleteInputError(f"missing total for subset {_subsets.render(v)}")
        M = np.atleast_2d(np.asarray(mats[v], dtype=float))
        term = (-1) ** (len(v) + 1) * M
        acc = term if acc is None else acc + term
    D = CovMatrix(acc)
    if sigma is None:
        sigma = CovMatrix(np.eye(D.n) / D.n)
    provenance = "pick-freeze"
    ref = _reference(u, D, sigma, provenance)
    kind = "total" if len(u) == 1 else "total_interaction"
    return ReferenceIndex(u, kind, ref.value_first_type, ref.value_second_type, provenance, D, sigma)


# -- closed forms --------------------------------------------------------------


def _product_matrices(mus, covs, order):
    """Sigma and D^sup for a product of independent factors (entrywise over outputs)."""
    d = len(mus)
    seconds = [C + np.outer(mu, mu) for mu, C in zip(mus, covs)]
    sigma = np.prod(seconds, axis=0) - np.prod([np.outer(mu, mu) for mu in mus], axis=0)
    sup = {}
    for u in _subsets.up_to_order(d, order):
        mats = [covs[j - 1] if j in u else seconds[j - 1] for j in range(1, d + 1)]
        sup[u] = np.prod(mats, axis=0)
    return sigma, sup


def _ishigami_matrices(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mu_q = math.pi**4 / 5
    var_q = math.pi**8 / 9 - math.pi**8 / 25
    c1 = 1.0 + b * mu_q
    V1 = 0.5 * np.outer(c1, c1)
    V2 = np.outer(a, a) / 8.0
    V13 = 0.5 * var_q * np.outer(b, b)
    Z = np.zeros_like(V1)
    sup = {(1,): V1 + V13, (2,): V2, (3,): V13, (1, 2): Z, (1, 3): V13, (2, 3): Z}
    return V1 + V2 + V13, sup


def _sinc(t):
    return np.sinc(np.asarray(t) / math.pi)


def _var_shifted(kind, alpha, coefs):
    """Var of cos/sin(alpha + sum_j c_j X_j) with X_j ~ U(-1, 1)."""
    p1 = float(np.prod(_sinc(coefs)))
    p2 = float(np.prod(_sinc(2 * np.asarray(coefs))))
    if kind == "cos":
        second = 0.5 + 0.5 * math.cos(2 * alpha) * p2
        first = math.cos(alpha) * p1
    else:
        second = 0.5 - 0.5 * math.cos(2 * alpha) * p2
        first = math.sin(alpha) * p1
    return second - first**2


def _block_additive_matrices(offsets, coefs, order):
    from .models import BLOCK_ADDITIVE_BLOCKS

    c = np.asarray(coefs, dtype=float)
    kinds = ("cos", "sin")

    def total_in_block(k, v):
        block = BLOCK_ADDITIVE_BLOCKS[k]
        if not v:
            return 0.0
        rest = [j for j in block if j not in v]
        full = _var_shifted(kinds[k], offsets[k], c[np.array(block) - 1])
        # Var E[h | rest] = P1(v)^2 Var h(alpha + S_rest); the E over v factors out.
        p1 = float(np.prod(_sinc(c[np.array(v) - 1])))
        cond = p1**2 * _var_shifted(kinds[k], offsets[k], c[np.array(rest) - 1]) if rest else 0.0
        return full - cond

    def total(v):
        return sum(total_in_block(k, [j for j in v if j in b]) for k, b in enumerate(BLOCK_ADDITIVE_BLOCKS))

    sigma = total(tuple(range(1, 7)))
    sup = {}
    for u in _subsets.up_to_order(6, order):
        if any(set(u) <= set(b) for b in BLOCK_ADDITIVE_BLOCKS):
            sup[u] = sum((-1) ** (len(v) + 1) * total(v) for v in _subsets.nonempty_subsets(u))
        else:
            sup[u] = 0.0
    return np.array([[sigma]]), {u: np.array([[val]]) for u, val in sup.items()}


def closed_form_matrices(model, order: int = 2):
    """``(Sigma, {u: D_u^sup})`` for a built-in model, subsets up to ``order``."""
    if isinstance(model, str):
        model = builtin(model)
    p = model.params
    if model.name in ("ishigami", "ishigami_mv"):
        sigma, sup = _ishigami_matrices(p["a"], p["b"])
        sup = {u: v for u, v in sup.items() if len(u) <= order}
    elif model.name == "gsobol_mv":
        A = np.asarray(p["A"], dtype=float)
        mus = [np.ones(A.shape[0]) for _ in range(A.shape[1])]
        covs = [np.outer(1 / (1 + A[:, j]), 1 / (1 + A[:, j])) / 3.0 for j in range(A.shape[1])]
        sigma, sup = _product_matrices(mus, covs, order)
    elif model.name == "cdf_product":
        a = np.atleast_2d(np.asarray(p["a"], dtype=float).T).T
        b = np.atleast_2d(np.asarray(p["b"], dtype=float).T).T
        if a.shape[0] != model.d:
            a, b = a.T, b.T
        mus = [a[j] / 2 + b[j] for j in range(model.d)]
        covs = [np.outer(a[j], a[j]) / 12.0 for j in range(model.d)]
        sigma, sup = _product_matrices(mus, covs, order)
    elif model.name == "block_additive":
        sigma, sup = _block_additive_matrices(p["offsets"], p["coefficients"], order)
    else:
        raise CapabilityError(f"no closed form for model {model.name!r}")
    return CovMatrix(sigma), {u: CovMatrix(v) for u, v in sup.items()}


def closed_form_reference(model, order: int = 2) -> list:
    """Analytic total (singletons) and total-interaction (pairs) indices."""
    sigma, sup = closed_form_matrices(model, order)
    return [_reference(u, D, sigma, "closed-form") for u, D in sorted(sup.items(), key=lambda kv: _subsets.sort_key(kv[0]))]


# -- quadrature ----------------------------------------------------------------


def gauss_legendre_unit(n: int):
    """Gauss-Legendre nodes and weights on ``(0, 1)``; weights sum to 1."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _tensor_grid(model: ModelSpec, n: int):
    t, w = gauss_legendre_unit(n)
    d = model.d
    P = np.array(list(product(t, repeat=d)))
    W = np.prod(np.array(list(product(w, repeat=d))), axis=1)
    return model.space.quantile(P), W


def _require_low_dim(model, limit=2):
    if model.d > limit:
        raise CapabilityError(f"tensor quadrature is limited to d <= {limit}, got d={model.d}")


def _weighted_cov(values, W):
    mean = W @ values
    R = values - mean
    return (R * W[:, None]).T @ R


def quadrature_variance(model: ModelSpec, nodes: int = 64) -> CovMatrix:
    """Output covariance by tensor Gauss-Legendre quadrature in probability space."""
    _require_low_dim(model)
    X, W = _tensor_grid(model, nodes)
    return CovMatrix(_weighted_cov(model.evaluate(X), W))


def _derivatives(model, u, X, scheme, mode):
    return partial_stack(model, u, X, scheme, mode).values


def verify_variance_identity(model: ModelSpec, u=None, nodes: int = 128, *, expect: str = "auto",
                             tolerance: float = DEFAULT_TOL, scheme: FDScheme = FDScheme(),
                             mode: str = "auto") -> EqualityReport:
    """Compare ``Var(prod_{j in u} (I - E_j) f)`` with its weighted-derivative bound.

    The right-hand side is ``2^-|u| E[d_u f d_u f^T prod_{j in u} F_j (1 - F_j) / rho_j^2]``.
    For ``cdf_product`` (``expect="auto"``) the two must agree; otherwise
    the check is the Loewner inequality ``lhs <= rhs`` through the smallest
    eigenvalue of ``rhs - lhs``.
    """
    _require_low_dim(model)
    u = _subsets.normalize(u if u is not None else range(1, model.d + 1), model.d)
    if expect == "auto":
        expect = "equality" if model.name == "cdf_product" else "inequality"
    t, w = gauss_legendre_unit(nodes)
    X, W = _tensor_grid(model, nodes)
    shape = (nodes,) * model.d + (model.n_out,)
    H = model.evaluate(X).reshape(shape)
    for j in u:
        wj = w.reshape([-1 if k == j - 1 else 1 for k in range(model.d)] + [1])
        H = H - np.sum(H * wj, axis=j - 1, keepdims=True)
    lhs = _weighted_cov(H.reshape(-1, model.n_out), W)
    D = _derivatives(model, u, X, scheme, mode)
    weight = np.ones(X.shape[0])
    for j in u:
        weight = weight * model.space[j - 1].poincare_weight(X[:, j - 1])
    rhs = (D * (W * weight)[:, None]).T @ D / 2.0 ** len(u)
    resid = float(np.max(np.abs(rhs - lhs)))
    slack = float(np.linalg.eigvalsh(0.5 * (rhs - lhs + (rhs - lhs).T))[0])
    tag = f"variance identity u={_subsets.render(u)} [{model.name}]"
    if expect == "equality":
        return EqualityReport(tag, "==", _squeeze(lhs), _squeeze(rhs), resid, tolerance, slack)
    return EqualityReport(tag.replace("identity", "inequality"), "<=", _squeeze(lhs), _squeeze(rhs),
                          resid, tolerance, slack)


def _squeeze(M):
    M = np.asarray(M)
    return float(M[0, 0]) if M.shape == (1, 1) else M


def _anova_quadrature(model, u, xu, inner, scheme, mode, chunk=512):
    """``f_u(x_u)`` by quadrature of the derivative-based alternating sum.

    ``xu`` holds outer points in probability space, shape ``(n_pts, |u|)``.
    Inner integrals use ``inner`` Gauss-Legendre nodes per smooth axis and
    ``inner`` per side of the kernel jump on differentiated axes.
    """
    d, n_out = model.d, model.n_out
    s, ws = gauss_legendre_unit(inner)
    pos = {j: k for k, j in enumerate(u)}
    total = np.zeros((xu.shape[0], n_out))
    for lo in range(0, xu.shape[0], chunk):
        pts = xu[lo : lo + chunk]
        n_pts = pts.shape[0]
        for w_set in _subsets.nonempty_subsets(u):
            for v in _subsets.nonempty_subsets(w_set):
                sign = (-1) ** (len(u) - len(w_set)) * (-1) ** (len(v) + 1)
                nodes, weights = [], []
                for j in range(1, d + 1):
                    if j in v:
                        p0 = pts[:, pos[j] : pos[j] + 1]
                        nodes.append(np.hstack([p0 * s, p0 + (1.0 - p0) * s]))
                        weights.append(np.hstack([p0 * ws, (1.0 - p0) * ws]))
                    elif j in w_set:
                        nodes.append(pts[:, pos[j] : pos[j] + 1])
                        weights.append(np.ones((n_pts, 1)))
                    else:
                        nodes.append(np.tile(s, (n_pts, 1)))
                        weights.append(np.tile(ws, (n_pts, 1)))
                sizes = [a.shape[1] for a in nodes]
                grids = np.meshgrid(*[np.arange(k) for k in sizes], indexing="ij")
                flat = [g.ravel() for g in grids]
                P = np.stack([nodes[j][:, flat[j]] for j in range(d)], axis=-1)  # (n_pts, k, d)
                Wt = np.prod([weights[j][:, flat[j]] for j in range(d)], axis=0)  # (n_pts, k)
                k = P.shape[1]
                X = model.space.quantile(P.reshape(-1, d))
                D = _derivatives(model, v, X, scheme, mode).reshape(n_pts, k, n_out)
                K = np.ones((n_pts, k))
                for j in v:
                    pj = P[:, :, j - 1]
                    rho = model.space[j - 1].pdf(X[:, j - 1]).reshape(n_pts, k)
                    K = K * (pj - (pj >= pts[:, pos[j] : pos[j] + 1])) / rho
                total[lo : lo + n_pts] += sign * np.einsum("pk,pkn->pn", Wt * K, D)
    return total


def anova_components_grid(model: ModelSpec, nodes: int = 128, inner: int = 12,
                          scheme: FDScheme = FDScheme(), mode: str = "auto"):
    """All derivative-based ANOVA components of a ``d = 2`` model on a GL grid.

    Returns ``(t, w, f, f0, comps)`` with ``comps[(1,)]`` of shape
    ``(n, N)``, ``comps[(2,)]`` of shape ``(n, N)`` and ``comps[(1, 2)]`` of
    shape ``(n, n, N)``.
    """
    if model.d != 2:
        raise CapabilityError(f"ANOVA structure checks need d = 2, got d={model.d}")
    t, w = gauss_legendre_unit(nodes)
    X, W = _tensor_grid(model, nodes)
    f = model.evaluate(X).reshape(nodes, nodes, model.n_out)
    f0 = W @ f.reshape(-1, model.n_out)
    comps = {
        (1,): _anova_quadrature(model, (1,), t[:, None], inner, scheme, mode),
        (2,): _anova_quadrature(model, (2,), t[:, None], inner, scheme, mode),
    }
    P12 = np.array(list(product(t, t)))
    comps[(1, 2)] = _anova_quadrature(model, (1, 2), P12, inner, scheme, mode).reshape(nodes, nodes, model.n_out)
    return t, w, f, f0, comps


def verify_anova_structure(model: ModelSpec, nodes: int = 128, inner: int = 12, *,
                           tolerance: float = ANOVA_TOL, scheme: FDScheme = FDScheme(),
                           mode: str = "auto") -> list:
    """Centering, orthogonality, variance split and reconstruction at ``d = 2``."""
    t, w, f, f0, comps = anova_components_grid(model, nodes, inner, scheme, mode)
    f1 = np.broadcast_to(comps[(1,)][:, None, :], f.shape)
    f2 = np.broadcast_to(comps[(2,)][None, :, :], f.shape)
    f12 = comps[(1, 2)]
    W2 = np.outer(w, w)
    full = {"1": f1, "2": f2, "1:2": f12}
    reports = []

    def add(statement, lhs, rhs, residual):
        reports.append(EqualityReport(f"{statement} [{model.name}]", "==", lhs, rhs, float(residual), tolerance))

    c1 = np.abs(w @ comps[(1,)]).max()
    c2 = np.abs(w @ comps[(2,)]).max()
    c12a = np.abs(np.einsum("i,ijk->jk", w, f12)).max()
    c12b = np.abs(np.einsum("j,ijk->ik", w, f12)).max()
    add("centering f_1 over x1", float(c1), 0.0, c1)
    add("centering f_2 over x2", float(c2), 0.0, c2)
    add("centering f_12 over x1", float(c12a), 0.0, c12a)
    add("centering f_12 over x2", float(c12b), 0.0, c12b)

    def inner_prod(A, B):
        return np.einsum("ij,ijk,ijl->kl", W2, A, B)

    names = list(full)
    for a_i in range(len(names)):
        for b_i in range(a_i + 1, len(names)):
            G = inner_prod(full[names[a_i]], full[names[b_i]])
            add(f"orthogonality f_{names[a_i]} vs f_{names[b_i]}", _squeeze(G), 0.0, np.abs(G).max())

    centered = f - f0
    var_f = inner_prod(centered, centered)
    var_sum = sum(inner_prod(full[k], full[k]) for k in names)
    add("variance split sum Var(f_u) = Var(f)", _squeeze(var_sum), _squeeze(var_f), np.abs(var_sum - var_f).max())

    recon = f0 + f1 + f2 + f12
    add("reconstruction f = f0 + f_1 + f_2 + f_12", 0.0, 0.0, np.abs(recon - f).max())
    return reports


# -- canned suites ---------------------------------------------------------------


def verification_suite(scope: str = "all", nodes: int = 128) -> list:
    """Reports for the ``verify`` command.

    ``scope`` is ``equalities``, ``anova``, ``inequalities`` or ``all``.
    """
    from .models import cdf_product, linear, restrict, trig_polynomial

    if scope not in ("equalities", "anova", "inequalities", "all"):
        raise ValidationError(f"unknown scope {scope!r}")
    reports = []
    if scope in ("equalities", "all"):
        one_d = cdf_product(a=[2.0], b=[1.0])
        reports.append(verify_variance_identity(one_d, (1,), nodes))
        two_d = cdf_product(a=[1.5, -0.7], b=[0.3, 2.0])
        for u in [(1,), (2,), (1, 2)]:
            reports.append(verify_variance_identity(two_d, u, nodes))
        multi = cdf_product(a=[[1.0, 2.0], [0.5, -1.0]], b=[[0.2, 0.1], [1.0, 0.4]])
        reports.append(verify_variance_identity(multi, (1, 2), nodes))
    if scope in ("anova", "all"):
        reports += verify_anova_structure(linear([1.0, 1.0]), nodes)
        reports += verify_anova_structure(cdf_product(a=[1.5, -0.7], b=[0.3, 2.0]), nodes)
        reports += verify_anova_structure(restrict(builtin("ishigami"), {2: 0.0}), nodes)
    if scope in ("inequalities", "all"):
        sine = trig_polynomial([0.0], [1.0])
        reports.append(verify_variance_identity(sine, (1,), nodes))
        rng = np.random.default_rng(20240101)
        for k in range(5):
            deg = int(rng.integers(1, 5))
            poly = trig_polynomial(rng.normal(size=deg), rng.normal(size=deg), float(rng.normal()))
            rep = verify_variance_identity(poly, (1,), nodes)
            reports.append(EqualityReport(f"{rep.statement} #{k}", rep.relation, rep.lhs, rep.rhs,
                                          rep.residual, rep.tolerance, rep.slack))
        for mdl in (linear([1.0, -2.0]), cdf_product(a=[1.5, -0.7], b=[0.3, 2.0]),
                    restrict(builtin("ishigami"), {2: 0.0})):
            reports.append(general_bound_report(mdl, nodes))
    return reports


def general_bound_report(model: ModelSpec, nodes: int = 128, tolerance: float = DEFAULT_TOL) -> EqualityReport:
    """Quadrature check of ``trace Var(f) <= sum_u trace NUB_u``."""
    from .bounds import general_bound_sum

    _require_low_dim(model)
    X, W = _tensor_grid(model, nodes)
    var = quadrature_variance(model, nodes).trace
    terms = {}
    for u in _subsets.nonempty_subsets(range(1, model.d + 1)):
        D = _derivatives(model, u, X, FDScheme(), "auto")
        weight = np.ones(X.shape[0])
        for j in u:
            weight = weight * model.space[j - 1].poincare_weight(X[:, j - 1])
        terms[u] = float(np.sum(W * weight * np.sum(D**2, axis=1))) / 2.0 ** len(u)
    bound = general_bound_sum(terms, model.d)
    return EqualityReport(f"general bound trace Var(f) <= sum NUB_u [{model.name}]", "<=",
                          var, bound, abs(bound - var), tolerance, bound - var)


__all__ = [
    "ReferenceIndex",
    "EqualityReport",
    "jansen_total",
    "pick_freeze_total",
    "superset_index",
    "closed_form_matrices",
    "closed_form_reference",
    "gauss_legendre_unit",
    "quadrature_variance",
    "verify_variance_identity",
    "anova_components_grid",
    "verify_anova_structure",
    "verification_suite",
    "general_bound_report",
]
