"""Model abstraction and the built-in test functions.

A :class:`ModelSpec` wraps a vectorised map from ``(m, d)`` inputs to
``(m, N)`` outputs, its input space and, optionally, closed-form
cross-partial derivatives. Built-ins are created with :func:`builtin`::

    >>> f = builtin("ishigami")
    >>> f.evaluate([np.pi / 2, 0.0, 0.0])
    array([1.])
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import subsets as _subsets
from .errors import CapabilityError, DomainError, ShapeError, UnknownModelError, ValidationError
from .marginals import InputSpace, uniform

GSOBOL_DEFAULT_A = np.array(
    [
        [0, 0, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52, 6.52],
        [0, 1, 4.5, 9, 99, 99, 99, 99, 99, 99],
        [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        [50, 50, 50, 50, 50, 50, 50, 50, 50, 50],
    ],
    dtype=float,
)

ISHIGAMI_MV_A = (7.0, 5.896, 6.494)
ISHIGAMI_MV_B = (0.1, 0.1, 0.125)

BLOCK_ADDITIVE_OFFSETS = (-0.8, 0.5)
BLOCK_ADDITIVE_COEFS = (-1.1, 1.0, 1.0, 0.9, 1.1, -1.1)
BLOCK_ADDITIVE_BLOCKS = ((1, 3, 5), (2, 4, 6))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A deterministic model ``f: R^d -> R^N`` on a product input space.

    Attributes
    ----------
    name : str
    space : InputSpace
    n_out : int
        Output dimension ``N``.
    func : callable
        ``func(X)`` maps an ``(m, d)`` array to an ``(m, N)`` array.
    partials : callable or None
        ``partials(u, X)`` returns the cross-partial ``d^|u| f / dx_u`` at the
        rows of ``X`` as an ``(m, N)`` array; ``u`` is a sorted 1-based tuple.
    max_partial_order : int or None
        Largest ``|u|`` for which ``partials`` is valid. ``None`` means any.
    interaction_sets : tuple or None
        For each input ``j``, the subsets containing ``j`` whose cross-partial
        is not identically zero.
    smoothness_note : str
        Non-empty for models that are only differentiable almost everywhere.
    params : mapping
        Parameters the model was built with, echoed in reports.
    """

    name: str
    space: InputSpace
    n_out: int
    func: Callable = field(repr=False)
    partials: Optional[Callable] = field(default=None, repr=False)
    max_partial_order: Optional[int] = None
    interaction_sets: Optional[tuple] = None
    smoothness_note: str = ""
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.n_out < 1:
            raise ValidationError("n_out must be >= 1")

    @property
    def d(self) -> int:
        return self.space.d

    def _as_rows(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ShapeError(f"{self.name} expects points with {self.d} coordinates, got shape {np.shape(x)}")
        return X, single

    def _check_domain(self, X):
        inside = self.space.contains(X)
        if not np.all(inside):
            row = int(np.flatnonzero(~inside)[0])
            raise DomainError(f"{self.name}: point {X[row].tolist()} (row {row}) is outside the support")

    def _shape_output(self, out, m):
        out = np.asarray(out, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape != (m, self.n_out):
            raise ShapeError(f"{self.name} returned shape {out.shape}, expected {(m, self.n_out)}")
        return out

    def evaluate(self, x) -> np.ndarray:
        """``f(x)``; a single point gives an ``(N,)`` vector, rows give ``(m, N)``."""
        X, single = self._as_rows(x)
        self._check_domain(X)
        out = self._shape_output(self.func(X), X.shape[0])
        return out[0] if single else out

    def supports_partial(self, u) -> bool:
        if self.partials is None:
            return False
        return self.max_partial_order is None or len(tuple(u)) <= self.max_partial_order

    def analytic_partial(self, u, x) -> np.ndarray:
        """Closed-form ``d^|u| f / dx_u`` at ``x``.

        Raises
        ------
        CapabilityError
            If the model has no closed form for this subset.
        """
        u = _subsets.normalize(u, self.d)
        if not self.supports_partial(u):
            raise CapabilityError(f"{self.name} has no analytic partial for subset {_subsets.render(u)}")
        X, single = self._as_rows(x)
        self._check_domain(X)
        out = self._shape_output(self.partials(u, X), X.shape[0])
        return out[0] if single else out


# -- built-ins ---------------------------------------------------------------


def _ishigami_family(name, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("ishigami coefficients a and b must be vectors of equal length")

    def func(X):
        x1, x2, x3 = X[:, 0:1], X[:, 1:2], X[:, 2:3]
        return np.sin(x1) * (1.0 + b * x3**4) + a * np.sin(x2) ** 2

    def partials(u, X):
        x1, x2, x3 = X[:, 0:1], X[:, 1:2], X[:, 2:3]
        if u == (1,):
            return np.cos(x1) * (1.0 + b * x3**4)
        if u == (2,):
            return a * np.sin(2.0 * x2)
        if u == (3,):
            return 4.0 * b * x3**3 * np.sin(x1)
        if u == (1, 3):
            return 4.0 * b * x3**3 * np.cos(x1)
        return np.zeros((X.shape[0], a.size))

    return ModelSpec(
        name=name,
        space=InputSpace.uniform(-math.pi, math.pi, 3),
        n_out=a.size,
        func=func,
        partials=partials,
        interaction_sets=(((1,), (1, 3)), ((2,),), ((3,), (1, 3))),
        params={"a": a.tolist(), "b": b.tolist()},
    )


def ishigami(a: float = 7.0, b: float = 0.1) -> ModelSpec:
    """``sin x1 + a sin^2 x2 + b x3^4 sin x1`` on ``(-pi, pi)^3``."""
    return _ishigami_family("ishigami", [a], [b])


def ishigami_mv(a: Sequence[float] = ISHIGAMI_MV_A, b: Sequence[float] = ISHIGAMI_MV_B) -> ModelSpec:
    """Three-output Ishigami function, one ``(a, b)`` pair per output."""
    return _ishigami_family("ishigami_mv", a, b)


def block_additive(
    offsets: Sequence[float] = BLOCK_ADDITIVE_OFFSETS,
    coefficients: Sequence[float] = BLOCK_ADDITIVE_COEFS,
) -> ModelSpec:
    """``cos(t1) + sin(t2)`` with ``t1`` linear in x1, x3, x5 and ``t2`` in x2, x4, x6.

    Inputs are uniform on ``(-1, 1)^6``.
    """
    offsets = np.asarray(offsets, dtype=float)
    c = np.asarray(coefficients, dtype=float)
    if offsets.shape != (2,) or c.shape != (6,):
        raise ValidationError("block_additive needs 2 offsets and 6 coefficients")
    blocks = [np.array(b) - 1 for b in BLOCK_ADDITIVE_BLOCKS]
    # cos for the first block, sin for the second; sin(t) = cos(t - pi/2).
    phases = (0.0, -math.pi / 2)

    def phase_sums(X):
        return [offsets[k] + X[:, idx] @ c[idx] for k, idx in enumerate(blocks)]

    def func(X):
        t1, t2 = phase_sums(X)
        return (np.cos(t1) + np.sin(t2))[:, None]

    def partials(u, X):
        for k, block in enumerate(BLOCK_ADDITIVE_BLOCKS):
            if set(u) <= set(block):
                t = phase_sums(X)[k]
                scale = float(np.prod(c[np.array(u) - 1]))
                return (scale * np.cos(t + phases[k] + len(u) * math.pi / 2))[:, None]
        return np.zeros((X.shape[0], 1))

    sets = []
    for j in range(1, 7):
        block = next(b for b in BLOCK_ADDITIVE_BLOCKS if j in b)
        sets.append(tuple(v for v in _subsets.nonempty_subsets(block) if j in v))

    return ModelSpec(
        name="block_additive",
        space=InputSpace.uniform(-1.0, 1.0, 6),
        n_out=1,
        func=func,
        partials=partials,
        interaction_sets=tuple(sets),
        params={"offsets": offsets.tolist(), "coefficients": c.tolist()},
    )


def gsobol_mv(A="default") -> ModelSpec:
    """Multi-output Sobol g-function, one output per row of ``A``.

    Output ``k`` is ``prod_j (|4 x_j - 2| + A[k, j]) / (1 + A[k, j])`` on
    ``(0, 1)^d``. Only first-order partials have a closed form; at the kink
    ``x_j = 1/2`` the derivative is taken as 0.
    """
    if isinstance(A, str):
        if A != "default":
            raise ValidationError(f"unknown A preset {A!r}")
        A = GSOBOL_DEFAULT_A
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] < 1:
        raise ValidationError("A must be a (N, d) matrix")
    if np.any(A < 0):
        raise ValidationError("entries of A must be >= 0")
    n_out, d = A.shape
    At = A.T  # (d, N)

    def factors(X):
        return (np.abs(4.0 * X - 2.0)[:, :, None] + At) / (1.0 + At)

    def func(X):
        return np.prod(factors(X), axis=1)

    def partials(u, X):
        (j,) = u
        j -= 1
        G = factors(X)
        others = np.prod(np.delete(G, j, axis=1), axis=1)
        slope = 4.0 * np.sign(4.0 * X[:, j : j + 1] - 2.0) / (1.0 + At[j])
        return slope * others

    return ModelSpec(
        name="gsobol_mv",
        space=InputSpace.uniform(0.0, 1.0, d),
        n_out=n_out,
        func=func,
        partials=partials,
        max_partial_order=1,
        smoothness_note="continuous but only differentiable almost everywhere (kink at x_j = 1/2)",
        params={"A": A.tolist()},
    )


def cdf_product(a=(1.0, 1.0), b=(0.0, 0.0), marginals=None) -> ModelSpec:
    """``prod_j (a_j F_j(x_j) + b_j)`` with ``F_j`` the CDF of input ``j``.

    ``a`` and ``b`` have shape ``(d,)`` for a scalar output or ``(d, N)`` for
    ``N`` outputs. ``marginals`` defaults to standard uniforms. With ``a = 0``
    the model is constant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim not in (1, 2) or a.shape[0] < 1:
        raise ValidationError(f"a and b must share shape (d,) or (d, N); got {a.shape} and {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    d, n_out = a.shape
    if marginals is None:
        space = InputSpace.uniform(0.0, 1.0, d)
    elif isinstance(marginals, InputSpace):
        space = marginals
    else:
        space = InputSpace(tuple(marginals))
    if space.d != d:
        raise ValidationError(f"{space.d} marginals given for {d} coefficient rows")

    def factors(X):
        F = space.cdf(X)
        return a[None] * F[:, :, None] + b[None]

    def func(X):
        return np.prod(factors(X), axis=1)

    def partials(u, X):
        G = factors(X)
        idx = np.array(u) - 1
        out = np.prod(np.delete(G, idx, axis=1), axis=1)
        for j in idx:
            rho = space[j].pdf(X[:, j])
            out = out * (a[j][None] * rho[:, None])
        return out

    return ModelSpec(
        name="cdf_product",
        space=space,
        n_out=n_out,
        func=func,
        partials=partials,
        params={"a": a.squeeze(-1).tolist() if n_out == 1 else a.tolist(),
                "b": b.squeeze(-1).tolist() if n_out == 1 else b.tolist(),
                "marginals": _describe_space(space)},
    )


def _describe_space(space: InputSpace):
    return [m.to_dict() if m.kind == "uniform" else {"kind": m.kind, "name": m.name} for m in space]


BUILTINS = {
    "ishigami": ishigami,
    "ishigami_mv": ishigami_mv,
    "block_additive": block_additive,
    "gsobol_mv": gsobol_mv,
    "cdf_product": cdf_product,
}


def builtin(name: str, **params) -> ModelSpec:
    """Build a registered model by name with optional parameter overrides.

    Raises
    ------
    UnknownModelError
        If ``name`` is not registered.
    ValidationError
        If ``params`` are malformed or not accepted by the model.
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownModelError(
            f"unknown model {name!r}; available: {', '.join(sorted(BUILTINS))}"
        ) from None
    if name == "cdf_product" and "marginals" in params:
        marg = params["marginals"]
        if isinstance(marg, (list, tuple)) and marg and isinstance(marg[0], Mapping):
            params = dict(params, marginals=InputSpace.from_list(marg))
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name}: {exc}") from exc


# -- helpers for user and test models -----------------------------------------


def from_callable(
    func: Callable,
    space: InputSpace,
    *,
    n_out: Optional[int] = None,
    partials: Optional[Callable] = None,
    max_partial_order: Optional[int] = None,
    vectorized: bool = True,
    name: str = "user",
    interaction_sets=None,
    smoothness_note: str = "",
) -> ModelSpec:
    """Wrap a user function.

    With ``vectorized=False`` the function takes one ``d``-vector and is
    applied row by row. ``n_out`` is inferred from one evaluation at the
    median point when omitted.
    """
    if vectorized:
        batched = func
    else:
        def batched(X):
            return np.array([np.atleast_1d(func(row)) for row in X])

    if n_out is None:
        mid = space.quantile(np.full((1, space.d), 0.5))
        probe = np.asarray(batched(mid), dtype=float)
        n_out = 1 if probe.ndim == 1 else probe.shape[1]
    return ModelSpec(
        name=name,
        space=space,
        n_out=n_out,
        func=batched,
        partials=partials,
        max_partial_order=max_partial_order,
        interaction_sets=interaction_sets,
        smoothness_note=smoothness_note,
    )


def restrict(model: ModelSpec, fixed: Mapping[int, float]) -> ModelSpec:
    """Freeze some inputs (1-based keys) and return a model of the rest."""
    d = model.d
    fixed = {int(k): float(v) for k, v in fixed.items()}
    _subsets.normalize(list(fixed), d)
    free = [j for j in range(1, d + 1) if j not in fixed]
    if not free:
        raise ValidationError("cannot freeze every input")
    free_idx = np.array(free) - 1

    def lift(X):
        full = np.empty((X.shape[0], d))
        for j, v in fixed.items():
            full[:, j - 1] = v
        full[:, free_idx] = X
        return full

    def func(X):
        return model.func(lift(X))

    partials = None
    if model.partials is not None:
        def partials(u, X):
            return model.partials(tuple(free[k - 1] for k in u), lift(X))

    return ModelSpec(
        name=f"{model.name}|fixed",
        space=InputSpace(tuple(model.space[j - 1] for j in free)),
        n_out=model.n_out,
        func=func,
        partials=partials,
        max_partial_order=model.max_partial_order,
        smoothness_note=model.smoothness_note,
        params={"base": model.name, "fixed": fixed},
    )


def linear(weights: Sequence[float], space: Optional[InputSpace] = None) -> ModelSpec:
    """``sum_j w_j x_j``; defaults to standard uniform inputs."""
    w = np.asarray(weights, dtype=float)
    space = space or InputSpace.uniform(0.0, 1.0, w.size)

    def partials(u, X):
        value = w[u[0] - 1] if len(u) == 1 else 0.0
        return np.full((X.shape[0], 1), value)

    return ModelSpec(
        name="linear",
        space=space,
        n_out=1,
        func=lambda X: (X @ w)[:, None],
        partials=partials,
        interaction_sets=tuple(((j,),) for j in range(1, w.size + 1)),
        params={"weights": w.tolist()},
    )


def trig_polynomial(cos_coefs: Sequence[float], sin_coefs: Sequence[float], const: float = 0.0) -> ModelSpec:
    """``c + sum_k (a_k cos kx + b_k sin kx)`` on ``(-pi, pi)``, ``k = 1..K``."""
    a = np.asarray(cos_coefs, dtype=float)
    b = np.asarray(sin_coefs, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("cosine and sine coefficient lists must have equal length")
    k = np.arange(1, a.size + 1)

    def func(X):
        kx = X[:, :1] * k
        return (const + np.cos(kx) @ a + np.sin(kx) @ b)[:, None]

    def partials(u, X):
        kx = X[:, :1] * k
        return ((-np.sin(kx) * k) @ a + (np.cos(kx) * k) @ b)[:, None]

    return ModelSpec(
        name="trig_polynomial",
        space=InputSpace((uniform(-math.pi, math.pi),)),
        n_out=1,
        func=func,
        partials=partials,
        params={"cos": a.tolist(), "sin": b.tolist(), "const": const},
    )


def all_interaction_sets(d: int) -> tuple:
    """Interaction sets of a model where every subset may interact."""
    return tuple(
        tuple(v for r in range(1, d + 1) for v in combinations(range(1, d + 1), r) if j in v)
        for j in range(1, d + 1)
    )
