"""Continuous associative retrieval over dynamic context vectors.

The model keeps two projection matrices: one maps a raw query vector into
pattern space, the other maps context vectors into the same space.  Retrieval
scores the query pattern against every context pattern by dot product,
separates the scores with a softmax at inverse temperature gamma, and returns
the weight-averaged context pattern.  With an extra value map the same
computation is exactly single-head softmax attention.

Conventions (fixed throughout the package): sigma and u are row vectors;
context vectors are the columns of ``lam``; context patterns z_i are the
columns of Z = xi_k^T lam.  All arithmetic is float64.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ContextualHopfield",
    "ContextSet",
    "QueryState",
    "RetrievalResult",
    "AttentionView",
    "softmax",
    "hnc_retrieve",
    "attention_view",
]


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-score subtraction)."""
    scores = np.asarray(scores, dtype=np.float64)
    e = np.exp(scores - scores.max())
    return e / e.sum()


@dataclass(frozen=True)
class ContextualHopfield:
    """Retrieval model: projections ``xi_q``/``xi_k`` (d_m x d_q), value map
    ``w_v`` (d_q x d_q, identity by default) and inverse temperature ``gamma``.

    ``similarity`` and ``separation`` are fixed configuration tags
    (dot-product scoring separated by softmax); they exist so callers and
    tests can assert the configuration.
    """

    xi_q: np.ndarray
    xi_k: np.ndarray
    gamma: float = 1.0
    w_v: np.ndarray | None = None
    similarity: str = field(default="dot-product")
    separation: str = field(default="softmax")

    def __post_init__(self):
        xi_q = _as_matrix(self.xi_q, "xi_q")
        xi_k = _as_matrix(self.xi_k, "xi_k")
        if xi_q.shape != xi_k.shape:
            raise ValueError(f"xi_q shape {xi_q.shape} != xi_k shape {xi_k.shape}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.similarity != "dot-product" or self.separation != "softmax":
            raise ValueError("only dot-product similarity with softmax separation is supported")
        w_v = np.eye(xi_q.shape[1]) if self.w_v is None else _as_matrix(self.w_v, "w_v")
        if w_v.shape != (xi_q.shape[1], xi_q.shape[1]):
            raise ValueError(f"w_v shape {w_v.shape} incompatible with d_q={xi_q.shape[1]}")
        object.__setattr__(self, "xi_q", xi_q)
        object.__setattr__(self, "xi_k", xi_k)
        object.__setattr__(self, "w_v", w_v)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def d_m(self) -> int:
        return self.xi_q.shape[0]

    @property
    def d_q(self) -> int:
        return self.xi_q.shape[1]

    @classmethod
    def identity(cls, d: int, gamma: float = 1.0, w_v: np.ndarray | None = None) -> "ContextualHopfield":
        """Model with identity projections: pure associative completion in d dims."""
        eye = np.eye(d)
        return cls(xi_q=eye, xi_k=eye, gamma=gamma, w_v=w_v)


@dataclass(frozen=True)
class ContextSet:
    """M context vectors as the columns of ``lam`` (d_m x M)."""

    lam: np.ndarray

    def __post_init__(self):
        lam = _as_matrix(self.lam, "lam")
        if lam.shape[1] < 1:
            raise ValueError("context set must contain at least one vector")
        object.__setattr__(self, "lam", lam)

    @property
    def m(self) -> int:
        return self.lam.shape[1]

    @classmethod
    def from_vectors(cls, vectors) -> "ContextSet":
        return cls(np.column_stack([np.asarray(v, dtype=np.float64) for v in vectors]))

    def patterns(self, model: ContextualHopfield) -> np.ndarray:
        """Z = xi_k^T lam; column i is context pattern z_i."""
        return model.xi_k.T @ self.lam


@dataclass(frozen=True)
class QueryState:
    """Raw query ``sigma`` plus its pattern u = sigma xi_q."""

    sigma: np.ndarray
    u: np.ndarray

    @classmethod
    def from_sigma(cls, sigma, model: ContextualHopfield) -> "QueryState":
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (model.d_m,):
            raise ValueError(f"sigma shape {sigma.shape} != (d_m={model.d_m},)")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma contains non-finite entries")
        return cls(sigma=sigma, u=sigma @ model.xi_q)


@dataclass(frozen=True)
class RetrievalResult:
    """One retrieval step: pre-softmax scores, softmax weights, updated pattern."""

    u_new: np.ndarray
    weights: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class AttentionView:
    """The same retrieval written as attention: output = softmax(gamma Q K^T) V."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    output: np.ndarray


def hnc_retrieve(model: ContextualHopfield, ctx: ContextSet, query: QueryState) -> RetrievalResult:
    """Apply the retrieval update to the query pattern.

    scores = gamma * u Z with Z = xi_k^T lam, weights = softmax(scores),
    u_new = weights . lam^T xi_k (a convex combination of context patterns).
    """
    if ctx.lam.shape[0] != model.d_m:
        raise ValueError(f"context dimension {ctx.lam.shape[0]} != d_m={model.d_m}")
    if query.sigma.shape != (model.d_m,):
        raise ValueError(f"query dimension {query.sigma.shape} != d_m={model.d_m}")
    z = model.xi_k.T @ ctx.lam
    scores = model.gamma * (query.u @ z)
    weights = softmax(scores)
    u_new = weights @ (ctx.lam.T @ model.xi_k)
    return RetrievalResult(u_new=u_new, weights=weights, scores=scores)


def attention_view(model: ContextualHopfield, ctx: ContextSet, query: QueryState) -> AttentionView:
    """Build the attention matrices and output for one retrieval.

    Q = sigma xi_q, K = lam^T xi_k, V = lam^T xi_k w_v; the output equals
    hnc_retrieve(...).u_new @ w_v up to floating-point roundoff.
    """
    if ctx.lam.shape[0] != model.d_m:
        raise ValueError(f"context dimension {ctx.lam.shape[0]} != d_m={model.d_m}")
    q = query.sigma @ model.xi_q
    k = ctx.lam.T @ model.xi_k
    v = k @ model.w_v
    weights = softmax(model.gamma * (q @ k.T))
    return AttentionView(q=q, k=k, v=v, output=weights @ v)
