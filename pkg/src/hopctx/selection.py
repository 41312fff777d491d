"""Exemplar selection strategies for in-context prediction.

Three families are provided: uniform random selection (the baseline),
metric-based selection of the exemplars closest to a query, and active
selection, which ranks exemplars by a Monte-Carlo estimate of how well each
one predicts the rest of the pool when used as the sole context.  An
evaluation-only "instance best" strategy ranks exemplars by their true
per-query score against ground truth.

Sampling procedure (used everywhere randomness is needed, so results can be
reproduced by an independent implementation): draw from
``numpy.random.default_rng(seed)`` and take a Fisher-Yates prefix -- for
i = 0..k-1, swap position i with position i + rng.integers(n - i), then keep
the first k slots.  ``value_estimate`` seeds its own stream with
``(seed, exemplar_id)``; ``active_select`` draws one shared permutation from
``seed`` and gives every exemplar the first ``subsample`` entries of that
permutation after removing the exemplar itself, so all values are estimated
against the same probe set and the estimand's own pair never contributes.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Exemplar",
    "ExemplarPool",
    "ValueEstimate",
    "SelectionResult",
    "sample_prefix",
    "random_select",
    "metric_select",
    "value_estimate",
    "estimate_pool_values",
    "active_select",
    "instance_best_select",
    "mode_pattern",
]


@dataclass(frozen=True)
class Exemplar:
    """A labelled (x, y) pair.  ``latent_id`` is optional generator metadata
    (which latent pattern produced the pair); selection never reads it."""

    id: int
    x: np.ndarray
    y: np.ndarray
    latent_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))


class ExemplarPool:
    """Ordered pool of exemplars with unique integer ids."""

    def __init__(self, exemplars):
        self.exemplars = list(exemplars)
        if not self.exemplars:
            raise ValueError("pool must contain at least one exemplar")
        ids = [e.id for e in self.exemplars]
        if len(set(ids)) != len(ids):
            raise ValueError("exemplar ids must be unique within a pool")
        self._by_id = {e.id: e for e in self.exemplars}

    @property
    def size(self) -> int:
        return len(self.exemplars)

    def __len__(self) -> int:
        return len(self.exemplars)

    def __iter__(self):
        return iter(self.exemplars)

    def __getitem__(self, i) -> Exemplar:
        return self.exemplars[i]

    def by_id(self, exemplar_id: int) -> Exemplar:
        return self._by_id[exemplar_id]

    def x_matrix(self) -> np.ndarray:
        return np.stack([e.x for e in self.exemplars])

    def y_matrix(self) -> np.ndarray:
        return np.stack([e.y for e in self.exemplars])


@dataclass(frozen=True)
class ValueEstimate:
    """Monte-Carlo estimate of an exemplar's value as a single-shot predictor."""

    exemplar_id: int
    value: float
    sample_count: int
    scores: tuple | None = None
    failures: int = 0


@dataclass(frozen=True)
class SelectionResult:
    """Chosen exemplar ids (ordered as they should appear in the context),
    the strategy tag, and strategy-specific diagnostics."""

    chosen: tuple
    strategy: str
    diagnostics: dict = field(default_factory=dict)


def sample_prefix(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """First k slots of a Fisher-Yates shuffle of range(n) on the given stream."""
    idx = list(range(n))
    for i in range(k):
        j = i + int(rng.integers(n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


def _check_k(pool: ExemplarPool, k: int) -> None:
    if not 1 <= k <= pool.size:
        raise ValueError(f"k={k} out of range [1, {pool.size}]")


def safe_score(score_fn, y_hat, y) -> tuple[float, bool]:
    """Score a prediction, mapping malformed outputs to 0 instead of aborting."""
    try:
        s = float(score_fn(y_hat, y))
    except (ValueError, TypeError, ZeroDivisionError):
        return 0.0, False
    if not np.isfinite(s):
        return 0.0, False
    return s, True


def random_select(pool: ExemplarPool, k: int, seed: int) -> SelectionResult:
    """k distinct exemplars sampled uniformly without replacement.

    Chosen ids are listed in pool order.
    """
    _check_k(pool, k)
    rng = np.random.default_rng(seed)
    positions = sorted(sample_prefix(rng, pool.size, k))
    chosen = tuple(pool[i].id for i in positions)
    return SelectionResult(chosen=chosen, strategy="random", diagnostics={"seed": seed})


def metric_select(pool: ExemplarPool, k: int, query_x, metric: str = "euclidean") -> SelectionResult:
    """The k exemplars whose x is closest to the query.

    ``cosine`` maximizes cosine similarity, ``euclidean`` minimizes distance;
    ties break by ascending id.  Chosen ids are ordered by descending
    closeness.
    """
    _check_k(pool, k)
    query_x = np.asarray(query_x, dtype=np.float64)
    xs = pool.x_matrix()
    if query_x.shape != xs.shape[1:]:
        raise ValueError(f"query shape {query_x.shape} does not match pool x shape {xs.shape[1:]}")
    if metric == "euclidean":
        closeness = -np.linalg.norm(xs - query_x, axis=1)
    elif metric == "cosine":
        qn = np.linalg.norm(query_x)
        xn = np.linalg.norm(xs, axis=1)
        if qn == 0.0 or np.any(xn == 0.0):
            raise ValueError("cosine metric undefined for zero vectors")
        closeness = (xs @ query_x) / (xn * qn)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = sorted(range(pool.size), key=lambda i: (-closeness[i], pool[i].id))
    chosen = tuple(pool[i].id for i in order[:k])
    scores = {pool[i].id: float(closeness[i]) for i in order[:k]}
    return SelectionResult(chosen=chosen, strategy="metric", diagnostics={"metric": metric, "closeness": scores})


def _value_from_probe(exemplar: Exemplar, probe, oracle, score_fn, keep_scores: bool) -> ValueEstimate:
    # Fixed evaluation order so the mean is bitwise independent of pool order.
    probe = sorted(probe, key=lambda e: e.id)
    predict_many = getattr(oracle, "predict_many", None)
    if predict_many is not None and probe:
        y_hats = predict_many([exemplar], np.stack([o.x for o in probe]))
    else:
        y_hats = [oracle.predict([exemplar], o.x) for o in probe]
    scores = []
    failures = 0
    for y_hat, other in zip(y_hats, probe):
        s, ok = safe_score(score_fn, y_hat, other.y)
        if not ok:
            failures += 1
        scores.append(s)
    return ValueEstimate(
        exemplar_id=exemplar.id,
        value=float(np.mean(scores)),
        sample_count=len(scores),
        scores=tuple(scores) if keep_scores else None,
        failures=failures,
    )


def _probe_after_exclusion(pool: ExemplarPool, order: list[int], exclude_id: int, subsample) -> list[Exemplar]:
    members = [pool[i] for i in order if pool[i].id != exclude_id]
    if subsample == "all":
        return members
    return members[:subsample]


def value_estimate(
    e: Exemplar,
    pool: ExemplarPool,
    oracle,
    score_fn,
    subsample="all",
    seed: int = 0,
    keep_scores: bool = False,
) -> ValueEstimate:
    """Mean score of e as the sole context exemplar over probes j != e.

    With an integer ``subsample`` the probe set is a uniform sample of that
    size from the rest of the pool, drawn from the (seed, e.id) stream.
    """
    if pool.size < 2:
        raise ValueError("pool too small: value estimation needs at least 2 exemplars")
    if subsample != "all":
        if not 1 <= subsample <= pool.size - 1:
            raise ValueError(f"subsample={subsample} out of range [1, {pool.size - 1}]")
    rng = np.random.default_rng([seed, e.id])
    order = sample_prefix(rng, pool.size, pool.size)
    probe = _probe_after_exclusion(pool, order, e.id, subsample)
    return _value_from_probe(e, probe, oracle, score_fn, keep_scores)


def estimate_pool_values(
    pool: ExemplarPool,
    oracle,
    score_fn,
    subsample="all",
    seed: int = 0,
) -> list[ValueEstimate]:
    """Value estimates for every pool member against one shared probe sample.

    A single permutation is drawn per call; each exemplar's probe set is the
    first ``subsample`` entries of that permutation after dropping itself.
    Estimates come back in pool order.
    """
    if pool.size < 2:
        raise ValueError("pool too small: value estimation needs at least 2 exemplars")
    if subsample != "all":
        if not 1 <= subsample <= pool.size - 1:
            raise ValueError(f"subsample={subsample} out of range [1, {pool.size - 1}]")
    rng = np.random.default_rng(seed)
    order = sample_prefix(rng, pool.size, pool.size)
    estimates = []
    for e in pool:
        probe = _probe_after_exclusion(pool, order, e.id, subsample)
        estimates.append(_value_from_probe(e, probe, oracle, score_fn, keep_scores=False))
    return estimates


def active_select(
    pool: ExemplarPool,
    k: int,
    oracle,
    score_fn,
    subsample="all",
    seed: int = 0,
) -> SelectionResult:
    """Top-k exemplars by Monte-Carlo value, ties broken by ascending id.

    Chosen ids are ordered by descending value; diagnostics carry every
    estimate.
    """
    _check_k(pool, k)
    estimates = estimate_pool_values(pool, oracle, score_fn, subsample=subsample, seed=seed)
    ranked = sorted(estimates, key=lambda v: (-v.value, v.exemplar_id))
    chosen = tuple(v.exemplar_id for v in ranked[:k])
    return SelectionResult(
        chosen=chosen,
        strategy="active",
        diagnostics={"values": estimates, "seed": seed, "subsample": subsample},
    )


def instance_best_select(
    pool: ExemplarPool,
    query: tuple,
    k: int,
    oracle,
    score_fn,
) -> SelectionResult:
    """Evaluation-only: rank exemplars by their true score on one query.

    Each exemplar is scored as the sole context for the query against the
    ground-truth y; the top k come back in descending score order, ties by
    ascending id.
    """
    _check_k(pool, k)
    query_x, query_y = query
    query_y = np.asarray(query_y, dtype=np.float64)
    scored = []
    failures = 0
    for e in pool:
        y_hat = oracle.predict([e], query_x)
        s, ok = safe_score(score_fn, y_hat, query_y)
        if not ok:
            failures += 1
        scored.append((e.id, s))
    ranked = sorted(scored, key=lambda item: (-item[1], item[0]))
    chosen = tuple(eid for eid, _ in ranked[:k])
    return SelectionResult(
        chosen=chosen,
        strategy="oracle-instance-best",
        diagnostics={"scores": dict(scored), "failures": failures},
    )


def mode_pattern(patterns, tolerance: float) -> tuple[np.ndarray, int]:
    """Most frequent pattern under tolerance-equality clustering.

    Patterns whose coordinates all agree within ``tolerance`` join the same
    cluster, represented by its first member; ties between clusters break by
    first occurrence.  Returns (representative, multiplicity).
    """
    patterns = [np.asarray(p, dtype=np.float64) for p in patterns]
    if not patterns:
        raise ValueError("mode_pattern needs a non-empty pattern list")
    reps: list[np.ndarray] = []
    counts: list[int] = []
    for p in patterns:
        for i, rep in enumerate(reps):
            if p.shape == rep.shape and np.all(np.abs(p - rep) <= tolerance):
                counts[i] += 1
                break
        else:
            reps.append(p)
            counts.append(1)
    best = max(range(len(reps)), key=lambda i: (counts[i], -i))
    return reps[best], counts[best]
