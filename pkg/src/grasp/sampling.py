"""Counterfeit sampling, scoring, ranking and binning pipelines.

Produces the multinomial bin-count statistic V = (V_1, ..., V_L) from
held-out samples: each observation yields a randomized value w whose
conditional law matches Unif[0,1] exactly when the model under test equals
the true conditional probability, plus M counterfeit draws.  The original's
score rank among its counterfeits assigns it to one of L bins.

Draw order is fixed per sample (w, then the M counterfeit w-values, then
the M counterfeit feature rows in the model-X variant), each sample on its
own derived RNG substream, so results do not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scores import ProbModel, ScoreFn

__all__ = [
    "RngStream",
    "EvalSample",
    "BinCounts",
    "FeatureSampler",
    "draw_w",
    "rank",
    "assign_label",
    "grasp_counts_df",
    "grasp_counts_simple",
    "grasp_counts_modelx",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic stream addressed by (seed, stream_id).

    Identical (seed, stream_id) produce identical draw sequences, and
    ``child_generator(i)`` derives independent per-sample substreams that
    are stable across platforms and process layouts.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    def child_generator(self, index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, index)
        )
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class EvalSample:
    """One held-out observation: features, binary label, model score.

    ``eta`` optionally records the true conditional probability; synthetic
    generators fill it so oracle scores can be evaluated in experiments.
    """

    x: np.ndarray
    y: int
    eta_hat: float
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y}")
        if not (0.0 <= self.eta_hat <= 1.0):
            raise ValueError(f"eta_hat out of [0,1]: {self.eta_hat}")


@dataclass(frozen=True)
class BinCounts:
    """Multinomial counts over L rank-bins.

    ``K`` is the number of ranks per bin; ``K=None`` marks the simple
    variant (score T(x, w) = w binned directly), which corresponds to the
    K -> infinity limit and has no counterfeit count M.
    """

    counts: np.ndarray
    n: int
    L: int
    K: Optional[int] = None
    M: Optional[int] = None

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if self.L < 1 or counts.shape != (self.L,):
            raise ValueError("counts must have shape (L,) with L >= 1")
        if int(counts.sum()) != self.n:
            raise ValueError(f"counts sum {int(counts.sum())} != n {self.n}")
        if self.K is not None:
            if self.K < 1:
                raise ValueError("K must be >= 1")
            if self.M != self.K * self.L - 1:
                raise ValueError("M must equal K*L - 1")


@dataclass(frozen=True)
class FeatureSampler:
    """Distribution of counterfeit feature rows for the model-X variant.

    Modes: ``gaussian_iso`` draws mean + sigma * N(0, I_d); ``pool`` draws
    rows with replacement from an unlabeled feature matrix; ``paired``
    returns the original sample's own features (a degenerate one-row pool
    paired per sample, used to reduce model-X to the fixed-feature case).
    """

    mode: str
    mean: Optional[np.ndarray] = None
    sigma: float = 1.0
    pool: Optional[np.ndarray] = None

    @classmethod
    def gaussian_iso(cls, mean: np.ndarray, sigma: float) -> "FeatureSampler":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(mode="gaussian_iso", mean=np.asarray(mean, dtype=float), sigma=sigma)

    @classmethod
    def empirical_pool(cls, pool: np.ndarray) -> "FeatureSampler":
        pool = np.asarray(pool, dtype=float)
        if pool.ndim != 2 or pool.shape[0] == 0:
            raise ValueError("pool must be a nonempty 2-D array")
        return cls(mode="pool", pool=pool)

    @classmethod
    def paired_original(cls) -> "FeatureSampler":
        return cls(mode="paired")

    def draw(self, gen: np.random.Generator, m: int, original_x: np.ndarray) -> np.ndarray:
        if self.mode == "gaussian_iso":
            d = self.mean.shape[0]
            return self.mean + self.sigma * gen.standard_normal((m, d))
        if self.mode == "pool":
            idx = gen.integers(0, self.pool.shape[0], size=m)
            return self.pool[idx]
        if self.mode == "paired":
            return np.broadcast_to(original_x, (m, original_x.shape[0]))
        raise ValueError(f"unknown feature-sampler mode {self.mode!r}")


def draw_w(sample: EvalSample, rng: RngStream) -> float:
    """Draw w ~ Unif[0, eta_hat] when y = 1 and w ~ Unif[eta_hat, 1] when y = 0.

    Degenerate eta_hat in {0, 1} collapses the interval to its endpoint.
    """
    u = float(rng.generator().uniform())
    return _w_from_uniform(u, sample.y, sample.eta_hat)


def _w_from_uniform(u: float, y: int, eta_hat: float) -> float:
    if y == 1:
        return u * eta_hat
    return eta_hat + u * (1.0 - eta_hat)


def rank(t_orig: float, t_counterfeits: np.ndarray) -> int:
    """1 + #{i : t_orig >= t_counterfeits[i]}; ties count toward the original."""
    return 1 + int(np.count_nonzero(t_orig >= np.asarray(t_counterfeits)))


def assign_label(r: int, K: int, L: int) -> int:
    """Map rank r in [1, K*L] to its bin ceil(r / K)."""
    if not 1 <= r <= K * L:
        raise RuntimeError(f"rank {r} outside [1, {K * L}]; rank computation is broken")
    return (r + K - 1) // K


def _require_samples(samples: Sequence[EvalSample]) -> None:
    if len(samples) == 0:
        raise ValueError("samples must be nonempty")


def grasp_counts_df(
    samples: Sequence[EvalSample],
    score: ScoreFn,
    L: int,
    K: int,
    rng: RngStream,
) -> BinCounts:
    """Bin counts in the fixed-feature setting (counterfeits reuse each x).

    For each sample: draw w, draw M = K*L - 1 counterfeit values from
    Unif[0,1], score all candidates at the sample's own features, rank the
    original and increment the bin holding its rank block.
    """
    _require_samples(samples)
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    M = K * L - 1
    counts = np.zeros(L, dtype=np.int64)
    for j, sample in enumerate(samples):
        gen = rng.child_generator(j)
        w = _w_from_uniform(float(gen.uniform()), sample.y, sample.eta_hat)
        w_cf = gen.uniform(size=M)
        if score.is_external:
            t_orig = score.external_lookup(j, 0)
            t_cf = np.array([score.external_lookup(j, i + 1) for i in range(M)])
        else:
            m = M + 1
            x_mat = np.broadcast_to(sample.x, (m, sample.x.shape[0]))
            w_all = np.concatenate(([w], w_cf))
            eta_hat_all = np.full(m, sample.eta_hat)
            eta_all = None
            if score.needs_eta:
                if sample.eta is None:
                    raise ValueError("oracle score requires samples with true eta set")
                eta_all = np.full(m, sample.eta)
            t_all = score.evaluate(x_mat, w_all, eta_hat_all, eta_all)
            t_orig, t_cf = float(t_all[0]), t_all[1:]
        r = rank(t_orig, t_cf)
        counts[assign_label(r, K, L) - 1] += 1
    return BinCounts(counts=counts, n=len(samples), L=L, K=K, M=M)


def grasp_counts_simple(
    samples: Sequence[EvalSample],
    L: int,
    rng: RngStream,
) -> BinCounts:
    """Bin counts with the score T(x, w) = w: bin l covers ((l-1)/L, l/L].

    Equivalent in distribution to the ranked pipeline with the identity
    score as K grows; K is recorded as None since no counterfeits exist.
    """
    _require_samples(samples)
    if L < 1:
        raise ValueError("L must be >= 1")
    counts = np.zeros(L, dtype=np.int64)
    for j, sample in enumerate(samples):
        gen = rng.child_generator(j)
        w = _w_from_uniform(float(gen.uniform()), sample.y, sample.eta_hat)
        label = min(max(1, math.ceil(w * L)), L)
        counts[label - 1] += 1
    return BinCounts(counts=counts, n=len(samples), L=L, K=None, M=None)


def grasp_counts_modelx(
    samples: Sequence[EvalSample],
    score: ScoreFn,
    model: Optional[ProbModel],
    px: FeatureSampler,
    L: int,
    K: int,
    rng: RngStream,
) -> BinCounts:
    """Bin counts in the known-feature-distribution setting.

    Counterfeits are fresh pairs (x_tilde ~ P_X, w_tilde ~ Unif[0,1]); the
    model under test must be evaluable at counterfeit features whenever the
    score needs eta_hat there.
    """
    _require_samples(samples)
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    if score.needs_eta_hat and model is None:
        raise ValueError(f"score {score.kind!r} needs a model to score counterfeit features")
    M = K * L - 1
    counts = np.zeros(L, dtype=np.int64)
    for j, sample in enumerate(samples):
        gen = rng.child_generator(j)
        w = _w_from_uniform(float(gen.uniform()), sample.y, sample.eta_hat)
        w_cf = gen.uniform(size=M)
        x_cf = px.draw(gen, M, sample.x)
        if score.is_external:
            t_orig = score.external_lookup(j, 0)
            t_cf = np.array([score.external_lookup(j, i + 1) for i in range(M)])
        else:
            eta_hat_orig = np.array([sample.eta_hat])
            eta_hat_cf = model.evaluate(x_cf) if score.needs_eta_hat else np.zeros(M)
            eta_orig = eta_cf = None
            if score.needs_eta:
                if sample.eta is None:
                    raise ValueError("oracle score requires samples with true eta set")
                eta_orig = np.array([sample.eta])
                eta_cf = score.oracle_eta(x_cf)
            t_orig = float(
                score.evaluate(sample.x[None, :], np.array([w]), eta_hat_orig, eta_orig)[0]
            )
            t_cf = score.evaluate(x_cf, w_cf, eta_hat_cf, eta_cf)
        r = rank(t_orig, t_cf)
        counts[assign_label(r, K, L) - 1] += 1
    return BinCounts(counts=counts, n=len(samples), L=L, K=K, M=M)
