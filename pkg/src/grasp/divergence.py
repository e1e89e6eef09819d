"""f-divergence kinds with conjugate duals and subgradient inverses.

Each divergence bundles the generator f (convex on [0, inf), f(1) = 0), its
conjugate dual f*(s) = sup_{t>=0} (st - f(t)) together with the effective
domain of f*, and an inverse of the subdifferential that recovers t from
v in df(t).  The linear-minimization oracle in the solver relies on exact
conjugates, so custom divergences must supply all three callables; there is
no numeric-differentiation fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "FDivergence",
    "BernoulliPair",
    "KL",
    "TV",
    "HELLINGER",
    "DIVERGENCES",
    "get_divergence",
    "f_eval",
    "f_conjugate",
    "f_subgrad_inverse",
    "bernoulli_divergence",
    "bernoulli_divergence_many",
    "discrete_divergence_to_uniform",
]

_SIMPLEX_TOL = 1e-9
# exp() overflows above ~709; cap exponents so inverse maps stay finite.
_EXP_CAP = 700.0


@dataclass(frozen=True)
class FDivergence:
    """A divergence generator with its convex-analysis companions.

    ``f`` is the generator on t >= 0 with the continuous extension at t = 0.
    ``f_conj`` must return +inf outside its effective domain; ``conj_sup``
    is the supremum of that domain (np.inf when f* is finite everywhere).
    ``f_subgrad_inv(v)`` returns some t >= 0 with v in df(t), clamping v to
    the closure of range(df) when needed (documented, not an error).
    """

    kind: str
    f: Callable[[np.ndarray], np.ndarray]
    f_conj: Callable[[np.ndarray], np.ndarray]
    f_subgrad_inv: Callable[[np.ndarray], np.ndarray]
    conj_sup: float = np.inf
    # lim_{t->inf} f(t)/t; used for the b -> 0 continuous extension of the
    # Bernoulli form.  None means "estimate numerically" (custom kinds).
    recession_slope: Optional[float] = None

    def validate(self, grid: Optional[np.ndarray] = None) -> None:
        """Spot-check convexity on a grid and f(1) = 0 exactly."""
        if abs(float(self.f(np.asarray(1.0)))) > 1e-12:
            raise ValueError(f"divergence {self.kind!r}: f(1) != 0")
        if grid is None:
            grid = np.linspace(0.05, 8.0, 120)
        vals = self.f(grid)
        mid = self.f((grid[:-2] + grid[2:]) / 2.0)
        if np.any(mid > (vals[:-2] + vals[2:]) / 2.0 + 1e-9):
            raise ValueError(f"divergence {self.kind!r}: midpoint convexity fails")


@dataclass(frozen=True)
class BernoulliPair:
    """True and estimated success probabilities, both in [0, 1]."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise ValueError(f"probabilities out of [0,1]: a={self.a}, b={self.b}")


def _kl_f(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, safe * np.log(safe), 0.0)


def _kl_conj(s):
    s = np.asarray(s, dtype=float)
    return np.exp(np.minimum(s - 1.0, _EXP_CAP))


def _kl_subgrad_inv(v):
    # f'(t) = log t + 1, range all of R
    v = np.asarray(v, dtype=float)
    return np.exp(np.minimum(v - 1.0, _EXP_CAP))


def _tv_f(t):
    return 0.5 * np.abs(np.asarray(t, dtype=float) - 1.0)


def _tv_conj(s):
    s = np.asarray(s, dtype=float)
    out = np.maximum(s, -0.5)
    return np.where(s <= 0.5, out, np.inf)


def _tv_subgrad_inv(v):
    # df(1) = [-1/2, 1/2]; the kink point represents every attainable v.
    return np.ones_like(np.asarray(v, dtype=float))


def _hellinger_f(t):
    return (np.sqrt(np.asarray(t, dtype=float)) - 1.0) ** 2


def _hellinger_conj(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s < 1.0, s / (1.0 - s), np.inf)
    return out


def _hellinger_subgrad_inv(v):
    # f'(t) = 1 - 1/sqrt(t), range (-inf, 1); clamp at the upper boundary.
    v = np.minimum(np.asarray(v, dtype=float), 1.0 - 1e-12)
    return (1.0 - v) ** -2


KL = FDivergence(
    kind="kl",
    f=_kl_f,
    f_conj=_kl_conj,
    f_subgrad_inv=_kl_subgrad_inv,
    conj_sup=np.inf,
    recession_slope=math.inf,
)

TV = FDivergence(
    kind="tv",
    f=_tv_f,
    f_conj=_tv_conj,
    f_subgrad_inv=_tv_subgrad_inv,
    conj_sup=0.5,
    recession_slope=0.5,
)

HELLINGER = FDivergence(
    kind="hellinger",
    f=_hellinger_f,
    f_conj=_hellinger_conj,
    f_subgrad_inv=_hellinger_subgrad_inv,
    conj_sup=1.0,
    recession_slope=1.0,
)

DIVERGENCES = {"kl": KL, "tv": TV, "hellinger": HELLINGER}


def get_divergence(token: str) -> FDivergence:
    """Look up a built-in divergence by its string token."""
    try:
        return DIVERGENCES[token.lower()]
    except KeyError:
        raise ValueError(
            f"unknown divergence {token!r}; valid tokens: {', '.join(sorted(DIVERGENCES))}"
        ) from None


def custom_divergence(
    f: Callable,
    f_conj: Callable,
    f_subgrad_inv: Callable,
    conj_sup: float = np.inf,
    recession_slope: Optional[float] = None,
) -> FDivergence:
    """Build a custom divergence; all three callables are required."""
    div = FDivergence(
        kind="custom",
        f=f,
        f_conj=f_conj,
        f_subgrad_inv=f_subgrad_inv,
        conj_sup=conj_sup,
        recession_slope=recession_slope,
    )
    div.validate()
    return div


def f_eval(div: FDivergence, t) -> float:
    """Evaluate the generator f at t >= 0 (continuous extension at 0)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("f is defined on t >= 0")
    out = div.f(t_arr)
    return float(out) if np.ndim(t) == 0 else out


def f_conjugate(div: FDivergence, s) -> float:
    """Evaluate f*(s) = sup_{t>=0}(st - f(t)); +inf outside the effective domain."""
    out = div.f_conj(np.asarray(s, dtype=float))
    return float(out) if np.ndim(s) == 0 else out


def f_subgrad_inverse(div: FDivergence, v) -> float:
    """Return q >= 0 with v in df(q), clamping v to the attainable range."""
    out = div.f_subgrad_inv(np.asarray(v, dtype=float))
    return float(out) if np.ndim(v) == 0 else out


def _kl_bern(a: float, b: float) -> float:
    def term(p: float, q: float) -> float:
        if p == 0.0:
            return 0.0
        if q == 0.0:
            return math.inf
        return p * math.log(p / q)

    return term(a, b) + term(1.0 - a, 1.0 - b)


def bernoulli_divergence(div: FDivergence, pair: BernoulliPair) -> float:
    """D_f between Bernoulli(a) and Bernoulli(b).

    Built-in kinds use exact closed forms (TV reduces to |a - b|, KL to the
    cross-entropy excess, Hellinger to the squared-root differences), which
    also cover the degenerate b in {0, 1} by continuous extension.
    """
    a, b = pair.a, pair.b
    if div.kind == "tv":
        return abs(a - b)
    if div.kind == "kl":
        return _kl_bern(a, b)
    if div.kind == "hellinger":
        return (math.sqrt(a) - math.sqrt(b)) ** 2 + (
            math.sqrt(1.0 - a) - math.sqrt(1.0 - b)
        ) ** 2
    return _generic_bern(div, a, b)


def _generic_bern(div: FDivergence, a: float, b: float) -> float:
    def term(p: float, q: float) -> float:
        # q * f(p/q); for q -> 0 the limit is p * lim f(t)/t.
        if q > 0.0:
            return q * float(div.f(np.asarray(p / q)))
        if p == 0.0:
            return 0.0
        slope = div.recession_slope
        if slope is None:
            slope = float(div.f(np.asarray(1e12))) / 1e12
        return p * slope

    return term(a, b) + term(1.0 - a, 1.0 - b)


def bernoulli_divergence_many(div: FDivergence, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized D_f(Bern(a_i) || Bern(b_i)) for probability arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if div.kind == "tv":
        return np.abs(a - b)
    if div.kind == "kl":
        def xlogx_over(p, q):
            ratio = np.where((p > 0) & (q > 0), p / np.where(q > 0, q, 1.0), 1.0)
            out = np.where(p > 0, p * np.log(ratio), 0.0)
            return np.where((p > 0) & (q == 0), np.inf, out)

        return xlogx_over(a, b) + xlogx_over(1.0 - a, 1.0 - b)
    if div.kind == "hellinger":
        return (np.sqrt(a) - np.sqrt(b)) ** 2 + (np.sqrt(1 - a) - np.sqrt(1 - b)) ** 2
    return np.array(
        [_generic_bern(div, float(ai), float(bi)) for ai, bi in zip(np.ravel(a), np.ravel(b))]
    ).reshape(a.shape)


def discrete_divergence_to_uniform(div: FDivergence, p) -> float:
    """(1/L) * sum_l f(L * p_l) for a probability vector p of length L."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("p must be a nonempty 1-D probability vector")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > _SIMPLEX_TOL:
        raise ValueError("p is not on the probability simplex")
    L = p.size
    return float(np.sum(div.f(L * p)) / L)
