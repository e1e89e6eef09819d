"""Minimization of chi-square-type objectives over f-divergence balls.

Computes U_tau(V) = min_p (1/n) sum_l (V_l - n p_l)^2 / denom_l over
probability vectors p with (1/L) sum_l f(L p_l) <= tau, where denom_l is
p_l + 1/L for the finite-sample variant and p_l for the asymptotic one.
The minimization runs conditional-gradient (Frank-Wolfe) steps; the step
size comes from an exact line search on the segment toward the oracle
point, falling back to the open-loop 1/(t+2) schedule whenever the search
cannot improve the iterate.  Each step calls a linear-minimization oracle
over the ball.

The LMO follows the two-variable dual min_{lam>0, eta} [lam*tau + eta +
(lam/L) sum_l f*((-eta - x_l)/lam)], whose stationarity recovers the
density ratios r_l = L q_l from the subgradient inverse of f at
(-x_l - eta)/lam.  KL admits a closed-form inner solve (a softmax family
indexed by lam), Hellinger a monotone scalar root, and total variation an
exact direct solution (its polyhedral conjugate makes the generic dual
recovery degenerate at kinks).  Custom divergences take the generic nested
scalar path.  Every oracle output is renormalized onto the simplex and, if
numeric noise pushed it outside the ball, contracted toward uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from .divergence import FDivergence, discrete_divergence_to_uniform
from .sampling import BinCounts

__all__ = [
    "StatVariant",
    "SimplexPoint",
    "SolverConfig",
    "SolverError",
    "UStatResult",
    "objective",
    "gradient",
    "lmo_fdiv_ball",
    "u_stat",
    "u_stat_exceeds",
    "solve_u_stat",
]

_FEAS_TOL = 1e-6
_SIMPLEX_TOL = 1e-9


class StatVariant(str, Enum):
    FINITE = "finite"
    ASYM = "asym"


class SolverError(RuntimeError):
    """Raised when an oracle cannot produce a usable point."""


@dataclass(frozen=True)
class SimplexPoint:
    """A probability vector; nonnegative, summing to one within 1e-9."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("p must be a 1-D vector")
        if np.any(p < -_SIMPLEX_TOL) or abs(float(p.sum()) - 1.0) > _SIMPLEX_TOL:
            raise ValueError("p is not on the probability simplex")


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    gap_tol: float = 1e-6
    dual_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.gap_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("max_iters >= 1 and positive tolerances required")


@dataclass(frozen=True)
class UStatResult:
    """Solve outcome plus diagnostics (iterations run, final duality gap)."""

    value: float
    minimizer: np.ndarray
    iterations: int
    gap: float
    converged: bool
    decided: Optional[bool] = None


def _counts(V) -> Tuple[np.ndarray, int, int]:
    if isinstance(V, BinCounts):
        return V.counts.astype(float), V.n, V.L
    arr = np.asarray(V, dtype=float)
    return arr, int(round(float(arr.sum()))), arr.size


def _point(p) -> np.ndarray:
    if isinstance(p, SimplexPoint):
        return p.p
    return np.asarray(p, dtype=float)


def objective(variant: StatVariant, V, p) -> float:
    """The variant's chi-square-type objective at p (extended-real)."""
    v, n, L = _counts(V)
    p = _point(p)
    dev2 = (v - n * p) ** 2
    if StatVariant(variant) is StatVariant.FINITE:
        return float(np.sum(dev2 / (p + 1.0 / L)) / n)
    zero = p <= 0.0
    if np.any(zero & (v > 0.0)):
        return math.inf
    terms = np.divide(dev2, p, out=np.zeros_like(dev2), where=~zero)
    return float(terms.sum() / n)


def gradient(variant: StatVariant, V, p) -> np.ndarray:
    """Analytic gradient of the variant objective; asym needs interior p."""
    v, n, L = _counts(V)
    p = _point(p)
    if StatVariant(variant) is StatVariant.ASYM:
        if np.any(p <= 0.0):
            raise ValueError("asym gradient undefined on the simplex boundary")
        return n - v**2 / (n * p**2)
    denom = p + 1.0 / L
    return (n * p - v) * (n * p + v + 2.0 * n / L) / (n * denom**2)


# ---------------------------------------------------------------------------
# Linear-minimization oracles over {q simplex : (1/L) sum f(L q_l) <= tau}
# ---------------------------------------------------------------------------


def _repair(q: np.ndarray, tau: float, div: FDivergence) -> np.ndarray:
    """Project oracle output back to the simplex and inside the ball.

    Renormalizes, then (rarely) contracts toward uniform by bisection when
    dual round-off leaves the divergence constraint violated by > 1e-6.
    """
    L = q.size
    q = np.maximum(q, 0.0)
    total = float(q.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise SolverError("oracle produced a degenerate point (sum <= 0 or non-finite)")
    q = q / total
    uni = np.full(L, 1.0 / L)

    def dist(point: np.ndarray) -> float:
        return float(np.sum(div.f(L * point)) / L)

    if dist(q) <= tau + _FEAS_TOL:
        return q
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dist(uni + mid * (q - uni)) <= tau:
            lo = mid
        else:
            hi = mid
    return uni + lo * (q - uni)


def _lmo_tv(x: np.ndarray, tau: float) -> np.ndarray:
    """Exact TV-ball oracle: move up to tau total mass from the largest-x
    bins (each holds 1/L) onto the smallest-x bin."""
    L = x.size
    q = np.full(L, 1.0 / L)
    budget = min(tau, (L - 1) / L)
    receiver = int(np.argmin(x))
    order = np.argsort(-x, kind="stable")
    moved = 0.0
    for idx in order:
        if idx == receiver or moved >= budget:
            continue
        take = min(1.0 / L, budget - moved)
        q[idx] -= take
        q[receiver] += take
        moved += take
    return q


def _lmo_kl(x: np.ndarray, tau: float, cfg: SolverConfig) -> np.ndarray:
    """KL-ball oracle: q(lam) = softmax(-x/lam); pick lam so KL(q||uniform)
    hits tau (the divergence is decreasing in lam)."""
    L = x.size

    def point(lam: float) -> np.ndarray:
        z = -x / lam
        z -= z.max()
        q = np.exp(z)
        return q / q.sum()

    def dist(q: np.ndarray) -> float:
        safe = np.maximum(q, 1e-300)
        return float(np.sum(q * np.log(L * safe)))

    lo, hi = 1e-8, 1e8
    if dist(point(lo)) <= tau:
        return point(lo)
    if dist(point(hi)) >= tau:
        return point(hi)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if dist(point(mid)) > tau:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-14:
            break
    return point(hi)


def _hellinger_ratios(x: np.ndarray, lam: float) -> np.ndarray:
    """Density ratios r_l = (lam / (lam + x_l + eta))^2 with eta solving
    mean(r) = 1 on eta > -lam - min(x)."""
    lo = -lam - float(x.min())

    def mean_r(eta: float) -> float:
        return float(np.mean((lam / (lam + x + eta)) ** 2))

    span = lam * (1.0 + x.size)
    hi = lo + span
    while mean_r(hi) > 1.0:
        span *= 2.0
        hi = lo + span
        if span > 1e20:
            raise SolverError("Hellinger oracle: eta bracket expansion failed")
    eta_lo = lo + 1e-300
    for _ in range(200):
        mid = 0.5 * (eta_lo + hi)
        if mean_r(mid) > 1.0:
            eta_lo = mid
        else:
            hi = mid
        if hi - eta_lo <= 1e-15 * (1.0 + abs(hi)):
            break
    eta = 0.5 * (eta_lo + hi)
    return (lam / (lam + x + eta)) ** 2


def _lmo_hellinger(x: np.ndarray, tau: float, cfg: SolverConfig) -> np.ndarray:
    L = x.size

    def point(lam: float) -> np.ndarray:
        r = _hellinger_ratios(x, lam)
        return r / float(r.sum())

    def dist(q: np.ndarray) -> float:
        return float(np.sum((np.sqrt(L * q) - 1.0) ** 2) / L)

    lo, hi = 1e-8, 1e8
    if dist(point(lo)) <= tau:
        return point(lo)
    if dist(point(hi)) >= tau:
        return point(hi)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if dist(point(mid)) > tau:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-14:
            break
    return point(hi)


def _bracket_minimum(fn: Callable[[float], float], a: float, b: float) -> Tuple[float, float]:
    """Expand [a, b] until a convex fn has an interior minimum."""
    fa, fb = fn(a), fn(b)
    width = b - a
    for _ in range(200):
        mid = 0.5 * (a + b)
        if fn(mid) <= min(fa, fb) or (math.isinf(fa) and math.isinf(fb)):
            return a, b
        if fa < fb:
            a -= width
            fa = fn(a)
        else:
            b += width
            fb = fn(b)
        width = b - a
    return a, b


def _golden_min(fn: Callable[[float], float], a: float, b: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(400):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _lmo_generic(x: np.ndarray, tau: float, div: FDivergence, cfg: SolverConfig) -> np.ndarray:
    """Nested scalar dual: golden-section over log lam, inner 1-D convex
    minimization over eta inside the conjugate's effective domain."""
    L = x.size

    def inner(lam: float) -> Tuple[float, float]:
        if np.isfinite(div.conj_sup):
            eta_lo = -float(x.min()) - lam * float(div.conj_sup)
        else:
            eta_lo = -float(x.max()) - lam * (10.0 + L)

        def phi(eta: float) -> float:
            s = (-eta - x) / lam
            vals = div.f_conj(s)
            if not np.all(np.isfinite(vals)):
                return math.inf
            return eta + lam * float(vals.sum()) / L

        a = eta_lo + 1e-12 * (1.0 + abs(eta_lo))
        b = -float(x.min()) + lam * (10.0 + L)
        a, b = _bracket_minimum(phi, a, b)
        eta = _golden_min(phi, a, b, max(cfg.dual_tol, 1e-13))
        return phi(eta), eta

    def dual_value(loglam: float) -> float:
        lam = math.exp(loglam)
        val, _ = inner(lam)
        return lam * tau + val

    loglam = _golden_min(dual_value, math.log(1e-8), math.log(1e8), 1e-10)
    lam = math.exp(loglam)
    _, eta = inner(lam)
    s = (-eta - x) / lam
    ratios = div.f_subgrad_inv(np.minimum(s, div.conj_sup))
    if not np.all(np.isfinite(ratios)):
        raise SolverError(
            f"dual recovery produced non-finite ratios (lam={lam:.3e}, eta={eta:.3e})"
        )
    return ratios / float(ratios.sum())


def lmo_fdiv_ball(x, tau: float, div: FDivergence, cfg: Optional[SolverConfig] = None) -> SimplexPoint:
    """argmin of q.x over the f-divergence ball around uniform.

    tau = 0 returns uniform immediately (the feasible set is a singleton);
    so does a constant x, for which every feasible point is optimal.
    """
    cfg = cfg or SolverConfig()
    x = np.asarray(x, dtype=float)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    L = x.size
    uniform = np.full(L, 1.0 / L)
    spread = float(x.max() - x.min())
    if tau == 0.0 or L == 1 or spread == 0.0 or not np.isfinite(spread):
        if not np.all(np.isfinite(x)):
            raise SolverError("oracle input contains non-finite entries")
        if tau == 0.0 or L == 1 or spread == 0.0:
            return SimplexPoint(uniform)
    xn = (x - float(x.min())) / spread
    if div.kind == "tv":
        q = _lmo_tv(xn, tau)
    elif div.kind == "kl":
        q = _lmo_kl(xn, tau, cfg)
    elif div.kind == "hellinger":
        q = _lmo_hellinger(xn, tau, cfg)
    else:
        q = _lmo_generic(xn, tau, div, cfg)
    return SimplexPoint(_repair(q, tau, div))


# ---------------------------------------------------------------------------
# Frank-Wolfe driver
# ---------------------------------------------------------------------------


def _segment_min(fn: Callable[[float], float]) -> float:
    """Exact line search on [0, 1] for the convex segment restriction."""
    return _golden_min(fn, 0.0, 1.0, 1e-12)


def solve_u_stat(
    variant: StatVariant,
    V,
    tau: float,
    div: FDivergence,
    cfg: Optional[SolverConfig] = None,
    certify_threshold: Optional[float] = None,
) -> UStatResult:
    """Minimize the variant objective over the ball; optionally stop early
    once the value is certified above or below ``certify_threshold``.

    The running duality gap (p - q).grad bounds the suboptimality of the
    current iterate, which is what makes the early decision sound.
    """
    cfg = cfg or SolverConfig()
    variant = StatVariant(variant)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v, n, L = _counts(V)
    uniform = np.full(L, 1.0 / L)

    if tau == 0.0 or L == 1:
        value = objective(variant, V, uniform)
        decided = None if certify_threshold is None else value >= certify_threshold
        return UStatResult(value, uniform, 0, 0.0, True, decided)

    empirical = v / n
    if discrete_divergence_to_uniform(div, empirical) <= tau:
        decided = None if certify_threshold is None else 0.0 >= certify_threshold
        return UStatResult(0.0, empirical, 0, 0.0, True, decided)

    p = uniform.copy()
    best_val = objective(variant, V, p)
    best_p = p
    lower = -math.inf
    gap = math.inf
    iterations = 0
    margin = 0.0 if certify_threshold is None else 1e-7 * (1.0 + abs(certify_threshold))
    for t in range(cfg.max_iters):
        iterations = t + 1
        g = gradient(variant, V, p)
        q = lmo_fdiv_ball(g, tau, div, cfg).p
        gap = float((p - q) @ g)
        f_p = objective(variant, V, p)
        if f_p < best_val:
            best_val, best_p = f_p, p
        lower = max(lower, f_p - max(gap, 0.0))
        if certify_threshold is not None:
            if best_val < certify_threshold:
                return UStatResult(best_val, best_p, iterations, gap, True, False)
            if lower >= certify_threshold + margin:
                return UStatResult(best_val, best_p, iterations, gap, True, True)
        if gap <= cfg.gap_tol:
            break
        step = _segment_min(lambda gam: objective(variant, V, p + gam * (q - p)))
        if objective(variant, V, p + step * (q - p)) >= f_p:
            step = 1.0 / (t + 2.0)
        p = p + step * (q - p)
    f_p = objective(variant, V, p)
    if f_p < best_val:
        best_val, best_p = f_p, p
    converged = gap <= cfg.gap_tol
    decided = None if certify_threshold is None else best_val >= certify_threshold
    return UStatResult(best_val, best_p, iterations, gap, converged, decided)


def u_stat(variant: StatVariant, V, tau: float, div: FDivergence, cfg: Optional[SolverConfig] = None) -> float:
    """Minimum of the variant objective over the f-divergence ball."""
    return solve_u_stat(variant, V, tau, div, cfg).value


def u_stat_exceeds(
    variant: StatVariant,
    V,
    tau: float,
    threshold: float,
    div: FDivergence,
    cfg: Optional[SolverConfig] = None,
) -> bool:
    """Whether U_tau(V) >= threshold, with early-exit certificates."""
    return bool(
        solve_u_stat(variant, V, tau, div, cfg, certify_threshold=threshold).decided
    )
