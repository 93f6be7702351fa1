"""Normalized fluctuation estimators and bound checks.

Two normalized quantities summarize an ensemble at horizon t under a rule
with declared noise-Lipschitz constant L:

    alpha = Var(height) / (L^2 t)
    beta  = E[(height(x) - height(x+b))^2] / (4 L^2 t)

alpha <= 1 always holds, beta <= alpha always holds, and a vanishing beta
forces alpha to vanish like 1/|log beta|; the estimators here report both
sides of those comparisons with standard errors.  Tail and exponential-
moment checks recenter samples at the ensemble mean (the true mean is
unavailable); the induced bias is O(SE of the mean) and is folded into the
3-SE tolerances.

Normalizations always use the declared L, never an empirical estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Offset
from .stats import EnsembleStats


@dataclass(frozen=True)
class AlphaEstimate:
    t: int
    L: float
    alpha_hat: float
    se: float


@dataclass(frozen=True)
class BetaEstimate:
    t: int
    L: float
    offset: Offset
    beta_hat: float
    se: float


@dataclass(frozen=True)
class ComparisonReport:
    t: int
    L: float
    alpha_hat: float
    beta_hat: float
    gap: float  # beta - alpha
    pooled_se: float
    passed: bool
    inv_log_beta: float  # reported side of the second inequality, no verdict


@dataclass(frozen=True)
class TailCheck:
    r: float
    frequency: float
    se: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class MgfCheck:
    theta: float
    estimate: float
    se: float
    bound: float
    passed: bool


def variance_se(stats: EnsembleStats) -> float:
    """Plug-in standard error of the unbiased sample variance."""
    n = stats.n
    m2 = stats.central_moment(2)
    m4 = stats.central_moment(4)
    var_of_var = (m4 - m2 * m2 * (n - 3) / (n - 1)) / n
    return math.sqrt(max(var_of_var, 0.0))


def estimate_alpha(stats: EnsembleStats, L: float, t: int) -> AlphaEstimate:
    if stats.n < 2:
        raise ValueError("alpha estimation needs at least 2 replicas")
    if L <= 0 or t < 1:
        raise ValueError("need L > 0 and t >= 1")
    scale = L * L * t
    return AlphaEstimate(t=t, L=L, alpha_hat=stats.variance() / scale,
                         se=variance_se(stats) / scale)


def estimate_beta(stats: EnsembleStats, L: float, t: int, b: Offset) -> BetaEstimate:
    """stats holds the per-replica height differences for offset b."""
    b = tuple(b)
    if all(c == 0 for c in b):
        raise ValueError("pair offset b must be nonzero")
    if stats.n < 2:
        raise ValueError("beta estimation needs at least 2 replicas")
    if L <= 0 or t < 1:
        raise ValueError("need L > 0 and t >= 1")
    scale = 4.0 * L * L * t
    sq = np.square(stats.values)
    beta_hat = float(sq.mean()) / scale
    se = float(sq.std(ddof=1)) / math.sqrt(stats.n) / scale
    return BetaEstimate(t=t, L=L, offset=b, beta_hat=beta_hat, se=se)


def check_beta_le_alpha(alpha: AlphaEstimate, beta: BetaEstimate,
                        se_mult: float = 3.0) -> ComparisonReport:
    """First inequality: beta <= alpha within se_mult pooled standard errors.

    The reverse-direction comparison (alpha against 1/|log beta|) carries an
    unspecified universal constant, so only the pair of values is reported.
    """
    if alpha.t != beta.t or alpha.L != beta.L:
        raise ValueError("alpha and beta must come from the same (t, L)")
    pooled = math.hypot(alpha.se, beta.se)
    gap = beta.beta_hat - alpha.alpha_hat
    if 0.0 < beta.beta_hat < 1.0:
        inv_log = 1.0 / abs(math.log(beta.beta_hat))
    else:
        inv_log = math.inf
    return ComparisonReport(
        t=alpha.t, L=alpha.L, alpha_hat=alpha.alpha_hat, beta_hat=beta.beta_hat,
        gap=gap, pooled_se=pooled, passed=gap <= se_mult * pooled,
        inv_log_beta=inv_log,
    )


def tail_exceedance(stats: EnsembleStats, r_list, L: float, t: int,
                    se_mult: float = 3.0) -> list[TailCheck]:
    """Empirical two-sided exceedance versus the bound 2 exp(-r^2 / 2 L^2 t)."""
    out = []
    n = stats.n
    center = stats.mean
    for r in r_list:
        if r < 0:
            raise ValueError("exceedance radius must be >= 0")
        freq = stats.exceedance_count(r, center) / n
        bound = 2.0 * math.exp(-r * r / (2.0 * L * L * t))
        se = math.sqrt(freq * (1.0 - freq) / n)
        out.append(TailCheck(r=float(r), frequency=freq, se=se, bound=bound,
                             passed=freq <= bound + se_mult * se))
    return out


def mgf_check(stats: EnsembleStats, theta_list, L: float, t: int,
              se_mult: float = 3.0) -> list[MgfCheck]:
    """Empirical exponential moment of centered samples versus
    exp(L^2 t theta^2 / 2), with a jackknife standard error.

    theta must satisfy |theta| L sqrt(t) <= 2, the range where the empirical
    moment is stable at desk-scale replica counts.
    """
    values = stats.values
    n = stats.n
    xbar = stats.mean
    out = []
    for theta in theta_list:
        if abs(theta) * L * math.sqrt(t) > 2.0:
            raise ValueError(f"theta {theta} outside the stability range "
                             f"|theta| L sqrt(t) <= 2")
        y = np.exp(theta * (values - xbar))
        est = float(y.mean())
        # leave-one-out means, recentering at the leave-one-out sample mean
        loo_mean = (n * xbar - values) / (n - 1)
        s = y.sum()
        loo = np.exp(theta * (xbar - loo_mean)) * (s - y) / (n - 1)
        jack = math.sqrt((n - 1) / n * float(np.square(loo - loo.mean()).sum()))
        bound = math.exp(L * L * t * theta * theta / 2.0)
        rel_se = jack / est if est > 0 else math.inf
        out.append(MgfCheck(theta=float(theta), estimate=est, se=jack, bound=bound,
                            passed=est <= bound * (1.0 + se_mult * rel_se)))
    return out


@dataclass(frozen=True)
class TrendRow:
    t: int
    alpha: AlphaEstimate
    beta: BetaEstimate
    mean_abs_gap: float
    mean_abs_gap_se: float


@dataclass(frozen=True)
class TrendTable:
    """Estimates across a horizon grid plus log-log slope fits.

    Sublinear variance growth and sublinear neighbor-gap growth are
    equivalent, so a sweep shows alpha and beta decaying together (or, for
    independent columns, neither).  Slope fits are descriptive only: the
    proven decay rates carry unspecified constants, so no verdicts here.
    """

    model_kind: str
    b: Offset
    rows: tuple[TrendRow, ...]
    slopes: dict

    def alpha_decreasing(self, se_mult: float = 3.0) -> bool:
        first, last = self.rows[0].alpha, self.rows[-1].alpha
        pooled = math.hypot(first.se, last.se)
        return last.alpha_hat < first.alpha_hat - se_mult * pooled

    def beta_decreasing(self, se_mult: float = 3.0) -> bool:
        first, last = self.rows[0].beta, self.rows[-1].beta
        pooled = math.hypot(first.se, last.se)
        return last.beta_hat < first.beta_hat - se_mult * pooled


def _loglog_slope(ts, ys) -> tuple[float, float]:
    x = np.log(np.asarray(ts, dtype=np.float64))
    y = np.log(np.asarray(ys, dtype=np.float64))
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.square(x - xm).sum())
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    resid = y - ym - slope * (x - xm)
    if n > 2:
        se = math.sqrt(float(np.square(resid).sum()) / (n - 2) / sxx)
    else:
        se = math.nan
    return slope, se


def superconcentration_trend(model, t_list, n_replicas: int, *, b: Offset,
                             seed: int, parallelism: int = 1) -> TrendTable:
    """Run ensembles across increasing horizons and tabulate the decay of the
    normalized variance, the normalized pair gap, and the mean absolute gap."""
    from .engine import SimulationPlan, run_ensemble

    t_list = list(t_list)
    if sorted(t_list) != t_list or len(set(t_list)) != len(t_list):
        raise ValueError("t_list must be strictly increasing")
    b = tuple(b)
    d = model.d
    origin = tuple(0 for _ in range(d))
    rows = []
    for t in t_list:
        plan = SimulationPlan(model=model, t_max=t, seed=seed,
                              probes=(origin, b), pairs=((0, 1),))
        res = run_ensemble(plan, n_replicas, parallelism)
        alpha = estimate_alpha(res.probe_stats[origin], model.lipschitz_L, t)
        pair = res.pair_stats[(origin, b)]
        beta = estimate_beta(pair, model.lipschitz_L, t, b)
        gaps = np.abs(pair.values)
        rows.append(TrendRow(
            t=t, alpha=alpha, beta=beta,
            mean_abs_gap=float(gaps.mean()),
            mean_abs_gap_se=float(gaps.std(ddof=1)) / math.sqrt(pair.n),
        ))
    slopes = {
        "alpha": _loglog_slope(t_list, [r.alpha.alpha_hat for r in rows]),
        "beta": _loglog_slope(t_list, [r.beta.beta_hat for r in rows]),
        "mean_abs_gap": _loglog_slope(t_list, [max(r.mean_abs_gap, 1e-300) for r in rows]),
    }
    return TrendTable(model_kind=model.kind, b=b, rows=tuple(rows), slopes=slopes)
