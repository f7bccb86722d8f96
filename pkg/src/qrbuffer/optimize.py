"""Buffer-time optimisation: level-1 argmax and the greedy hierarchical pass."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import LN2, DomainError, LinkParams
from .rates import (
    ChainReport,
    LevelSchedule,
    check_convention,
    chain_obp,
    gamma_opt_many,
    obp_level_state,
    rate_obp_level1,
)

MAX_SEARCH = 10**6
PATIENCE = 20


class InfeasibleScheduleError(DomainError):
    """A non-final level cannot feed its successor an integer cycle count."""


@dataclass(frozen=True)
class OptResult:
    n_opt: int
    rate_at_opt: float
    search_bound: int
    threshold_hit: bool = False


def search_bound(p: float, beta: float, cap: int = MAX_SEARCH) -> int:
    """Upper end of the buffer scan, sized from ``n_opt ~ 1 / (p ln(1/beta))``."""
    if beta >= 1.0:
        return cap
    return int(min(cap, max(64, math.ceil(10.0 / (p * -math.log(beta))))))


def _level1_rates(params: LinkParams, ns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    charge = -np.expm1(ns * math.log1p(-params.p)) if params.p < 1.0 else np.ones(ns.shape)
    g = params.f * gamma_opt_many(params.p, params.beta, ns)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        y = g * g / (2.0 * (1.0 + np.sqrt((1.0 - g) * (1.0 + g))))
        h = -(y * np.log(y) + (1.0 - y) * np.log1p(-y)) / LN2
    h = np.where(y > 0.0, h, 0.0)
    h = np.where(g >= 1.0, 1.0, h)
    return params.p_S * charge * charge / (ns * 2.0 * params.tau_C) * h, g


def _scan(values: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]], bound: int,
          patience: int) -> tuple[int, int, bool]:
    """Walk n = 1..bound, returning (argmax, last n evaluated, threshold flag).

    Ties go to the smaller n.  The walk stops once the objective has failed
    to increase for ``patience`` consecutive steps, or at the first n whose
    coefficient is zero (fidelity no longer above 1/2).
    """
    best_n, best = 1, -math.inf
    prev = -math.inf
    run = 0
    start, chunk = 1, 64
    while start <= bound:
        ns = np.arange(start, min(bound, start + chunk - 1) + 1)
        obj, coef = values(ns)
        for n, r, c in zip(ns.tolist(), obj.tolist(), coef.tolist()):
            if c <= 0.0:
                return best_n, n, True
            if r > best:
                best_n, best = n, r
            run = run + 1 if r <= prev else 0
            prev = r
            if run >= patience:
                return best_n, n, False
        start = int(ns[-1]) + 1
        chunk = min(chunk * 2, 1 << 16)
    return best_n, bound, False


def optimal_n_level1(params: LinkParams, *, cap: int = MAX_SEARCH,
                     patience: int = PATIENCE) -> OptResult:
    """Buffer size maximising the level-1 rate of distillable entanglement."""
    bound = search_bound(params.p, params.beta, cap)
    n_opt, last, hit = _scan(lambda ns: _level1_rates(params, ns), bound, patience)
    return OptResult(n_opt, rate_obp_level1(params, n_opt), last, hit)


def _level_objective(params, i, log_p_in, n_in, log_cum, convention) -> Callable[[int], float]:
    """Cached per-level objective: the rate at level 1, the log rate above."""
    if i == 1:
        return functools.lru_cache(maxsize=None)(lambda n: rate_obp_level1(params, n))

    @functools.lru_cache(maxsize=None)
    def objective(n: int) -> float:
        return obp_level_state(params, i, log_p_in, n_in, n, log_cum, convention)[3]

    return objective


def _pick_even_neighbour(objective: Callable[[int], float], n_arg: int, n_in: int) -> int:
    candidates = [c for c in (n_arg - 1, n_arg + 1) if c >= 1 and (c * n_in) % 2 == 0]
    return max(candidates, key=lambda c: (objective(c), -c))


def hierarchical_optimize(
    params: LinkParams,
    N_m: int,
    convention: str = "paper",
    *,
    cap: int = MAX_SEARCH,
    patience: int = PATIENCE,
) -> tuple[LevelSchedule, ChainReport]:
    """Greedy level-by-level buffer optimisation under synchronisation.

    Each level takes the argmax of its own rate given everything below it.
    If the argmax would leave the next level a half-integer input cycle, the
    better of the two neighbouring buffer sizes is used instead.  The top
    level has no successor and keeps its argmax.
    """
    check_convention(convention)
    if N_m < 1:
        raise DomainError(f"N_m must be >= 1, got {N_m}")
    n_ins: list[int] = []
    n_outs: list[int] = []
    argmaxes: list[int] = []
    log_p_in = math.log(params.p)
    log_cum = 0.0
    n_in = 1
    for i in range(1, N_m + 1):
        objective = _level_objective(params, i, log_p_in, n_in, log_cum, convention)
        if i == 1:
            n_arg = optimal_n_level1(params, cap=cap, patience=patience).n_opt
        else:
            def values(ns, _obj=objective):
                obj = np.array([_obj(int(n)) for n in ns])
                return obj, np.where(obj > -math.inf, 1.0, 0.0)

            lb = params.level(i).log_beta
            bound = cap if lb == 0.0 else int(min(cap, max(64, math.ceil(
                10.0 / (math.exp(log_p_in) * n_in * -lb)))))
            n_arg = _scan(values, bound, patience)[0]

        n_out = n_arg
        if i < N_m and (n_arg * n_in) % 2:
            n_out = _pick_even_neighbour(objective, n_arg, n_in)
        if i < N_m and n_out * n_in < 2:
            raise InfeasibleScheduleError(
                f"level {i}: n_out*n_in = {n_out * n_in} cannot feed level {i + 1}"
            )
        n_ins.append(n_in)
        n_outs.append(n_out)
        argmaxes.append(n_arg)
        log_p_out, _, log_cum, _ = obp_level_state(
            params, i, log_p_in, n_in, n_out, log_cum, convention
        )
        log_p_in = math.log(params.p_T) + log_p_out
        n_in = n_in * n_out // 2

    schedule = LevelSchedule(tuple(n_ins), tuple(n_outs))
    report = chain_obp(params, schedule, convention)
    levels = tuple(replace(lv, n_out_argmax=a) for lv, a in zip(report.levels, argmaxes))
    return schedule, ChainReport(report.protocol, levels)
