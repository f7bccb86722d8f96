"""Average-state coefficients and entanglement generation rates.

Level-1 quantities come in closed form.  Multi-level chains are evaluated in
log space: at nesting level 8 the input probabilities are around 1e-180 and
the cumulative coefficients fall below the smallest double, so every chain
quantity is carried as a natural log and only exponentiated for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import (
    LN2,
    DomainError,
    LinkParams,
    UsageError,
    distillable_entanglement_gamma,
    expected_waiting_steps,
    log_distillable_entanglement,
)

Convention = Literal["paper", "symmetric"]
CONVENTIONS: tuple[str, ...] = ("paper", "symmetric")

LN10 = math.log(10.0)
# distance from the removable singularities q = beta**2, q**2 = beta**2 below
# which the closed form is replaced by the direct series
SINGULAR_TOL = 1e-6


def check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise UsageError(f"unknown exponent convention {convention!r}; choose from {CONVENTIONS}")
    return convention


def _check_n(name: str, n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"{name} must be an integer >= 1, got {n!r}")
    return int(n)


def _log1mexp(x: float) -> float:
    """``log(1 - exp(x))`` for ``x <= 0``."""
    if x == 0.0:
        return -math.inf
    if x > -LN2:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _log_q(log_p: float) -> float:
    """``log(1 - p)`` from ``log p``; keeps precision when p is far below 1e-16."""
    if log_p < -30.0:
        return -math.exp(log_p)
    return _log1mexp(log_p)


def log_charge_prob(log_p: float, n: int) -> float:
    """``log(1 - (1 - p)**n)``: at least one success in ``n`` attempts."""
    x = n * _log_q(log_p)
    if x == 0.0:
        # p below the double range: 1 - (1-p)^n = n p to relative order n p
        return math.log(n) + log_p
    return _log1mexp(x)


def charge_prob(p: float, n: int) -> float:
    return -math.expm1(n * math.log1p(-p)) if p < 1.0 else 1.0


# --------------------------------------------------------------------------
# level-1 coefficients
# --------------------------------------------------------------------------


def _gamma_opt_closed(p: float, beta: float, n):
    q = 1.0 - p
    b2 = beta * beta
    qn = q**n
    bn = b2**n
    f = qn * qn * (b2 + q * (1.0 - q - b2)) + bn * (
        2.0 * qn * q * q - q * q + b2 - 2.0 * qn * b2 + q * (b2 - 1.0)
    )
    return beta**3 * p / (1.0 - qn) ** 2 * f / ((b2 - q) * (b2 - q * q))


def _log_series_sym(log_q: float, log_beta: float, n_in: int, n_out: int) -> float:
    """log of the normalised average of ``beta**(n_in (2|dk| + 2(n - max) + 2) + 1)``.

    The double sum is regrouped by ``m = max(k1, k2)`` and ``d = |k1 - k2|``.
    The weight of a pair is ``q**(2m - 2 - d)``, counted twice when d > 0.
    """
    if log_q == -math.inf:
        return (2 * n_in * n_out + 1) * log_beta
    m = np.arange(1, n_out + 1, dtype=float)
    log_ratio = 2.0 * n_in * log_beta - log_q
    inner = np.zeros(n_out)
    if n_out > 1:
        acc = np.logaddexp.accumulate(np.arange(1, n_out, dtype=float) * log_ratio)
        inner[1:] = np.logaddexp(0.0, LN2 + acc)
    terms = (2.0 * m - 2.0) * log_q + n_in * (2.0 * (n_out - m) + 2.0) * log_beta + inner
    norm = 2.0 * np.logaddexp.reduce((m - 1.0) * log_q)
    return float(np.logaddexp.reduce(terms) - norm + log_beta)


def _log_series_paper(log_q: float, log_beta: float, n_in: int, n_out: int) -> float:
    # the exponent only involves k1, so k2 marginalises out of both sums
    if log_q == -math.inf:
        return (2 * n_in * n_out + 1) * log_beta
    k = np.arange(1, n_out + 1, dtype=float)
    terms = (k - 1.0) * log_q + (n_in * (2.0 * (n_out - k) + 2.0) + 1.0) * log_beta
    return float(np.logaddexp.reduce(terms) - np.logaddexp.reduce((k - 1.0) * log_q))


def near_singular(p: float, beta: float) -> bool:
    q = 1.0 - p
    b2 = beta * beta
    return abs(b2 - q) < SINGULAR_TOL or abs(b2 - q * q) < SINGULAR_TOL


def gamma_opt(p: float, beta: float, n: int) -> float:
    """Coefficient of the average state accessed after a buffer of ``n`` attempts.

    Uses the closed form except within ``SINGULAR_TOL`` of its removable
    singularities, where the direct series is summed instead.
    """
    n = _check_n("n", n)
    if not (0.0 < p <= 1.0 and 0.0 < beta <= 1.0):
        raise DomainError(f"need p, beta in (0, 1], got p={p!r}, beta={beta!r}")
    if beta == 1.0:
        return 1.0
    if p == 1.0:
        return beta ** (2 * n + 1)
    if near_singular(p, beta):
        return math.exp(_log_series_sym(math.log1p(-p), math.log(beta), 1, n))
    return float(min(max(_gamma_opt_closed(p, beta, n), 0.0), 1.0))


def gamma_opt_many(p: float, beta: float, ns: np.ndarray) -> np.ndarray:
    """Vectorised :func:`gamma_opt` over an integer array of buffer sizes."""
    ns = np.asarray(ns, dtype=np.int64)
    if beta == 1.0:
        return np.ones(ns.shape)
    if p == 1.0:
        return beta ** (2.0 * ns + 1.0)
    if near_singular(p, beta):
        lq, lb = math.log1p(-p), math.log(beta)
        return np.exp([_log_series_sym(lq, lb, 1, int(n)) for n in ns])
    with np.errstate(under="ignore"):
        g = _gamma_opt_closed(p, beta, ns.astype(float))
    return np.clip(g, 0.0, 1.0)


def gamma_can(p: float, beta: float) -> float:
    """Coefficient of the canonical-protocol average state (unbounded waiting)."""
    if not (0.0 < p <= 1.0 and 0.0 < beta <= 1.0):
        raise DomainError(f"need p, beta in (0, 1], got p={p!r}, beta={beta!r}")
    q = 1.0 - p
    b2q = beta * beta * q
    return min(beta**3 * p * p * (1.0 + b2q) / ((1.0 - q * q) * (1.0 - b2q)), 1.0)


# --------------------------------------------------------------------------
# level-1 rates
# --------------------------------------------------------------------------


def _rate(p_out: float, period: float, e: float) -> float:
    return p_out / period * e


def _obp_level1_parts(params: LinkParams, n: int) -> tuple[float, float, float]:
    c = charge_prob(params.p, n)
    p_out = params.p_S * c * c
    period = n * 2.0 * params.tau_C
    return p_out, period, params.f * gamma_opt(params.p, params.beta, n)


def rate_obp_level1(params: LinkParams, n: int) -> float:
    """Distillable-entanglement rate (ebits/s) with a buffer of ``n`` attempts."""
    n = _check_n("n", n)
    p_out, period, g = _obp_level1_parts(params, n)
    return _rate(p_out, period, distillable_entanglement_gamma(g))


def _cp_level1_parts(params: LinkParams) -> tuple[float, float, float]:
    period = expected_waiting_steps(params.p) * 2.0 * params.tau_C
    return params.p_S, period, params.f * gamma_can(params.p, params.beta)


def rate_cp_level1(params: LinkParams) -> float:
    """Distillable-entanglement rate (ebits/s) of the canonical protocol."""
    p_out, period, g = _cp_level1_parts(params)
    return _rate(p_out, period, distillable_entanglement_gamma(g))


# --------------------------------------------------------------------------
# higher nesting levels
# --------------------------------------------------------------------------


def log_gamma_opt_level(
    log_p_in: float, log_beta_i: float, n_in: int, n_out: int, convention: str = "paper"
) -> float:
    """Natural log of the level coefficient, with inputs given as logs."""
    check_convention(convention)
    n_in = _check_n("n_in", n_in)
    n_out = _check_n("n_out", n_out)
    log_q = _log_q(log_p_in)
    series = _log_series_paper if convention == "paper" else _log_series_sym
    return min(series(log_q, log_beta_i, n_in, n_out), 0.0)


def gamma_opt_level(
    p_in: float, beta_i: float, n_in: int, n_out: int, convention: str = "paper"
) -> float:
    """Coefficient of the average state output by one optimised-buffer stage.

    ``convention="paper"`` weights each outcome by ``beta_i`` raised to
    ``n_in (2 (n_out - k1) + 2) + 1``.  ``"symmetric"`` uses
    ``n_in (2|k2 - k1| + 2 (n_out - max) + 2) + 1``, which reduces to
    :func:`gamma_opt` when ``n_in == 1``.
    """
    if not (0.0 < p_in <= 1.0 and 0.0 < beta_i <= 1.0):
        raise DomainError(f"need p_in, beta_i in (0, 1], got {p_in!r}, {beta_i!r}")
    return math.exp(
        log_gamma_opt_level(math.log(p_in), math.log(beta_i), n_in, n_out, convention)
    )


def waiting_steps_at(j: int, params: LinkParams) -> float:
    """Mean waiting steps at level ``j``: charging at j=1, swapping above."""
    if j == 0:
        return 1.0
    return expected_waiting_steps(params.p if j == 1 else params.p_S)


def log_gamma_can_level(j: int, params: LinkParams) -> float:
    if j < 1:
        raise DomainError(f"level must be >= 1, got {j}")
    log_beta = math.log(params.beta)
    p_j = params.p if j == 1 else params.p_S
    q_j = 1.0 - p_j
    waits = math.prod(waiting_steps_at(l, params) for l in range(j))
    B = math.exp(2.0 * waits * log_beta)
    log_beta_j = 2.0 ** (j - 1) * log_beta
    geometric = math.log(p_j / (2.0 - p_j)) + math.log1p(B * q_j) - math.log1p(-B * q_j)
    return min(3.0 * log_beta_j + geometric, 0.0)


def gamma_can_level(j: int, params: LinkParams) -> float:
    """Canonical-protocol coefficient contributed by nesting level ``j``.

    The dephasing exponent uses ``|k2 - k1|``; at ``j == 1`` this is
    :func:`gamma_can`.
    """
    return math.exp(log_gamma_can_level(j, params))


@dataclass(frozen=True)
class LevelSchedule:
    """Per-level input and output cycle counts of a synchronised chain."""

    n_in: tuple[int, ...]
    n_out: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_in", tuple(self.n_in))
        object.__setattr__(self, "n_out", tuple(self.n_out))
        self.validate()

    @property
    def N_m(self) -> int:
        return len(self.n_out)

    def validate(self) -> None:
        if len(self.n_out) < 1 or len(self.n_in) != len(self.n_out):
            raise UsageError("n_in and n_out must be non-empty and of equal length")
        for x in self.n_in + self.n_out:
            if isinstance(x, bool) or not isinstance(x, (int, np.integer)) or x < 1:
                raise UsageError(f"schedule entries must be positive integers, got {x!r}")
        if self.n_in[0] != 1:
            raise UsageError("the first level must have n_in = 1")
        for i in range(self.N_m - 1):
            prod = self.n_out[i] * self.n_in[i]
            if prod % 2 or prod // 2 != self.n_in[i + 1]:
                raise UsageError(
                    f"levels {i + 1}->{i + 2} are not synchronised: "
                    f"n_out*n_in = {prod} but next n_in = {self.n_in[i + 1]}"
                )

    @classmethod
    def from_n_out(cls, n_out) -> LevelSchedule:
        """Derive ``n_in`` from the synchronisation condition."""
        n_out = tuple(int(x) for x in n_out)
        n_in = [1]
        for i, x in enumerate(n_out[:-1], start=1):
            if (n_in[-1] * x) % 2:
                raise UsageError(f"n_out*n_in at level {i} is odd; level {i + 1} cannot synchronise")
            n_in.append(n_in[-1] * x // 2)
        return cls(tuple(n_in), n_out)


@dataclass(frozen=True)
class LevelReport:
    level: int
    n_in: int | None
    n_out: int | None
    p_in: float
    p_out: float
    gamma: float
    cumulative_gamma: float
    fidelity: float
    rate: float
    output_period: float
    log10_p_out: float
    log10_gamma: float
    log10_cumulative_gamma: float
    log10_rate: float
    n_out_argmax: int | None = None


@dataclass(frozen=True)
class ChainReport:
    protocol: str
    levels: tuple[LevelReport, ...]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> LevelReport:
        return self.levels[i]

    def __iter__(self):
        return iter(self.levels)

    @property
    def rates(self) -> list[float]:
        return [lv.rate for lv in self.levels]

    @property
    def log10_rates(self) -> list[float]:
        return [lv.log10_rate for lv in self.levels]


def _exp(x: float) -> float:
    return math.exp(x) if x > -745.2 else 0.0


def obp_level_state(
    params: LinkParams,
    level: int,
    log_p_in: float,
    n_in: int,
    n_out: int,
    log_cumulative_prev: float,
    convention: str,
) -> tuple[float, float, float, float]:
    """Log quantities of stage ``level`` for a candidate ``n_out``.

    Returns ``(log_p_out, log_gamma, log_cumulative, log_rate)``.
    """
    lvl = params.level(level)
    if level == 1:
        g = params.f * gamma_opt(params.p, params.beta, n_out)
        log_gamma = math.log(g) if g > 0.0 else -math.inf
    else:
        log_gamma = log_gamma_opt_level(log_p_in, lvl.log_beta, n_in, n_out, convention)
    log_cum = 2.0 * log_cumulative_prev + log_gamma
    log_p_out = math.log(params.p_S) + 2.0 * log_charge_prob(log_p_in, n_out)
    log_rate = (
        log_p_out
        - math.log(n_in * n_out * 2.0 * lvl.tau_C)
        + log_distillable_entanglement(log_cum)
    )
    return log_p_out, log_gamma, log_cum, log_rate


def chain_obp(params: LinkParams, schedule: LevelSchedule, convention: str = "paper") -> ChainReport:
    """Per-level state and rate of the optimised-buffer chain under ``schedule``."""
    check_convention(convention)
    schedule.validate()
    levels = []
    log_p_in = math.log(params.p)
    log_cum = 0.0  # squared to zero at level 1
    for idx in range(schedule.N_m):
        i = idx + 1
        n_in, n_out = schedule.n_in[idx], schedule.n_out[idx]
        log_p_out, log_g, log_cum, log_rate = obp_level_state(
            params, i, log_p_in, n_in, n_out, log_cum, convention
        )
        period = n_in * n_out * 2.0 * params.level(i).tau_C
        if i == 1:
            p_out, _, g = _obp_level1_parts(params, n_out)
            cum = g
            rate = _rate(p_out, period, distillable_entanglement_gamma(g))
        else:
            p_out, g, cum, rate = _exp(log_p_out), _exp(log_g), _exp(log_cum), _exp(log_rate)
        levels.append(
            LevelReport(
                level=i,
                n_in=n_in,
                n_out=n_out,
                p_in=_exp(log_p_in),
                p_out=p_out,
                gamma=g,
                cumulative_gamma=cum,
                fidelity=0.5 * (1.0 + cum),
                rate=rate,
                output_period=period,
                log10_p_out=log_p_out / LN10,
                log10_gamma=log_g / LN10,
                log10_cumulative_gamma=log_cum / LN10,
                log10_rate=log_rate / LN10,
            )
        )
        log_p_in = math.log(params.p_T) + log_p_out
    return ChainReport("OBP", tuple(levels))


def chain_cp(params: LinkParams, N_m: int) -> ChainReport:
    """Per-level state and rate of the canonical protocol.

    ``p_in`` reports the per-attempt success probability driving the level's
    waiting time (``p`` at level 1, ``p_S`` above) and ``p_out`` the heralded
    swap probability.
    """
    N_m = _check_n("N_m", N_m)
    levels = []
    log_cum = 0.0
    log_wait = 0.0
    for i in range(1, N_m + 1):
        log_g = log_gamma_can_level(i, params)
        if i == 1:
            log_g += math.log(params.f)
        log_cum = 2.0 * log_cum + log_g
        log_wait += math.log(waiting_steps_at(i, params))
        period = math.exp(log_wait) * 2.0 * params.tau_C
        log_rate = (
            math.log(params.p_S) - log_wait - math.log(2.0 * params.tau_C)
            + log_distillable_entanglement(log_cum)
        )
        if i == 1:
            p_out, period, g = _cp_level1_parts(params)
            cum = g
            rate = _rate(p_out, period, distillable_entanglement_gamma(g))
        else:
            g, cum, rate = _exp(log_g), _exp(log_cum), _exp(log_rate)
        levels.append(
            LevelReport(
                level=i,
                n_in=None,
                n_out=None,
                p_in=params.p if i == 1 else params.p_S,
                p_out=params.p_S,
                gamma=g,
                cumulative_gamma=cum,
                fidelity=0.5 * (1.0 + cum),
                rate=rate,
                output_period=period,
                log10_p_out=math.log10(params.p_S),
                log10_gamma=log_g / LN10,
                log10_cumulative_gamma=log_cum / LN10,
                log10_rate=log_rate / LN10,
            )
        )
    return ChainReport("CP", tuple(levels))


def memory_count(protocol: str, N_m: int) -> int:
    """Quantum memories needed by a repeater with ``N_m`` nesting levels."""
    N_m = _check_n("N_m", N_m)
    proto = protocol.upper()
    if proto == "OBP":
        return 2 * (2 ** (N_m + 2) - 2)
    if proto == "CP":
        return 2 ** (N_m + 2)
    raise UsageError(f"unknown protocol {protocol!r}; choose OBP or CP")
