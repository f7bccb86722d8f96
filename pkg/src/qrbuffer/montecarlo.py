"""Monte-Carlo sampling of the buffer-time and canonical protocols.

Each trajectory tracks only its dephasing exponent (a power of beta): the
charging steps ``k1, k2`` are drawn as geometric variables and mapped to the
storage time of the swapped pair.  This is the independent check on every
closed form in :mod:`qrbuffer.rates`.

Trials are split into fixed-size blocks.  Block ``b`` draws from a Philox
stream keyed by ``(seed, stream, b)``, and block sums are combined with exact
(fsum / integer) reductions, so the estimate is bit-identical for any worker
count and any completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import DomainError, LinkParams, UsageError
from .rates import check_convention

BLOCK = 1 << 15


@dataclass(frozen=True)
class StageParams:
    p_in: float
    beta_level: float
    n_in: int
    n_out: int


@dataclass(frozen=True)
class McConfig:
    trials: int = 100_000
    seed: int = 0
    protocol: Literal["OBP", "CP"] = "OBP"
    level_params: StageParams | None = None
    convention: str = "paper"
    cp_cutoff: float = 1e-12
    workers: int = 1
    stream: int = 0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not (0.0 < self.cp_cutoff <= 1e-6):
            raise DomainError("cp_cutoff must lie in (0, 1e-6]")
        if self.protocol not in ("OBP", "CP"):
            raise UsageError(f"unknown protocol {self.protocol!r}")
        check_convention(self.convention)
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McEstimate:
    mean_gamma: float
    stderr_gamma: float
    success_prob: float
    stderr_success: float
    trials_used: int
    heralded_prob: float | None = None
    mean_wait: float | None = None
    stderr_wait: float | None = None
    redraws: int = 0


@dataclass
class _Sums:
    ok: int
    heralded: int
    g: float
    g2: float
    w: float | None = None
    w2: float | None = None
    redraws: int = 0


def _rng(seed: int, stream: int, block: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(seq))


def _run_blocks(cfg: McConfig, sample_block) -> list[_Sums]:
    n_blocks = -(-cfg.trials // BLOCK)
    sizes = [min(BLOCK, cfg.trials - b * BLOCK) for b in range(n_blocks)]

    def one(b: int) -> _Sums:
        return sample_block(_rng(cfg.seed, cfg.stream, b), sizes[b])

    if cfg.workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(one, range(n_blocks)))
    return [one(b) for b in range(n_blocks)]


def _mean_se(total: float, total_sq: float, count: int) -> tuple[float, float]:
    if count == 0:
        return math.nan, math.nan
    mean = total / count
    if count == 1:
        return mean, 0.0
    var = max(total_sq - count * mean * mean, 0.0) / (count - 1)
    return mean, math.sqrt(var / count)


def _reduce(blocks: list[_Sums], trials: int) -> McEstimate:
    ok = sum(b.ok for b in blocks)
    mean_g, se_g = _mean_se(math.fsum(b.g for b in blocks), math.fsum(b.g2 for b in blocks), ok)
    ps = ok / trials
    heralded = sum(b.heralded for b in blocks)
    mean_w = se_w = None
    if blocks[0].w is not None:
        mean_w, se_w = _mean_se(
            math.fsum(b.w for b in blocks), math.fsum(b.w2 for b in blocks), trials
        )
    return McEstimate(
        mean_gamma=mean_g,
        stderr_gamma=se_g,
        success_prob=ps,
        stderr_success=math.sqrt(ps * (1.0 - ps) / trials),
        trials_used=trials,
        heralded_prob=heralded / trials,
        mean_wait=mean_w,
        stderr_wait=se_w,
        redraws=sum(b.redraws for b in blocks),
    )


def _block_sums(gamma: np.ndarray, ok: np.ndarray, heralded: np.ndarray,
                wait: np.ndarray | None = None, redraws: int = 0) -> _Sums:
    g = gamma[ok]
    s = _Sums(ok=int(ok.sum()), heralded=int(heralded.sum()),
              g=float(g.sum()), g2=float((g * g).sum()), redraws=redraws)
    if wait is not None:
        w = wait.astype(float)
        s.w, s.w2 = float(w.sum()), float((w * w).sum())
    return s


def simulate_level1_obp(params: LinkParams, n: int, cfg: McConfig) -> McEstimate:
    """Sample the level-1 buffer-time protocol with a buffer of ``n`` attempts.

    ``mean_gamma`` is conditioned on both segments charging within ``n``
    attempts; ``success_prob`` estimates that event and ``heralded_prob``
    additionally requires the swap to succeed.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    beta, p = params.beta, params.p

    def block(rng: np.random.Generator, size: int) -> _Sums:
        k = rng.geometric(p, size=(2, size))
        swap = rng.random(size) < params.p_S
        ok = (k[0] <= n) & (k[1] <= n)
        e = 2 * np.abs(k[1] - k[0]) + 2 * (n - np.maximum(k[0], k[1])) + 3
        gamma = params.f * np.power(beta, e.astype(float))
        return _block_sums(gamma, ok, ok & swap)

    return _reduce(_run_blocks(cfg, block), cfg.trials)


def cp_step_cap(p: float, cutoff: float) -> int:
    """Largest charging step kept before a draw is rejected and redrawn.

    ``P(k > cap) <= cutoff`` per segment, which bounds the truncation bias.
    """
    if p >= 1.0:
        return 1
    return max(1, math.ceil(math.log(cutoff) / math.log1p(-p)))


def simulate_level1_cp(params: LinkParams, cfg: McConfig) -> McEstimate:
    """Sample the canonical protocol: segments wait until both are charged."""
    beta, p = params.beta, params.p
    cap = cp_step_cap(p, cfg.cp_cutoff)

    def block(rng: np.random.Generator, size: int) -> _Sums:
        k = rng.geometric(p, size=(2, size))
        redraws = 0
        over = k > cap
        while over.any():
            m = int(over.sum())
            redraws += m
            k[over] = rng.geometric(p, size=m)
            over = k > cap
        swap = rng.random(size) < params.p_S
        ok = np.ones(size, dtype=bool)
        gamma = params.f * np.power(beta, (2 * np.abs(k[1] - k[0]) + 3).astype(float))
        return _block_sums(gamma, ok, swap, wait=np.maximum(k[0], k[1]), redraws=redraws)

    return _reduce(_run_blocks(cfg, block), cfg.trials)


def simulate_stage(stage: StageParams, cfg: McConfig) -> McEstimate:
    """Sample one optimised-buffer stage under ``cfg.convention``."""
    if stage.n_in < 1 or stage.n_out < 1:
        raise DomainError("stage cycle counts must be >= 1")
    n_in, n_out = stage.n_in, stage.n_out
    symmetric = cfg.convention == "symmetric"

    def block(rng: np.random.Generator, size: int) -> _Sums:
        k = rng.geometric(stage.p_in, size=(2, size))
        ok = (k[0] <= n_out) & (k[1] <= n_out)
        if symmetric:
            core = 2 * np.abs(k[1] - k[0]) + 2 * (n_out - np.maximum(k[0], k[1])) + 2
        else:
            core = 2 * (n_out - k[0]) + 2
        gamma = np.power(stage.beta_level, (n_in * core + 1).astype(float))
        return _block_sums(gamma, ok, ok)

    return _reduce(_run_blocks(cfg, block), cfg.trials)


def simulate(params: LinkParams | None, cfg: McConfig, n: int | None = None) -> McEstimate:
    """Dispatch on ``cfg``: a stage run when ``level_params`` is set, else level 1."""
    if cfg.level_params is not None:
        return simulate_stage(cfg.level_params, cfg)
    if params is None:
        raise UsageError("level-1 simulation needs LinkParams")
    if cfg.protocol == "CP":
        return simulate_level1_cp(params, cfg)
    if n is None:
        raise UsageError("OBP simulation needs a buffer size n")
    return simulate_level1_obp(params, n, cfg)


# --------------------------------------------------------------------------
# validation against the closed forms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    quantity: str
    point: str
    analytic: float
    estimate: float
    stderr: float

    @property
    def z(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if math.isclose(self.estimate, self.analytic, rel_tol=1e-12) else math.inf
        return (self.estimate - self.analytic) / self.stderr

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_LIMIT


Z_LIMIT = 3.0

LEVEL1_GRID = ((0.5, 0.6, 2), (0.3, 0.8, 3), (0.1, 0.9, 5), (0.05, 0.95, 10), (1.0, 0.7, 1))
STAGE_GRID = ((0.5, 0.6, 1, 2), (0.3, 0.8, 2, 3), (0.2, 0.9, 1, 4), (0.6, 0.95, 3, 2))


def validation_checks(trials: int = 100_000, seed: int = 7, workers: int = 1) -> list[Check]:
    """Monte-Carlo vs closed form on a fixed grid of operating points."""
    from .core import expected_waiting_steps
    from .rates import gamma_can, gamma_opt, gamma_opt_level

    checks: list[Check] = []
    streams = iter(range(1 << 30))
    for p, beta, n in LEVEL1_GRID:
        params = LinkParams(p=p, beta=beta)
        cfg = McConfig(trials=trials, seed=seed, protocol="OBP", workers=workers,
                       stream=next(streams))
        est = simulate_level1_obp(params, n, cfg)
        point = f"p={p} beta={beta} n={n}"
        checks.append(Check("gamma_opt", point, gamma_opt(p, beta, n),
                            est.mean_gamma, est.stderr_gamma))
        checks.append(Check("success_prob_obp", point, (1.0 - (1.0 - p) ** n) ** 2,
                            est.success_prob, est.stderr_success))

        cfg = McConfig(trials=trials, seed=seed, protocol="CP", workers=workers,
                       stream=next(streams))
        est = simulate_level1_cp(params, cfg)
        point = f"p={p} beta={beta}"
        checks.append(Check("gamma_can", point, gamma_can(p, beta), est.mean_gamma, est.stderr_gamma))
        checks.append(Check("waiting_steps", point, expected_waiting_steps(p),
                            est.mean_wait, est.stderr_wait))

    for p_in, beta, n_in, n_out in STAGE_GRID:
        stage = StageParams(p_in, beta, n_in, n_out)
        point = f"p_in={p_in} beta={beta} n_in={n_in} n_out={n_out}"
        for conv in ("paper", "symmetric"):
            cfg = McConfig(trials=trials, seed=seed, level_params=stage, convention=conv,
                           workers=workers, stream=next(streams))
            est = simulate_stage(stage, cfg)
            checks.append(Check(f"gamma_opt_level[{conv}]", point,
                                gamma_opt_level(p_in, beta, n_in, n_out, conv),
                                est.mean_gamma, est.stderr_gamma))
        checks.append(Check("success_prob_stage", point, (1.0 - (1.0 - p_in) ** n_out) ** 2,
                            est.success_prob, est.stderr_success))
    return checks


def allowed_failures(n_checks: int, alpha: float = 1e-3) -> int:
    """Failures tolerated among ``n_checks`` independent 3-sigma checks.

    Smallest k with P(more than k failures) < alpha under a binomial model.
    """
    p_fail = math.erfc(Z_LIMIT / math.sqrt(2.0))
    tail = 1.0
    for k in range(n_checks + 1):
        tail -= math.comb(n_checks, k) * p_fail**k * (1.0 - p_fail) ** (n_checks - k)
        if tail < alpha:
            return k
    return n_checks
