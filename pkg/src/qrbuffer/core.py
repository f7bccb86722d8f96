"""Dephased Bell mixtures and the elementary algebra acting on them.

Every state handled by this package has the form

    (1 + gamma)/2 * rho_minus + (1 - gamma)/2 * rho_plus

so the scalar ``gamma`` is the whole representation.  Dephasing multiplies
gamma by ``exp(-2 t / tau_M)`` and swapping two such states multiplies their
coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LN2 = math.log(2.0)
LOG_4 = math.log(4.0)

# Below this log(gamma) the distillable entanglement is evaluated through its
# small-gamma expansion; gamma**2 < 1e-17 so the dropped terms are below ulp.
_SMALL_LOG_GAMMA = -20.0


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Malformed request: unknown option tag, inconsistent schedule, etc."""


def _check_prob(name: str, x: float, *, open_low: bool = True) -> None:
    low_ok = x > 0.0 if open_low else x >= 0.0
    if not (low_ok and x <= 1.0):
        bound = "(0, 1]" if open_low else "[0, 1]"
        raise DomainError(f"{name} must lie in {bound}, got {x!r}")


@dataclass(frozen=True)
class LinkParams:
    """Physical operating point of a repeater segment.

    Supply either ``tau_M`` (beta is derived as ``exp(-2 tau_C / tau_M)``) or
    ``beta`` directly.  A direct beta decouples the memory quality from
    ``tau_C``, which then only sets the unit of time for rates.
    """

    p: float
    p_S: float = 1.0
    p_T: float = 1.0
    tau_C: float = 1.0
    tau_M: float | None = None
    f: float = 1.0
    beta: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        _check_prob("p", self.p)
        _check_prob("p_S", self.p_S)
        _check_prob("p_T", self.p_T)
        if not self.tau_C > 0.0:
            raise DomainError(f"tau_C must be positive, got {self.tau_C!r}")
        if not (0.5 < self.f <= 1.0):
            raise DomainError(f"f must lie in (0.5, 1], got {self.f!r}")
        if self.beta is None and self.tau_M is None:
            raise DomainError("either beta or tau_M must be given")
        if self.tau_M is not None:
            if not self.tau_M > 0.0:
                raise DomainError(f"tau_M must be positive, got {self.tau_M!r}")
            derived = math.exp(-2.0 * self.tau_C / self.tau_M)
            # dataclasses.replace() hands back the derived value; anything else conflicts
            if self.beta is not None and self.beta != derived:
                raise DomainError("beta and tau_M are mutually exclusive")
            object.__setattr__(self, "beta", derived)
        _check_prob("beta", self.beta)

    @classmethod
    def from_length(cls, length_m: float, speed: float, **kwargs) -> LinkParams:
        """Build params with ``tau_C = length_m / speed`` (metres, m/s)."""
        if not (length_m > 0.0 and speed > 0.0):
            raise DomainError("segment length and signal speed must be positive")
        return cls(tau_C=length_m / speed, **kwargs)

    def level(self, i: int) -> LevelIndex:
        return LevelIndex(i, self.tau_C, self.beta)


@dataclass(frozen=True)
class LevelIndex:
    """Nesting level ``i``: communication time and memory quality double up."""

    i: int
    base_tau_C: float
    base_beta: float

    def __post_init__(self) -> None:
        if self.i < 1:
            raise DomainError(f"nesting level must be >= 1, got {self.i}")

    @property
    def tau_C(self) -> float:
        return 2.0 ** (self.i - 1) * self.base_tau_C

    @property
    def log_beta(self) -> float:
        return 2.0 ** (self.i - 1) * math.log(self.base_beta)

    @property
    def beta(self) -> float:
        return math.exp(self.log_beta)


@dataclass(frozen=True)
class BellMixture:
    gamma: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0):
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma!r}")

    @property
    def fidelity(self) -> float:
        return 0.5 * (1.0 + self.gamma)

    @property
    def p_minus(self) -> float:
        """Weight of rho_minus."""
        return 0.5 * (1.0 + self.gamma)

    @property
    def p_plus(self) -> float:
        """Weight of rho_plus."""
        return 0.5 * (1.0 - self.gamma)


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary_entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / LN2


def _small_entropy(y: float) -> float:
    # H(y) for y <= 1/2, written so that tiny y keeps full relative precision
    if y == 0.0:
        return 0.0
    return -(y * math.log(y) + (1.0 - y) * math.log1p(-y)) / LN2


def _hashing_tail(gamma: float) -> float:
    """``1 - x`` where ``x = 1/2 + sqrt(F (1 - F))`` and ``F = (1 + gamma)/2``."""
    return gamma * gamma / (2.0 * (1.0 + math.sqrt((1.0 - gamma) * (1.0 + gamma))))


def distillable_entanglement_gamma(gamma: float) -> float:
    """Distillable entanglement of the mixture with coefficient ``gamma``.

    Same quantity as :func:`distillable_entanglement` but parametrised by
    gamma, which avoids the cancellation in ``1/2 + sqrt(F (1 - F))`` when F
    is close to 1/2.
    """
    if gamma <= 0.0:
        return 0.0
    if gamma >= 1.0:
        return 1.0
    return _small_entropy(_hashing_tail(gamma))


def distillable_entanglement(F: float) -> float:
    """Hashing bound ``H[1/2 + sqrt(F (1 - F))]``, zero for ``F <= 1/2``."""
    if not (0.0 <= F <= 1.0):
        raise DomainError(f"fidelity must lie in [0, 1], got {F!r}")
    if F <= 0.5:
        return 0.0
    return distillable_entanglement_gamma(2.0 * F - 1.0)


def log_distillable_entanglement(log_gamma: float) -> float:
    """Natural log of the distillable entanglement, given ``log(gamma)``.

    Stays finite for coefficients far below the float range, which occur at
    high nesting levels.
    """
    if log_gamma == -math.inf:
        return -math.inf
    if log_gamma > 0.0:
        raise DomainError(f"gamma must be <= 1, got log(gamma)={log_gamma!r}")
    if log_gamma > _SMALL_LOG_GAMMA:
        e = distillable_entanglement_gamma(math.exp(log_gamma))
        return math.log(e) if e > 0.0 else -math.inf
    # H(y) = y (1 - ln y) / ln 2 + O(y^2), y = gamma^2 / 4 + O(gamma^4)
    log_y = 2.0 * log_gamma - LOG_4
    return log_y + math.log((1.0 - log_y) / LN2)


def dephase(state: BellMixture, t: float, tau_M: float) -> BellMixture:
    """Store ``state`` in a memory pair of lifetime ``tau_M`` for time ``t``."""
    if t < 0.0:
        raise DomainError(f"storage time must be >= 0, got {t!r}")
    if not tau_M > 0.0:
        raise DomainError(f"tau_M must be positive, got {tau_M!r}")
    return BellMixture(state.gamma * math.exp(-2.0 * t / tau_M))


def swap_merge(a: BellMixture, b: BellMixture) -> BellMixture:
    """Heralded entanglement swap of two dephased Bell mixtures."""
    return BellMixture(a.gamma * b.gamma)


def expected_waiting_steps(p: float) -> float:
    """Mean number of attempts until both of two segments are charged.

    Equal to ``E[max(k1, k2)]`` for two independent geometric variables.
    """
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must lie in (0, 1], got {p!r}")
    return (3.0 - 2.0 * p) / (p * (2.0 - p))
