"""Parameter sweeps behind the OBP/CP comparison figures.

Every sweep returns a :class:`Table` whose rows are sorted by the axis
columns, so output does not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from .core import LinkParams, UsageError
from .optimize import hierarchical_optimize, optimal_n_level1
from .rates import chain_cp, check_convention, rate_cp_level1

SweepKind = Literal[
    "grid_ratio", "nesting", "distance", "nopt_vs_p", "nopt_vs_beta", "ratio_asymptote"
]
SWEEP_KINDS: tuple[str, ...] = (
    "grid_ratio", "nesting", "distance", "nopt_vs_p", "nopt_vs_beta", "ratio_asymptote",
)


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    points: int
    scale: Literal["linear", "log"] = "linear"

    def __post_init__(self) -> None:
        if self.points < 2:
            raise UsageError("an axis needs at least 2 points")
        if not self.min < self.max:
            raise UsageError(f"axis min {self.min} must be below max {self.max}")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"unknown axis scale {self.scale!r}")
        if self.scale == "log" and self.min <= 0.0:
            raise UsageError("log axes need min > 0")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    axes: dict[str, Axis]
    base: LinkParams = field(default_factory=lambda: LinkParams(p=0.1, beta=0.9))
    convention: str = "paper"
    levels: int = 8

    def __post_init__(self) -> None:
        if self.kind not in SWEEP_KINDS:
            raise UsageError(f"unknown sweep kind {self.kind!r}; choose from {SWEEP_KINDS}")
        check_convention(self.convention)

    def axis(self, name: str) -> Axis:
        try:
            return self.axes[name]
        except KeyError:
            raise UsageError(f"sweep {self.kind!r} needs a {name!r} axis") from None


@dataclass(frozen=True)
class DistanceModel:
    """Fibre link whose charging probability and memory quality follow ``L0``.

    Lengths in km, ``c`` in m/s, ``tau_M`` in seconds.
    """

    L0: float
    tau_M: float
    L_a: float = 20.0
    c: float = 2e8

    def __post_init__(self) -> None:
        if min(self.L0, self.tau_M, self.L_a, self.c) <= 0.0:
            raise UsageError("distance model parameters must be positive")

    @property
    def p(self) -> float:
        return math.exp(-self.L0 / self.L_a)

    @property
    def beta(self) -> float:
        return math.exp(-(self.L0 / self.L_a) * (self.L_a * 1e3 / (self.c * self.tau_M)))

    @property
    def tau_C(self) -> float:
        return self.L0 * 1e3 / self.c

    def params(self, **kwargs) -> LinkParams:
        return LinkParams(p=self.p, beta=self.beta, tau_C=self.tau_C, **kwargs)


PRESETS: dict[str, tuple[str, dict[str, float]]] = {
    "soa": ("state-of-art link: L0=20 km, tau_M=tau_C=0.1 ms",
            dict(p=1e-4, beta=0.135, p_S=0.5, p_T=1.0, tau_C=1e-4)),
    "nesting-low-ps": ("nesting comparison, low swap success",
             dict(p=0.02, beta=0.2, p_S=0.5, p_T=1.0)),
    "nesting-high-ps": ("nesting comparison, high swap success",
                     dict(p=0.02, beta=0.2, p_S=0.75, p_T=1.0)),
    "nopt3": ("rate peaks at n_opt=3", dict(p=0.1, beta=0.9)),
    "nopt2": ("rate peaks at n_opt=2", dict(p=0.05, beta=0.8)),
    "nopt1": ("rate peaks at n_opt=1", dict(p=0.1, beta=0.4)),
}


def preset(name: str) -> dict[str, float]:
    try:
        return dict(PRESETS[name][1])
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _with(base: LinkParams, **kw) -> LinkParams:
    fields = dict(p=base.p, beta=base.beta, p_S=base.p_S, p_T=base.p_T, tau_C=base.tau_C, f=base.f)
    fields.update(kw)
    return LinkParams(**fields)


def level1_comparison(params: LinkParams) -> tuple[int, float | None]:
    """``(n_opt, log10 eta)``; eta is ``None`` where either rate vanishes."""
    opt = optimal_n_level1(params)
    r_cp = rate_cp_level1(params)
    if opt.rate_at_opt <= 0.0 or r_cp <= 0.0:
        return opt.n_opt, None
    return opt.n_opt, math.log10(opt.rate_at_opt) - math.log10(r_cp)


def sweep_grid_ratio(spec: SweepSpec) -> Table:
    rows = []
    for p in spec.axis("p").values():
        for beta in spec.axis("beta").values():
            n_opt, log_eta = level1_comparison(_with(spec.base, p=float(p), beta=float(beta)))
            rows.append((float(p), float(beta), n_opt, log_eta))
    rows.sort(key=lambda r: (r[0], r[1]))
    return Table(("p", "beta", "n_opt", "log10_eta"), rows)


def sweep_nesting(params: LinkParams, N_m: int, convention: str = "paper") -> Table:
    schedule, obp = hierarchical_optimize(params, N_m, convention)
    cp = chain_cp(params, N_m)
    rows = [
        (o.level, o.n_in, o.n_out, o.n_out_argmax, o.log10_rate, c.log10_rate,
         o.log10_rate - c.log10_rate)
        for o, c in zip(obp, cp)
    ]
    return Table(
        ("level", "n_in", "n_out", "n_out_argmax", "log10_rate_obp", "log10_rate_cp",
         "log10_eta"),
        rows,
    )


def sweep_distance(L0: Axis, tau_M: list[float], *, L_a: float = 20.0, c: float = 2e8,
                   p_S: float = 1.0) -> Table:
    rows = []
    for tm in tau_M:
        for length in L0.values():
            model = DistanceModel(float(length), tm, L_a, c)
            n_opt, log_eta = level1_comparison(model.params(p_S=p_S))
            rows.append((float(length), tm, model.p, model.beta, n_opt, log_eta))
    rows.sort(key=lambda r: (r[0], r[1]))
    return Table(("L0_km", "tau_M", "p", "beta", "n_opt", "log10_eta"), rows)


def sweep_nopt(spec: SweepSpec) -> Table:
    """``n_opt`` along p at fixed beta, or along beta at fixed p."""
    if spec.kind == "nopt_vs_p":
        points = [(float(p), spec.base.beta) for p in spec.axis("p").values()]
    elif spec.kind == "nopt_vs_beta":
        points = [(spec.base.p, float(b)) for b in spec.axis("beta").values()]
    else:
        raise UsageError(f"sweep_nopt cannot run kind {spec.kind!r}")
    rows = []
    for p, beta in points:
        opt = optimal_n_level1(_with(spec.base, p=p, beta=beta))
        rows.append((p, beta, opt.n_opt))
    rows.sort()
    return Table(("p", "beta", "n_opt"), rows)


def sweep_ratio_asymptote(spec: SweepSpec) -> Table:
    """Exact level-1 ratio next to the ``3.6/p`` small-(p, beta) estimate."""
    rows = []
    for p in spec.axis("p").values():
        n_opt, log_eta = level1_comparison(_with(spec.base, p=float(p)))
        eta = None if log_eta is None else 10.0**log_eta
        approx = 3.6 / float(p)
        rows.append((float(p), spec.base.beta, n_opt, eta, approx,
                     None if eta is None else eta / approx))
    rows.sort(key=lambda r: r[0])
    return Table(("p", "beta", "n_opt", "eta", "approx_3p6_over_p", "ratio_to_approx"), rows)


def run_sweep(spec: SweepSpec, *, tau_M: list[float] | None = None, L_a: float = 20.0,
              c: float = 2e8) -> Table:
    if spec.kind == "grid_ratio":
        return sweep_grid_ratio(spec)
    if spec.kind == "nesting":
        return sweep_nesting(spec.base, spec.levels, spec.convention)
    if spec.kind == "distance":
        return sweep_distance(spec.axis("L0"), tau_M or [1e-4, 1e-3], L_a=L_a, c=c,
                              p_S=spec.base.p_S)
    if spec.kind in ("nopt_vs_p", "nopt_vs_beta"):
        return sweep_nopt(spec)
    return sweep_ratio_asymptote(spec)


DEFAULT_AXES: dict[str, dict[str, Axis]] = {
    "grid_ratio": {"p": Axis(0.01, 1.0, 101, "log"), "beta": Axis(0.01, 1.0, 101)},
    "nesting": {},
    "distance": {"L0": Axis(1.0, 150.0, 150)},
    "nopt_vs_p": {"p": Axis(1e-3, 1.0, 61, "log")},
    "nopt_vs_beta": {"beta": Axis(0.01, 0.999, 100)},
    "ratio_asymptote": {"p": Axis(0.01, 0.1, 10, "log")},
}
