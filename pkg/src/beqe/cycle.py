"""Four-stroke Otto cycle over all momentum modes, with optional bath engineering."""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import dynamics as dyn
from .tim import TIM_EXPONENTS, CriticalExponents, CutoffPolicy, kz_cutoff, mode_gap, mode_grid

VARIANTS = ("bare", "adiabatic", "sta", "beqe", "beqe-single-stroke", "beqe-both")
_STA_RE = re.compile(r"^sta(?:-(exact|M(\d+)))?$")


def parse_variant(name: str):
    """Split a variant label into (kind, sta truncation or None)."""
    m = _STA_RE.match(name)
    if m:
        if m.group(2):
            return "sta", int(m.group(2))
        return "sta", "exact" if m.group(1) else None
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {VARIANTS} or sta-exact / sta-M<int>")
    return name, None


@dataclass(frozen=True)
class CycleConfig:
    model: str = "tim"
    L: int = 1000
    h1: float = 10.0
    h2: float = 1.0
    T_hot: float = 20.0
    T_cold: float = 1.0
    tau1: float = 10.0
    tau2: float = 10.0
    tau_hot: float = 2.0
    tau_cold: float = 2.0
    variant: str = "bare"
    cutoff: Optional[CutoffPolicy] = None
    exponents: CriticalExponents = TIM_EXPONENTS
    sta_truncation: Union[str, int] = "exact"
    bath_mode: str = "instantaneous"
    G0: float = 1.0
    cycles: int = 1
    steps: Optional[int] = None
    tol: float = dyn.HALVING_TOL
    # dense (ltim) model only
    J: float = 1.0
    Bz: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.model not in ("tim", "ltim"):
            raise ValueError(f"model must be 'tim' or 'ltim', got {self.model!r}")
        if not (self.T_hot > 0 and self.T_cold > 0):
            raise ValueError("temperatures must be positive")
        for name in ("tau1", "tau2", "tau_hot", "tau_cold"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        kind, trunc = parse_variant(self.variant)
        if kind.startswith("beqe") and self.cutoff is None:
            raise ValueError(f"variant {self.variant!r} needs a cutoff policy")
        if self.bath_mode not in ("instantaneous", "timed"):
            raise ValueError(f"bath_mode must be 'instantaneous' or 'timed', got {self.bath_mode!r}")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")

    @property
    def kind(self) -> str:
        return parse_variant(self.variant)[0]

    @property
    def truncation(self):
        trunc = parse_variant(self.variant)[1]
        return self.sta_truncation if trunc is None else trunc

    @property
    def label(self) -> str:
        if self.kind == "sta":
            t = self.truncation
            return "sta-exact" if t == "exact" else f"sta-M{t}"
        return self.variant

    @property
    def tau_total(self) -> float:
        return self.tau1 + self.tau2 + self.tau_hot + self.tau_cold

    def cutoffs(self):
        """(cold, hot) spectral cutoffs applied by this variant."""
        kind = self.kind
        if not kind.startswith("beqe"):
            return 0.0, 0.0
        dstar = kz_cutoff(self.cutoff, self.h1, self.h2, self.tau2, self.exponents)
        if kind == "beqe-single-stroke":
            return dstar, 0.0
        return dstar, self.cutoff.gamma * dstar


@dataclass
class ModeRecord:
    k: float
    Q_in: float
    Q_out: float
    W: float
    frozen_hot: bool
    frozen_cold: bool
    engine_mode: bool


@dataclass
class CycleResult:
    E_A: float
    E_B: float
    E_C: float
    E_D: float
    Q_in: float
    Q_out: float
    W: float
    eta: float
    P: float
    delta_star: float = 0.0
    per_mode: list = field(default_factory=list)

    @property
    def is_engine(self) -> bool:
        return self.Q_in > 0 and self.Q_out < 0 and self.W < 0


def power(W: float, config: CycleConfig) -> float:
    """P = -W / (tau1 + tau2 + tau_hot + tau_cold)."""
    total = config.tau_total
    if not total > 0:
        raise ValueError("total cycle time must be positive")
    return -W / total


def efficiency(W: float, Q_in: float) -> float:
    return -W / Q_in if Q_in > 0 else math.nan


class PropagatorCache:
    """Block propagators keyed by ramp and driving, shared across variants at one tau."""

    def __init__(self, ks, grid, tol):
        self.ks = ks
        self.grid = grid
        self.tol = tol
        self._store = {}

    def get(self, ramp: dyn.RampProtocol, cd):
        key = (ramp, cd)
        if key not in self._store:
            mirror = (ramp.reversed(), cd)
            if mirror in self._store:
                self._store[key] = dyn.transpose_block(*self._store[mirror])
            else:
                self._store[key] = dyn.block_propagators(self.ks, ramp, counterdiabatic=cd,
                                                         grid=self.grid, tol=self.tol)
        return self._store[key]


def _unitary(rho, ks, ramp, config, cache):
    kind = config.kind
    if kind == "adiabatic":
        return dyn.adiabatic_map_batch(rho, ks, ramp.h_start, ramp.h_end)
    cd = config.truncation if kind == "sta" else None
    a, b = cache.get(ramp, cd)
    return dyn.apply_block(rho, a, b)


def _dissipate(rho, ks, h, T, frozen, duration, config):
    if config.bath_mode == "instantaneous":
        out = dyn.thermal_state_batch(ks, h, T)
    else:
        bath = dyn.BathSpec(T, config.G0)
        out = np.stack([dyn.dissipative_stroke(r, k, h, bath, duration) for r, k in zip(rho, ks)])
    out[frozen] = rho[frozen]
    return out


def run_cycle(config: CycleConfig, cache: Optional[PropagatorCache] = None) -> CycleResult:
    """Run B -> C -> D -> A -> B' starting from the full Gibbs state at B.

    With ``cycles > 1`` the stroke map is iterated and the last pass is reported.
    """
    if config.model == "ltim":
        from .ltim import run_ltim_cycle
        return run_ltim_cycle(config)
    grid = mode_grid(config.L)
    ks = grid.momenta
    if cache is None:
        cache = PropagatorCache(ks, grid, config.tol)
    ramp_bc = dyn.RampProtocol(config.h1, config.h2, config.tau1, config.steps)
    ramp_da = dyn.RampProtocol(config.h2, config.h1, config.tau2, config.steps)
    cold_cut, hot_cut = config.cutoffs()
    gap1 = mode_gap(ks, config.h1)
    gap2 = mode_gap(ks, config.h2)
    # strict <: a mode exactly at the cutoff stays coupled
    frozen_cold = gap2 < cold_cut
    frozen_hot = gap1 < hot_cut

    rho_B = dyn.thermal_state_batch(ks, config.h1, config.T_hot)
    for _ in range(config.cycles):
        rho_C = _unitary(rho_B, ks, ramp_bc, config, cache)
        rho_D = _dissipate(rho_C, ks, config.h2, config.T_cold, frozen_cold, config.tau_cold, config)
        rho_A = _unitary(rho_D, ks, ramp_da, config, cache)
        rho_B = _dissipate(rho_A, ks, config.h1, config.T_hot, frozen_hot, config.tau_hot, config)
        e_c = dyn.mode_energy(rho_C, ks, config.h2)
        e_d = dyn.mode_energy(rho_D, ks, config.h2)
        e_a = dyn.mode_energy(rho_A, ks, config.h1)
        e_b = dyn.mode_energy(rho_B, ks, config.h1)

    q_in = e_b - e_a
    q_out = e_d - e_c
    w = -(q_in + q_out)
    Q_in = math.fsum(q_in)
    Q_out = math.fsum(q_out)
    W = -(Q_in + Q_out)
    records = [ModeRecord(float(k), float(qi), float(qo), float(wk), bool(fh), bool(fc),
                          bool(qi > 0 and qo < 0 and wk < 0))
               for k, qi, qo, wk, fh, fc in zip(ks, q_in, q_out, w, frozen_hot, frozen_cold)]
    return CycleResult(E_A=math.fsum(e_a), E_B=math.fsum(e_b), E_C=math.fsum(e_c),
                       E_D=math.fsum(e_d), Q_in=Q_in, Q_out=Q_out, W=W,
                       eta=efficiency(W, Q_in), P=power(W, config), delta_star=cold_cut,
                       per_mode=records)


# -- adiabatic limit in closed form -------------------------------------------

def _polarization(beta, eps):
    # (e^{-b e} - e^{b e}) / (2 + e^{b e} + e^{-b e}) == -tanh(b e / 2)
    return -np.tanh(0.5 * beta * eps)


def adiabatic_mode_heats(config: CycleConfig):
    """Per-mode (k, Q_in^k, Q_out^k) of the infinitely slow engine."""
    ks = mode_grid(config.L).momenta
    e1 = mode_gap(ks, config.h1)
    e2 = mode_gap(ks, config.h2)
    diff = _polarization(1.0 / config.T_hot, e1) - _polarization(1.0 / config.T_cold, e2)
    return ks, e1 * diff, -e2 * diff


def adiabatic_closed_form(config: CycleConfig):
    """(W, eta, Q_in, Q_out) of the adiabatic engine, summed over the mode grid."""
    _, q_in, q_out = adiabatic_mode_heats(config)
    Q_in = math.fsum(q_in)
    Q_out = math.fsum(q_out)
    W = -(Q_in + Q_out)
    return W, efficiency(W, Q_in), Q_in, Q_out


def _engine_ratio(x):
    # sinh(x) / (2 + cosh(x)) for x >= 0 without overflow
    q = np.exp(-x)
    return (1.0 - q * q) / (1.0 + 4.0 * q + q * q)


def is_engine_mode(k, config: CycleConfig):
    """Whether mode k has positive heat intake in the adiabatic limit (vectorized over k)."""
    lhs = _engine_ratio(0.5 * mode_gap(k, config.h1) / config.T_hot)
    rhs = _engine_ratio(0.5 * mode_gap(k, config.h2) / config.T_cold)
    return lhs < rhs


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepRow:
    variant: str
    tau: float
    result: Optional[CycleResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _sweep_point(args):
    config, tau, variants = args
    base = replace(config, tau1=tau, tau2=tau)
    if base.model == "ltim":
        from .ltim import LtimPropagatorCache
        cache = LtimPropagatorCache(base)
    else:
        grid = mode_grid(base.L)
        cache = PropagatorCache(grid.momenta, grid, base.tol)
    rows = []
    for v in variants:
        try:
            cfg = replace(base, variant=v)
            if cfg.model == "ltim":
                from .ltim import run_ltim_cycle
                res = run_ltim_cycle(cfg, cache)
            else:
                res = run_cycle(cfg, cache)
            rows.append(SweepRow(cfg.label, tau, res))
        except Exception as exc:  # recorded per row, sweep continues
            label = v
            rows.append(SweepRow(label, tau, error=f"{type(exc).__name__}: {exc}"))
    return rows


def sweep_tau(config: CycleConfig, taus, variants=None, workers: int = 1):
    """Run every variant at every tau (tau1 = tau2 = tau); rows ordered by tau, then variant."""
    taus = [float(t) for t in taus]
    if not taus:
        raise ValueError("tau grid is empty")
    if any(not t > 0 for t in taus):
        raise ValueError("every tau must be positive")
    variants = list(variants) if variants else [config.variant]
    for v in variants:
        parse_variant(v)
    jobs = [(config, t, variants) for t in taus]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_sweep_point, jobs))
    else:
        chunks = [_sweep_point(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]
