"""Transverse-field Ising chain in momentum space.

Mode grid, 4x4 mode Hamiltonians, gaps, and the Kibble-Zurek freeze-out
time and bath cutoffs derived from them. Units: J = 1, so h_c = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

H_CRITICAL = 1.0


@dataclass(frozen=True)
class CriticalExponents:
    nu: float = 1.0
    z: float = 1.0

    def __post_init__(self):
        if self.nu <= 0 or self.z <= 0:
            raise ValueError(f"critical exponents must be positive, got nu={self.nu}, z={self.z}")

    @property
    def nuz(self) -> float:
        return self.nu * self.z


TIM_EXPONENTS = CriticalExponents(1.0, 1.0)


@dataclass(frozen=True)
class ModeGrid:
    L: int
    momenta: np.ndarray

    def __len__(self):
        return len(self.momenta)


def mode_grid(L: int) -> ModeGrid:
    """Antiperiodic-sector momenta k_n = (2n - 1) pi / L, n = 1..L/2."""
    if isinstance(L, bool) or int(L) != L or L < 2 or L % 2:
        raise ValueError(f"L must be an even integer >= 2, got {L!r}")
    L = int(L)
    n = np.arange(1, L // 2 + 1)
    ks = (2 * n - 1) * np.pi / L
    ks.setflags(write=False)
    return ModeGrid(L, ks)


def mode_hamiltonian(k: float, h: float) -> np.ndarray:
    """4x4 mode Hamiltonian in the basis |0>, |k>, |-k>, |k,-k>."""
    H = np.zeros((4, 4), dtype=complex)
    d = 2.0 * (h - math.cos(k))
    H[0, 0] = -d
    H[3, 3] = d
    H[0, 3] = H[3, 0] = 2.0 * math.sin(k)
    return H


def mode_gap(k, h):
    """Gap between adjacent non-degenerate levels, eps_k = 2 sqrt((h - cos k)^2 + sin^2 k).

    Vectorized over ``k`` and ``h``.
    """
    return 2.0 * np.hypot(h - np.cos(k), np.sin(k))


def kz_freezeout_time(h1: float, h2: float, tau: float,
                      exps: CriticalExponents = TIM_EXPONENTS) -> float:
    """Time at which a linear ramp of duration tau leaves the adiabatic regime."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if h1 == h2:
        raise ValueError("h1 and h2 must differ")
    dh = h1 - h2
    t_c = tau * (H_CRITICAL - h2) / dh
    return t_c + (tau / dh) * (exps.nuz * dh / tau) ** (1.0 / (1.0 + exps.nuz))


CUTOFF_KINDS = ("kz-critical", "non-critical", "constant")


@dataclass(frozen=True)
class CutoffPolicy:
    """How the cold-bath cutoff is chosen; the hot bath uses ``gamma`` times it."""

    kind: str = "kz-critical"
    C1: float = 1.0
    C2: float = 2.0
    C3: float = 0.0
    value: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in CUTOFF_KINDS:
            raise ValueError(f"cutoff kind must be one of {CUTOFF_KINDS}, got {self.kind!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.kind == "kz-critical" and self.C1 <= 0:
            raise ValueError(f"C1 must be positive, got {self.C1}")
        if self.kind == "non-critical" and self.C2 <= 0:
            raise ValueError(f"C2 must be positive, got {self.C2}")
        if self.kind == "constant" and self.value < 0:
            raise ValueError(f"constant cutoff must be >= 0, got {self.value}")


def _decimal_exact(C2, h2, C3, power):
    """C2 |h2 - 1|^power + C3 evaluated exactly on the decimal inputs, rounded once.

    Plain floats give 2 * |0.8 - 1| + 0.08 = 0.4799999999999999; reading each
    input as its shortest decimal makes values such as 0.48 come out exact.
    """
    dec = lambda x: Fraction(repr(float(x)))
    return float(dec(C2) * abs(dec(h2) - dec(H_CRITICAL)) ** power + dec(C3))


def kz_cutoff(policy: CutoffPolicy, h1: float, h2: float, tau: float,
              exps: CriticalExponents = TIM_EXPONENTS) -> float:
    """Cold-bath lower cutoff Delta* for a ramp between h1 and h2 of duration tau."""
    if policy.kind == "constant":
        return float(policy.value)
    if policy.kind == "non-critical":
        dist = abs(h2 - H_CRITICAL)
        if dist == 0 and policy.C3 == 0:
            raise ValueError("non-critical cutoff at h2 = h_c with C3 = 0 is zero; the filter would do nothing")
        if float(exps.nuz).is_integer():
            return _decimal_exact(policy.C2, h2, policy.C3, int(exps.nuz))
        return policy.C2 * dist ** exps.nuz + policy.C3
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    nuz = exps.nuz
    if nuz == 1.0:
        # sqrt keeps the TIM case exact
        return policy.C1 * math.sqrt(abs(h1 - h2) / tau)
    return policy.C1 * (nuz * abs(h1 - h2) / tau) ** (nuz / (1.0 + nuz))
