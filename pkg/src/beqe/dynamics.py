"""Single-mode density-matrix dynamics.

States are 4x4 complex arrays in the basis |0>, |k>, |-k>, |k,-k>. Unitary
ramps only act on the {|0>, |k,-k>} block; they are integrated as SU(2)
propagators (see ``_kernels``) and conjugated onto the full state.
Functions whose names end in ``_batch`` operate on stacks of shape (m, 4, 4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .tim import ModeGrid, mode_gap

STATE_TOL = 1e-10
HALVING_TOL = 1e-7
MAX_REFINEMENTS = 6
MIN_STEPS = 200
STEP_NORM = 1.0  # max over the ramp of dt * ||H(t)||


class IntegrationError(RuntimeError):
    """Step-halving did not converge within the refinement limit."""


@dataclass(frozen=True)
class RampProtocol:
    """Linear ramp h(t) = h_start + (h_end - h_start) t / tau.

    ``steps`` fixes the starting substep count; None picks it from the
    Hamiltonian norm. tau = 0 is a sudden quench (identity propagator).
    """

    h_start: float
    h_end: float
    tau: float
    steps: Optional[int] = None

    def __post_init__(self):
        if not self.tau >= 0 or not math.isfinite(self.tau):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")
        if self.steps is not None and self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def hdot(self) -> float:
        return (self.h_end - self.h_start) / self.tau if self.tau > 0 else 0.0

    def reversed(self) -> "RampProtocol":
        return RampProtocol(self.h_end, self.h_start, self.tau, self.steps)


@dataclass(frozen=True)
class BathSpec:
    """Bath with flat spectral amplitude G0 above ``delta_cut`` and zero below."""

    T: float
    G0: float = 1.0
    delta_cut: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"bath temperature must be positive, got {self.T}")
        if not self.G0 > 0:
            raise ValueError(f"G0 must be positive, got {self.G0}")
        if self.delta_cut < 0:
            raise ValueError(f"delta_cut must be >= 0, got {self.delta_cut}")

    def spectral(self, delta: float) -> float:
        """G(delta) for either sign of delta, KMS-related."""
        if abs(delta) < self.delta_cut:
            return 0.0
        if delta >= 0:
            return self.G0
        return self.G0 * math.exp(delta / self.T)


def validate_state(rho, tol: float = STATE_TOL) -> None:
    """Raise ValueError unless rho (or a stack of them) is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (4, 4):
        raise ValueError(f"mode state must be 4x4, got shape {rho.shape}")
    herm = np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))).max()
    if herm > tol:
        raise ValueError(f"state not Hermitian (deviation {herm:.3e})")
    tr = np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0).max()
    if tr > tol:
        raise ValueError(f"state trace deviates from 1 by {tr:.3e}")
    herm_part = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    lam = np.linalg.eigvalsh(herm_part).min()
    if lam < -tol:
        raise ValueError(f"state has negative eigenvalue {lam:.3e}")


# -- eigenbasis helpers -------------------------------------------------------

def _angle(k, h):
    return np.arctan2(np.sin(k), h - np.cos(k))


def block_eigvecs(k, h):
    """Ground and excited vectors of the {|0>, |k,-k>} block, shape (..., 2) each."""
    half = 0.5 * _angle(k, h)
    c, s = np.cos(half), np.sin(half)
    return np.stack([c, -s], -1), np.stack([s, c], -1)


def eigenbasis(k: float, h: float) -> np.ndarray:
    """Real orthogonal matrix whose columns are the levels -eps, 0 (|k>), 0 (|-k>), +eps."""
    g, e = block_eigvecs(k, h)
    V = np.zeros((4, 4))
    V[[0, 3], 0] = g
    V[1, 1] = 1.0
    V[2, 2] = 1.0
    V[[0, 3], 3] = e
    return V


def eigen_populations(rho, k, h) -> np.ndarray:
    """Populations of the four levels (ground, |k>, |-k>, top); works on stacks."""
    rho = np.asarray(rho)
    g, e = block_eigvecs(np.asarray(k), h)
    blk = rho[..., [0, 3]][..., [0, 3], :]
    p0 = np.einsum("...i,...ij,...j->...", g, blk, g).real
    p3 = np.einsum("...i,...ij,...j->...", e, blk, e).real
    return np.stack([p0, rho[..., 1, 1].real, rho[..., 2, 2].real, p3], -1)


def mode_energy(rho, k, h):
    """Tr(H_k(h) rho); works on stacks with matching ``k``."""
    rho = np.asarray(rho)
    d = 2.0 * (h - np.cos(k))
    return (-d * (rho[..., 0, 0] - rho[..., 3, 3]).real
            + 4.0 * np.sin(k) * rho[..., 0, 3].real)


# -- thermal states -----------------------------------------------------------

def _boltzmann(eps, T):
    # weights of (-eps, 0, 0, +eps), shifted for stability
    x = np.asarray(eps, dtype=float) / T
    w0 = np.ones_like(x)
    w1 = np.exp(-x)
    w3 = np.exp(-2.0 * x)
    Z = w0 + 2.0 * w1 + w3
    return np.stack([w0, w1, w1, w3], -1) / Z[..., None]


def thermal_state_batch(ks, h: float, T: float) -> np.ndarray:
    ks = np.asarray(ks, dtype=float)
    p = _boltzmann(mode_gap(ks, h), T)
    g, e = block_eigvecs(ks, h)
    rho = np.zeros(ks.shape + (4, 4), dtype=complex)
    blk = p[..., 0, None, None] * g[..., :, None] * g[..., None, :] \
        + p[..., 3, None, None] * e[..., :, None] * e[..., None, :]
    rho[..., 0, 0] = blk[..., 0, 0]
    rho[..., 0, 3] = blk[..., 0, 1]
    rho[..., 3, 0] = blk[..., 1, 0]
    rho[..., 3, 3] = blk[..., 1, 1]
    rho[..., 1, 1] = p[..., 1]
    rho[..., 2, 2] = p[..., 2]
    return rho


def thermal_state(k: float, h: float, T: float) -> np.ndarray:
    """Gibbs state of mode k at field h and temperature T (T may be inf)."""
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    return thermal_state_batch(np.float64(k), h, T)


# -- unitary ramps ------------------------------------------------------------

def cd_field(k, h, hdot):
    """Rotation rate of the block eigenbasis, half of d(theta)/dt with tan(theta) = sin k / (h - cos k).

    The exact counterdiabatic term is -cd_field * sigma^y on the {|0>, |k,-k>} block.
    """
    return 0.5 * hdot * (-np.sin(k)) / ((h - np.cos(k)) ** 2 + np.sin(k) ** 2)


def _cd_peak(ks, ramp: RampProtocol):
    lo, hi = sorted((ramp.h_start, ramp.h_end))
    h_star = np.clip(np.cos(ks), lo, hi)
    return np.abs(cd_field(ks, h_star, ramp.hdot)).max()


def default_steps(ks, ramp: RampProtocol, counterdiabatic: bool = False) -> int:
    """Substep count with dt * max ||H(t)|| <= STEP_NORM and at least MIN_STEPS."""
    ks = np.asarray(ks, dtype=float)
    hmax = max(mode_gap(ks, ramp.h_start).max(), mode_gap(ks, ramp.h_end).max())
    if counterdiabatic:
        hmax = max(hmax, 2.0 * _cd_peak(ks, ramp))
    return max(MIN_STEPS, int(math.ceil(ramp.tau * hmax / STEP_NORM)))


def sine_projector(grid: ModeGrid, M: int) -> np.ndarray:
    """Least-squares map from a k-profile on the grid to coefficients of sin(m k), m = 1..M."""
    if not 1 <= M <= len(grid):
        raise ValueError(f"truncation order must be in 1..{len(grid)}, got {M}")
    S = np.sin(np.outer(grid.momenta, np.arange(1, M + 1)))
    return np.linalg.pinv(S)


def block_propagators(ks, ramp: RampProtocol, counterdiabatic: Union[None, str, int] = None,
                      grid: Optional[ModeGrid] = None, tol: float = HALVING_TOL,
                      max_refinements: int = MAX_REFINEMENTS):
    """SU(2) block propagators (a, b) for every k in ``ks``.

    counterdiabatic: None (bare ramp), "exact", or an int M for the sine-series
    truncation fitted on ``grid``. Accuracy is checked by comparing against the
    run with half as many steps; the step count doubles until the Richardson
    error estimate is below ``tol``.
    """
    ks = np.ascontiguousarray(np.atleast_1d(np.asarray(ks, dtype=float)))
    if ramp.tau == 0:
        return np.ones(ks.size, complex), np.zeros(ks.size, complex)
    with_cd = counterdiabatic is not None
    if isinstance(counterdiabatic, str):
        if counterdiabatic != "exact":
            raise ValueError(f"counterdiabatic must be None, 'exact' or an int, got {counterdiabatic!r}")
        runner = lambda n: _kernels.ramp_su2(ks, ramp.h_start, ramp.h_end, ramp.tau, n, True)
    elif with_cd:
        if grid is None:
            raise ValueError("truncated counterdiabatic driving needs the mode grid")
        proj = sine_projector(grid, int(counterdiabatic))
        sin_q = np.sin(np.outer(ks, np.arange(1, proj.shape[0] + 1)))
        gks = np.ascontiguousarray(grid.momenta, dtype=float)
        runner = lambda n: _kernels.ramp_su2_projected(ks, gks, proj, sin_q, ramp.h_start,
                                                       ramp.h_end, ramp.tau, n)
    else:
        runner = lambda n: _kernels.ramp_su2(ks, ramp.h_start, ramp.h_end, ramp.tau, n, False)

    pool = ks if grid is None else np.concatenate([ks, grid.momenta])
    n = ramp.steps or default_steps(pool, ramp, with_cd)
    n += n % 2
    coarse = runner(n // 2)
    for _ in range(max_refinements + 1):
        fine = runner(n)
        err = max(np.abs(fine[0] - coarse[0]).max(), np.abs(fine[1] - coarse[1]).max()) / 15.0
        if err <= tol:
            return fine
        coarse = fine
        n *= 2
    raise IntegrationError(f"ramp {ramp} did not converge: error estimate {err:.2e} > {tol:.1e} "
                           f"after {max_refinements} refinements")


def transpose_block(a, b):
    """Propagator of the mirrored ramp, U -> U^T (holds because H^T(t) equals the reversed-ramp H)."""
    return a, -np.conj(b)


def apply_block(rho, a, b):
    """rho -> U rho U^dagger with U acting on the {|0>, |k,-k>} block; works on stacks."""
    rho = np.asarray(rho)
    a = np.asarray(a)
    b = np.asarray(b)
    U = np.zeros(a.shape + (4, 4), dtype=complex)
    U[..., 0, 0] = a
    U[..., 0, 3] = -np.conj(b)
    U[..., 3, 0] = b
    U[..., 3, 3] = np.conj(a)
    U[..., 1, 1] = 1.0
    U[..., 2, 2] = 1.0
    out = U @ rho @ np.conj(np.swapaxes(U, -1, -2))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def evolve_unitary(state, k: float, ramp: RampProtocol, **kw) -> np.ndarray:
    """Von Neumann evolution of one mode under the bare linear ramp."""
    a, b = block_propagators([k], ramp, **kw)
    return apply_block(state, a[0], b[0])


def evolve_sta(state, k: float, ramp: RampProtocol, truncation: Union[str, int] = "exact",
               grid: Optional[ModeGrid] = None, **kw) -> np.ndarray:
    """Evolution with counterdiabatic driving, exact or truncated to M sine harmonics."""
    a, b = block_propagators([k], ramp, counterdiabatic=truncation, grid=grid, **kw)
    return apply_block(state, a[0], b[0])


def adiabatic_map_batch(rho, ks, h_from: float, h_to: float) -> np.ndarray:
    rho = np.asarray(rho)
    ks = np.asarray(ks, dtype=float)
    p = eigen_populations(rho, ks, h_from)
    g, e = block_eigvecs(ks, h_to)
    blk = p[..., 0, None, None] * g[..., :, None] * g[..., None, :] \
        + p[..., 3, None, None] * e[..., :, None] * e[..., None, :]
    out = np.zeros_like(rho, dtype=complex)
    out[..., 1:3, 1:3] = rho[..., 1:3, 1:3]
    out[..., 0, 0] = blk[..., 0, 0]
    out[..., 0, 3] = blk[..., 0, 1]
    out[..., 3, 0] = blk[..., 1, 0]
    out[..., 3, 3] = blk[..., 1, 1]
    return out


def adiabatic_map(state, k: float, h_from: float, h_to: float) -> np.ndarray:
    """Ideal adiabatic transport: eigen-populations carried to the eigenbasis at h_to.

    Coherences between non-degenerate levels are dropped; the degenerate
    {|k>, |-k>} block is kept as is.
    """
    return adiabatic_map_batch(state, np.float64(k), h_from, h_to)


# -- dissipation --------------------------------------------------------------

# adjacent non-degenerate pairs (lower, upper) in eigenbasis ordering
_JUMPS = ((0, 1), (0, 2), (1, 3), (2, 3))


def lindblad_generator(eps: float, bath: BathSpec) -> np.ndarray:
    """16x16 generator in the eigenbasis, acting on row-major vec(rho)."""
    eye = np.eye(4)
    H = np.diag([-eps, 0.0, 0.0, eps])
    gen = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    down = bath.G0
    up = bath.G0 * math.exp(-eps / bath.T)
    for lo, hi in _JUMPS:
        for rate, (i, j) in ((down, (lo, hi)), (up, (hi, lo))):
            Lop = np.zeros((4, 4))
            Lop[i, j] = 1.0
            LdL = Lop.T @ Lop
            gen += rate * (np.kron(Lop, Lop)
                           - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return gen


def dissipative_stroke(state, k: float, h: float, bath: BathSpec,
                       duration: Optional[float] = None) -> np.ndarray:
    """Couple one mode to a bath at fixed field h.

    Modes whose gap is below ``bath.delta_cut`` are left untouched. With
    ``duration=None`` the mode is taken to its steady state (the Gibbs state);
    otherwise the Lindblad equation is integrated for that long.
    """
    rho = np.asarray(state, dtype=complex)
    eps = float(mode_gap(k, h))
    if eps < bath.delta_cut:
        return rho.copy()
    if duration is None:
        return thermal_state(k, h, bath.T)
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    V = eigenbasis(k, h)
    r = V.T @ rho @ V
    r = (expm(lindblad_generator(eps, bath) * duration) @ r.reshape(-1)).reshape(4, 4)
    out = V @ r @ V.T
    return 0.5 * (out + out.conj().T)
