"""Temporally correlated geometric mmWave channel.

Each coherence block ``n`` carries ``L`` single-ray paths. Path gains follow
a first-order Gauss-Markov recursion

    a(n) = rho * a(n-1) + sqrt(1 - rho^2) * beta(n),

and every angle of departure / arrival takes an independent uniform step in
``(-delta, delta)`` per block. Arrays are half-wavelength ULAs with
unit-norm response vectors.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from mmtrack.numerics import bessel_j0, wrap_angle


class JakesCorrelationWarning(UserWarning):
    """The Jakes correlation fell outside ``[0, 1]``."""


def jakes_rho(f_d, t_bl):
    """Block-to-block correlation ``J0(2 pi f_d t_bl)`` of the Jakes model.

    Values within 1e-12 of the ``[0, 1]`` boundary are clamped onto it.
    Anything further outside is returned unchanged with a
    :class:`JakesCorrelationWarning`.
    """
    if f_d < 0:
        raise ValueError("f_d must be nonnegative")
    if t_bl <= 0:
        raise ValueError("t_bl must be positive")
    rho = bessel_j0(2 * math.pi * f_d * t_bl)
    if -1e-12 < rho < 0.0:
        return 0.0
    if 1.0 < rho < 1.0 + 1e-12:
        return 1.0
    if rho < 0.0:
        warnings.warn(
            f"Jakes correlation J0(2*pi*{f_d}*{t_bl}) = {rho:.6g} is negative; passing it through",
            JakesCorrelationWarning,
            stacklevel=2,
        )
    return rho


@dataclass(frozen=True)
class ChannelParams:
    """Geometry and statistics of the channel.

    ``rho`` wins over ``(f_d, t_bl)`` when both are given. ``pathloss``
    scales the per-path gain variance to ``n_t * n_r / pathloss``.
    """

    n_t: int
    n_r: int
    paths: int = 1
    delta: float = math.radians(3.0)
    rho: float | None = None
    f_d: float | None = None
    t_bl: float | None = None
    pathloss: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValueError("antenna counts must be positive")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not self.pathloss > 0:
            raise ValueError("pathloss must be > 0")
        if self.rho is not None:
            if not 0.0 <= self.rho <= 1.0:
                raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        elif self.f_d is not None and self.t_bl is not None:
            object.__setattr__(self, "rho", jakes_rho(self.f_d, self.t_bl))
        else:
            raise ValueError("give either rho or both f_d and t_bl")

    @property
    def gain_variance(self):
        return self.n_t * self.n_r / self.pathloss


@dataclass(frozen=True, eq=False)
class ChannelState:
    block_index: int
    aods: np.ndarray
    aoas: np.ndarray
    gains: np.ndarray
    h: np.ndarray = field(repr=False)


def ula_response(n, angle):
    """Unit-norm half-wavelength ULA response ``exp(j pi k sin(angle)) / sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(angle)) / np.sqrt(n)


def steering_matrix(n, angles):
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("need at least one angle")
    k = np.arange(n)[:, None]
    return np.exp(1j * np.pi * k * np.sin(angles)[None, :]) / np.sqrt(n)


def assemble_channel(params, aods, aoas, gains):
    """``A_R(aoas) diag(gains) A_T(aods)^H`` as an ``n_r x n_t`` matrix."""
    aods = np.atleast_1d(aods)
    aoas = np.atleast_1d(aoas)
    gains = np.atleast_1d(gains)
    if not (aods.size == aoas.size == gains.size):
        raise ValueError(f"length mismatch: {aods.size} AoDs, {aoas.size} AoAs, {gains.size} gains")
    a_t = steering_matrix(params.n_t, aods)
    a_r = steering_matrix(params.n_r, aoas)
    return (a_r * gains[None, :]) @ a_t.conj().T


def _complex_normal(rng, size, var):
    return np.sqrt(var / 2.0) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def init_channel(params, rng):
    """Draw block 1: uniform angles on ``[0, 2 pi)``, gains ``CN(0, n_t n_r / pathloss)``."""
    l = params.paths
    aods = rng.uniform(0.0, 2 * np.pi, l)
    aoas = rng.uniform(0.0, 2 * np.pi, l)
    gains = _complex_normal(rng, l, params.gain_variance)
    aods, aoas = wrap_angle(aods), wrap_angle(aoas)
    return ChannelState(1, aods, aoas, gains, assemble_channel(params, aods, aoas, gains))


def evolve_channel(state, params, rng):
    l = params.paths
    rho = params.rho
    beta = _complex_normal(rng, l, params.gain_variance)
    gains = rho * state.gains + np.sqrt(1.0 - rho * rho) * beta
    d = params.delta
    aods = wrap_angle(state.aods + rng.uniform(-d, d, l))
    aoas = wrap_angle(state.aoas + rng.uniform(-d, d, l))
    return ChannelState(
        state.block_index + 1, aods, aoas, gains, assemble_channel(params, aods, aoas, gains)
    )


def channel_sequence(params, blocks, rng):
    """List of ``blocks`` consecutive channel states starting at block 1."""
    state = init_channel(params, rng)
    out = [state]
    for _ in range(blocks - 1):
        state = evolve_channel(state, params, rng)
        out.append(state)
    return out
