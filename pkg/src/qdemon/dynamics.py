"""Protocol steps acting on population tables.

Every step maps a :class:`JointState` to a new one. The read-out and the
detection are stochastic matrices on the atomic level, the atom-cavity
exchange is a basis permutation, and relaxation is a continuous-time Markov
chain propagated with a matrix exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import constants
from scipy.linalg import expm

from .statespace import E, F, G, TAIL_TOL, JointState, ThermalSpec, TruncationError, compose_initial

# Experimental constants. The sweep and Rabi values are documentation only:
# the adiabatic passage is modelled as an exact permutation.
CAVITY_FREQUENCY_HZ = 51e9
GF_FREQUENCY_HZ = 54e9
CRYOSTAT_TEMPERATURE_K = 1.5
RABI_FREQUENCY_HZ = 49e3
SWEEP_DETUNING_HZ = (100e3, -60e3)
SWEEP_DURATION_S = 60e-6


def bose_occupation(frequency_hz: float, temperature_k: float) -> float:
    x = constants.h * frequency_hz / (constants.k * temperature_k)
    return 1.0 / math.expm1(x)


N_ENV_DEFAULT = round(bose_occupation(CAVITY_FREQUENCY_HZ, CRYOSTAT_TEMPERATURE_K), 3)


@dataclass(frozen=True)
class ImperfectionSpec:
    """Read-out, relaxation and detection imperfections.

    Each channel has its own switch; a disabled channel behaves ideally
    (``eta = 1``, no relaxation, perfect detection).
    """

    eta_readout: float = 0.95
    t_flight: float = 1.2e-3
    T_atom: float = 30e-3
    T_cav: float = 25e-3
    n_env: float = N_ENV_DEFAULT
    eps_det: float = 0.05
    p_det: float = 0.5
    relax_split: float = 0.5
    readout_mixing: bool = True
    atom_relaxation: bool = True
    cavity_relaxation: bool = True
    detection: bool = True

    def __post_init__(self):
        for name in ("eta_readout", "eps_det", "p_det", "relax_split"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("t_flight", "T_atom", "T_cav"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be > 0, got {v}")
        if not self.n_env >= 0:
            raise ValueError(f"n_env must be >= 0, got {self.n_env}")

    @classmethod
    def ideal(cls, **kw) -> ImperfectionSpec:
        flags = dict(readout_mixing=False, atom_relaxation=False, cavity_relaxation=False, detection=False)
        flags.update(kw)
        return cls(**flags)

    @property
    def eta(self) -> float:
        return self.eta_readout if self.readout_mixing else 1.0

    @property
    def eps(self) -> float:
        return self.eps_det if self.detection else 0.0

    @property
    def efficiency(self) -> float:
        return self.p_det if self.detection else 1.0

    @property
    def relaxes(self) -> bool:
        return self.atom_relaxation or self.cavity_relaxation

    def without_relaxation(self) -> ImperfectionSpec:
        return replace(self, atom_relaxation=False, cavity_relaxation=False)


STAGES = ("initial", "post_readout", "post_feedback", "post_detection_model")


@dataclass(frozen=True)
class StageTrace:
    initial: JointState
    post_readout: JointState
    post_feedback: JointState
    post_detection_model: JointState
    demon_on: bool = True

    def __getitem__(self, stage: str) -> JointState:
        if stage not in STAGES:
            raise KeyError(stage)
        return getattr(self, stage)


def demon_readout(state: JointState, eta: float) -> JointState:
    """Move population ``g -> f`` with probability ``eta`` (and ``f -> g`` alike)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    p = state.p.copy()
    pf, pg = state.p[F], state.p[G]
    p[F] = (1.0 - eta) * pf + eta * pg
    p[G] = (1.0 - eta) * pg + eta * pf
    return JointState(p)


def adiabatic_swap(state: JointState, tail_tol: float | None = TAIL_TOL) -> JointState:
    """Resonant exchange ``(e, n) <-> (g, n+1)``.

    ``(g, 0)``, every ``(f, n)`` and the top state ``(e, n_max)`` are left in
    place, so the map is a permutation of the truncated basis.
    """
    if tail_tol is not None and state.p[E, -1] >= tail_tol:
        raise TruncationError(
            f"population {state.p[E, -1]:.3e} in (e, n_max={state.n_max}) would overflow the "
            f"Fock truncation; increase n_max",
        )
    p = state.p.copy()
    p[G, 1:] = state.p[E, :-1]
    p[E, :-1] = state.p[G, 1:]
    return JointState(p)


@lru_cache(maxsize=64)
def _generator(n_max: int, gamma_atom: float, gamma_down: float, gamma_up: float) -> np.ndarray:
    """Rate matrix ``L`` with ``dp/dt = L @ p`` on the flattened (level, n) index."""
    N = n_max + 1
    atom = np.zeros((3, 3))
    for src, dst in ((E, G), (G, F)):
        atom[dst, src] += gamma_atom
        atom[src, src] -= gamma_atom
    n = np.arange(N)
    cav = np.zeros((N, N))
    down = gamma_down * n[1:]
    up = gamma_up * (n[:-1] + 1)
    cav[n[:-1], n[1:]] += down
    cav[n[1:], n[:-1]] += up
    cav -= np.diag(cav.sum(axis=0))
    return np.kron(atom, np.eye(N)) + np.kron(np.eye(3), cav)


def relaxation_generator(n_max: int, imp: ImperfectionSpec) -> np.ndarray:
    gamma_atom = 1.0 / imp.T_atom if imp.atom_relaxation else 0.0
    if imp.cavity_relaxation:
        gamma_down = (1.0 + imp.n_env) / imp.T_cav
        gamma_up = imp.n_env / imp.T_cav
    else:
        gamma_down = gamma_up = 0.0
    return _generator(n_max, gamma_atom, gamma_down, gamma_up)


def relax(state: JointState, imp: ImperfectionSpec, duration: float) -> JointState:
    """Atomic decay ``e -> g -> f`` and cavity damping toward ``n_env``."""
    if not duration >= 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if duration == 0 or not imp.relaxes:
        return state
    L = relaxation_generator(state.n_max, imp)
    p = expm(L * duration) @ state.p.ravel()
    p = np.where(p < 0, 0.0, p)
    return JointState((p / p.sum()).reshape(state.p.shape))


def confusion_matrix(eps_det: float) -> np.ndarray:
    """``M[detected, true]``; errors split evenly over the two wrong levels."""
    if not 0.0 <= eps_det <= 1.0:
        raise ValueError(f"eps_det must lie in [0, 1], got {eps_det}")
    M = np.full((3, 3), eps_det / 2.0)
    np.fill_diagonal(M, 1.0 - eps_det)
    return M


def detect_channel(state: JointState, eps_det: float) -> JointState:
    return JointState(confusion_matrix(eps_det) @ state.p)


def run_stages(spec: ThermalSpec, imp: ImperfectionSpec, demon_on: bool = True) -> StageTrace:
    """Prepare, read out, exchange with the cavity, and model detection.

    Relaxation is applied for ``relax_split * t_flight`` before the exchange and
    for the rest of the flight after it; both parts belong to the feedback step.
    """
    initial = compose_initial(spec)
    readout = demon_readout(initial, imp.eta) if demon_on else initial
    before = imp.relax_split * imp.t_flight
    s = relax(readout, imp, before)
    s = adiabatic_swap(s, spec.tail_tol)
    feedback = relax(s, imp, imp.t_flight - before)
    detected = detect_channel(feedback, imp.eps)
    return StageTrace(initial, readout, feedback, detected, demon_on)
