"""Diagonal qubit-demon-cavity states.

Only populations are tracked. The physical basis is atomic level x Fock number,
with levels ordered ``(f, g, e)``. The logical basis is ``(s_Q, s_D, n)``::

    e -> (1, 0)    g -> (0, 0)    f -> (0, 1)    (1, 1) never populated

Inverse temperatures are always dimensionless (``beta * hbar * omega``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

LEVELS = ("f", "g", "e")
F, G, E = 0, 1, 2
SUBSYSTEMS = ("Q", "D", "C")

N_MAX_DEFAULT = 20
TAIL_TOL = 1e-9
NORM_TOL = 1e-12
PE_FLOOR = 1e-12

# physical level -> (s_Q, s_D)
LOGICAL_OF_LEVEL = {F: (0, 1), G: (0, 0), E: (1, 0)}


class TruncationError(ValueError):
    """Fock truncation too small for the requested populations."""

    def __init__(self, message: str, required_n_max: int | None = None):
        super().__init__(message)
        self.required_n_max = required_n_max


def _check_table(p: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries (min {p.min():.3e})")
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"{name} sums to {total!r}, not 1")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JointState:
    """Populations ``p[level, n]`` over ``{f, g, e} x {0..n_max}``."""

    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 2 or p.shape[0] != 3 or p.shape[1] < 2:
            raise ValueError(f"expected shape (3, n_max+1) with n_max >= 1, got {p.shape}")
        _check_table(p, "JointState")
        object.__setattr__(self, "p", p)

    @property
    def n_max(self) -> int:
        return self.p.shape[1] - 1

    @classmethod
    def pure(cls, level: str | int, n: int, n_max: int) -> JointState:
        idx = LEVELS.index(level) if isinstance(level, str) else level
        p = np.zeros((3, n_max + 1))
        p[idx, n] = 1.0
        return cls(p)

    def __getitem__(self, key):
        level, n = key
        if isinstance(level, str):
            level = LEVELS.index(level)
        return self.p[level, n]


@dataclass(frozen=True)
class LogicalState:
    """Populations ``P[s_Q, s_D, n]`` of the simulated qubit, demon and cavity."""

    P: np.ndarray

    def __post_init__(self):
        P = _frozen(self.P)
        if P.ndim != 3 or P.shape[:2] != (2, 2) or P.shape[2] < 2:
            raise ValueError(f"expected shape (2, 2, n_max+1), got {P.shape}")
        _check_table(P, "LogicalState")
        if np.any(P[1, 1] != 0):
            raise ValueError("forbidden sector |1_Q, 1_D> is populated")
        object.__setattr__(self, "P", P)

    @property
    def n_max(self) -> int:
        return self.P.shape[2] - 1


def required_n_max(n_th: float, tail_tol: float = TAIL_TOL) -> int:
    """Smallest truncation with thermal population ``P(n_max) < tail_tol``."""
    if n_th <= 0:
        return 1
    r = n_th / (1.0 + n_th)
    n = max(1, math.ceil(math.log(tail_tol * (1.0 + n_th)) / math.log(r)))
    # guard the float boundary on both sides
    while n > 1 and (1 - r) * r ** (n - 1) < tail_tol:
        n -= 1
    while (1 - r) * r**n >= tail_tol:
        n += 1
    return n


def default_n_max(n_th: float, tail_tol: float = TAIL_TOL) -> int:
    return max(N_MAX_DEFAULT, required_n_max(n_th, tail_tol))


def thermal_cavity(n_th: float, n_max: int | None = None, tail_tol: float | None = TAIL_TOL) -> np.ndarray:
    """Truncated Bose-Einstein photon distribution, renormalized.

    ``n_max=None`` picks the smallest truncation >= 20 meeting the tail criterion.
    Raises TruncationError when ``P(n_max)`` of the untruncated distribution is
    not below ``tail_tol``.
    """
    if not n_th >= 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    if n_max is None:
        n_max = default_n_max(n_th, tail_tol or TAIL_TOL)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    n = np.arange(n_max + 1)
    if n_th == 0:
        P = (n == 0).astype(float)
    else:
        r = n_th / (1.0 + n_th)
        P = (1.0 - r) * r**n
    if tail_tol is not None and P[-1] >= tail_tol:
        need = required_n_max(n_th, tail_tol)
        raise TruncationError(
            f"thermal tail P(n_max={n_max}) = {P[-1]:.3e} >= {tail_tol:g} at n_th={n_th}; "
            f"use n_max >= {need}",
            required_n_max=need,
        )
    return P / P.sum()


def qubit_populations(p_e: float) -> np.ndarray:
    """Return ``(p_g, p_e)``."""
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"p_e must lie strictly inside (0, 1), got {p_e}")
    return np.array([1.0 - p_e, p_e])


def clamp_pe(p_e: float, floor: float = PE_FLOOR) -> float:
    """Pull grid values that touch 0 or 1 inside the open interval."""
    return float(min(max(p_e, floor), 1.0 - floor))


def beta_q(p_e: float) -> float:
    return math.log((1.0 - p_e) / p_e)


def beta_c(n_th: float) -> float:
    return math.log((1.0 + n_th) / n_th)


def pe_from_beta(beta: float) -> float:
    """Excited population of a qubit at dimensionless inverse temperature ``beta``."""
    return 1.0 / (1.0 + math.exp(beta))


def beta_conversions(p_e: float, n_th: float) -> tuple[float, float, float, float]:
    """Return ``(beta_Q, beta_C, dbeta_tilde, dbeta)``.

    ``dbeta = beta_C - beta_Q`` and ``dbeta_tilde = 1 - T_C/T_Q = 1 - beta_Q/beta_C``.
    """
    qubit_populations(p_e)
    if not n_th > 0:
        raise ValueError(f"n_th must be > 0, got {n_th}")
    bq, bc = beta_q(p_e), beta_c(n_th)
    return bq, bc, 1.0 - bq / bc, bc - bq


@dataclass(frozen=True)
class ThermalSpec:
    """Initial qubit and cavity temperatures, set by populations.

    ``tail_tol=None`` switches off the truncation checks, for tiny test spaces.
    """

    p_e: float
    n_th: float
    n_max: int | None = None
    tail_tol: float | None = TAIL_TOL
    cavity: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.p_e < 1.0:
            raise ValueError(f"p_e must lie strictly inside (0, 1), got {self.p_e}")
        if not (self.n_th > 0 and math.isfinite(self.n_th)):
            raise ValueError(f"n_th must be finite and > 0, got {self.n_th}")
        n_max = default_n_max(self.n_th, self.tail_tol or TAIL_TOL) if self.n_max is None else int(self.n_max)
        object.__setattr__(self, "n_max", n_max)
        object.__setattr__(self, "cavity", _frozen(thermal_cavity(self.n_th, n_max, self.tail_tol)))

    @property
    def qubit(self) -> np.ndarray:
        return qubit_populations(self.p_e)

    @property
    def beta_Q(self) -> float:
        return beta_q(self.p_e)

    @property
    def beta_C(self) -> float:
        return beta_c(self.n_th)

    @property
    def dbeta(self) -> float:
        return self.beta_C - self.beta_Q

    @property
    def dbeta_tilde(self) -> float:
        return 1.0 - self.beta_Q / self.beta_C


def compose_initial(spec: ThermalSpec) -> JointState:
    """Product of the qubit and cavity Gibbs states; demon in ``|0_D>``."""
    p = np.zeros((3, spec.n_max + 1))
    p[G] = (1.0 - spec.p_e) * spec.cavity
    p[E] = spec.p_e * spec.cavity
    return JointState(p)


def logical_table(p: np.ndarray) -> np.ndarray:
    """Relabel ``(..., 3, N)`` level populations into ``(..., 2, 2, N)``."""
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.shape[:-2] + (2, 2, p.shape[-1]))
    for level, (sq, sd) in LOGICAL_OF_LEVEL.items():
        out[..., sq, sd, :] = p[..., level, :]
    return out


def logical_map(state: JointState) -> LogicalState:
    return LogicalState(logical_table(state.p))


def physical_map(state: LogicalState) -> JointState:
    """Inverse of :func:`logical_map`."""
    p = np.empty((3, state.n_max + 1))
    for level, (sq, sd) in LOGICAL_OF_LEVEL.items():
        p[level] = state.P[sq, sd]
    return JointState(p)


def _subsystem_axes(subsystems: Iterable[str]) -> tuple[int, ...]:
    keep = set()
    for s in subsystems:
        s = s.upper()
        if s not in SUBSYSTEMS:
            raise ValueError(f"unknown subsystem {s!r}; expected a subset of Q, D, C")
        keep.add(s)
    if not keep:
        raise ValueError("empty subsystem set")
    return tuple(i for i, s in enumerate(SUBSYSTEMS) if s not in keep)


def marginal_table(P: np.ndarray, subsystems: Iterable[str]) -> np.ndarray:
    """Marginal of a batched logical table ``(..., 2, 2, N)``; axes kept in Q, D, C order."""
    drop = _subsystem_axes(subsystems)
    if not drop:
        return P
    return P.sum(axis=tuple(a - 3 for a in drop))


def marginal(state: JointState | LogicalState, subsystems: Iterable[str]) -> np.ndarray:
    """Population of a subset of ``{Q, D, C}``, e.g. ``marginal(s, "QC")``."""
    if isinstance(state, JointState):
        state = logical_map(state)
    return marginal_table(state.P, subsystems)
