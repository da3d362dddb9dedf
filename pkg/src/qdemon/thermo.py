"""Entropies, heats and the information balance of the feedback step.

All quantities are in nats and photon units (``hbar * omega = 1``). The
feedback step runs from the ``post_readout`` snapshot to the
``post_feedback`` snapshot; detection is kept out of this accounting.

Functions ending in ``_table`` work on raw logical arrays with arbitrary
leading batch axes, which is what the bootstrap relies on.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from . import dynamics
from .statespace import (
    JointState,
    LogicalState,
    ThermalSpec,
    logical_map,
    logical_table,
    marginal_table,
)

MI_CLAMP = 1e-12
ROUTE_TOL = 1e-10


def _xlogx(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log(safe), 0.0)


def entropy_table(p: np.ndarray, ndim: int) -> np.ndarray:
    """Shannon entropy over the last ``ndim`` axes."""
    return -_xlogx(p).sum(axis=tuple(range(-ndim, 0)))


def entropy(dist) -> float:
    """``-sum p ln p`` with ``0 ln 0 = 0``."""
    p = np.asarray(dist.P if isinstance(dist, LogicalState) else getattr(dist, "p", dist), dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"entropy needs a normalized distribution (sum={p.sum()!r})")
    return float(entropy_table(p, p.ndim))


def _clamp_mi(value):
    value = np.asarray(value, dtype=float)
    if np.any(value < -MI_CLAMP):
        raise ArithmeticError(f"mutual information {value.min():.3e} is negative beyond round-off")
    out = np.maximum(value, 0.0)
    return float(out) if out.ndim == 0 else out


def _parse_block(block) -> frozenset[str]:
    return frozenset(s.upper() for s in block)


def mutual_information_table(P: np.ndarray, a, b):
    A, B = _parse_block(a), _parse_block(b)
    if not A or not B:
        raise ValueError("both partition blocks must be non-empty")
    if A & B:
        raise ValueError(f"partition blocks overlap: {sorted(A & B)}")
    S = lambda block: entropy_table(marginal_table(P, block), len(block))  # noqa: E731
    return _clamp_mi(S(A) + S(B) - S(A | B))


def mutual_information(state: LogicalState | JointState, a, b) -> float:
    """``I_{A:B} = S_A + S_B - S_AB``, e.g. ``mutual_information(s, "QC", "D")``."""
    if isinstance(state, JointState):
        state = logical_map(state)
    return float(mutual_information_table(state.P, a, b))


def relative_entropy_table(p: np.ndarray, q: np.ndarray, ndim: int):
    """KL divergence over the last ``ndim`` axes; ``inf`` where support fails."""
    p = np.asarray(p, dtype=float)
    q = np.broadcast_to(np.asarray(q, dtype=float), p.shape)
    axes = tuple(range(-ndim, 0))
    bad = np.any((p > 0) & (q <= 0), axis=axes)
    ratio = np.where((p > 0) & (q > 0), p / np.where(q > 0, q, 1.0), 1.0)
    d = np.sum(np.where(p > 0, p * np.log(ratio), 0.0), axis=axes)
    return np.where(bad, np.inf, d)


def relative_entropy(dist, ref) -> float:
    """``sum p ln(p/q)``; returns ``inf`` if ``ref`` vanishes on the support of ``dist``."""
    p, q = np.asarray(dist, dtype=float), np.asarray(ref, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    for name, x in (("dist", p), ("ref", q)):
        if np.any(x < 0) or abs(x.sum() - 1.0) > 1e-10:
            raise ValueError(f"{name} is not a normalized distribution")
    return float(relative_entropy_table(p, q, p.ndim))


class RelativeEntropyQC(NamedTuple):
    D_Q: float
    D_C: float
    I_Q_C: float
    D_QC: float


def gibbs_qc(spec: ThermalSpec) -> np.ndarray:
    return np.outer(spec.qubit, spec.cavity)


def _relative_entropy_qc_table(P: np.ndarray, spec: ThermalSpec):
    rho_q = marginal_table(P, "Q")
    rho_c = marginal_table(P, "C")
    rho_qc = marginal_table(P, "QC")
    D_Q = relative_entropy_table(rho_q, spec.qubit, 1)
    D_C = relative_entropy_table(rho_c, spec.cavity, 1)
    I_QC = mutual_information_table(P, "Q", "C")
    total = D_Q + D_C + I_QC
    direct = relative_entropy_table(rho_qc, gibbs_qc(spec), 2)
    finite = np.isfinite(direct)
    gap = np.abs(np.where(finite, total - direct, 0.0))
    if np.any(gap > ROUTE_TOL):
        raise ArithmeticError(f"D_QC decomposition disagrees with the joint route by {gap.max():.3e}")
    return D_Q, D_C, I_QC, total, direct


def relative_entropy_QC(state_post: LogicalState | JointState, spec: ThermalSpec) -> RelativeEntropyQC:
    """Distance of the final qubit-cavity state from the initial Gibbs product.

    Computed both as ``D_Q + D_C + I_Q:C`` and directly on the joint marginal;
    the two must agree within ``1e-10``.
    """
    if isinstance(state_post, JointState):
        state_post = logical_map(state_post)
    D_Q, D_C, I_QC, total, _ = _relative_entropy_qc_table(state_post.P, spec)
    return RelativeEntropyQC(float(D_Q), float(D_C), float(I_QC), float(total))


def mean_photons_table(P: np.ndarray):
    pc = marginal_table(P, "C")
    return pc @ np.arange(pc.shape[-1])


def excited_table(P: np.ndarray):
    return marginal_table(P, "Q")[..., 1]


def heats(trace: dynamics.StageTrace) -> tuple[float, float]:
    """``(Q_Q, Q_C)`` absorbed during the feedback step, in photon units."""
    pre = logical_table(trace.post_readout.p)
    post = logical_table(trace.post_feedback.p)
    return (
        float(excited_table(post) - excited_table(pre)),
        float(mean_photons_table(post) - mean_photons_table(pre)),
    )


@dataclass(frozen=True)
class StageEntropy:
    S_Q: float
    S_D: float
    S_C: float
    S_QC: float
    S_QDC: float
    I_QC_D: float
    I_Q_C: float

    @classmethod
    def from_table(cls, P: np.ndarray) -> StageEntropy:
        S = {blk: entropy_table(marginal_table(P, blk), len(blk)) for blk in ("Q", "D", "C", "QC", "QDC")}
        return cls(
            S_Q=S["Q"],
            S_D=S["D"],
            S_C=S["C"],
            S_QC=S["QC"],
            S_QDC=S["QDC"],
            I_QC_D=_clamp_mi(S["QC"] + S["D"] - S["QDC"]),
            I_Q_C=_clamp_mi(S["Q"] + S["C"] - S["QC"]),
        )


@dataclass(frozen=True)
class ThermoReport:
    """Thermodynamic bookkeeping of one protocol run.

    Changes (``d*``) are taken across the feedback step. Fields are floats for
    a single run and arrays when built from a batch of tables.
    """

    demon_on: bool
    p_e: float
    n_th: float
    beta_Q: float
    beta_C: float
    dbeta: float
    dbeta_tilde: float
    readout: StageEntropy
    feedback: StageEntropy
    Q_Q: float
    Q_C: float
    n_mean: float
    dS_Q: float
    dS_C: float
    D_Q: float
    D_C: float
    D_QC: float
    D_QC_direct: float
    Q_C_baseline: float

    @property
    def I_readout(self):
        return self.readout.I_QC_D

    @property
    def I_feedback(self):
        return self.feedback.I_QC_D

    @property
    def dI_QC_D(self):
        return self.feedback.I_QC_D - self.readout.I_QC_D

    @property
    def dI_Q_C(self):
        return self.feedback.I_Q_C - self.readout.I_Q_C

    @property
    def dS_QC(self):
        return self.feedback.S_QC - self.readout.S_QC

    @property
    def dS_QDC(self):
        return self.feedback.S_QDC - self.readout.S_QDC

    @property
    def I_Q_C(self):
        return self.feedback.I_Q_C

    @property
    def clausius(self):
        """Physical entropy production ``Q_C * dbeta``."""
        return self.Q_C * self.dbeta

    @property
    def clausius_qubit(self):
        """Same pairing with the heat released by the qubit, ``-Q_Q * dbeta``."""
        return -self.Q_Q * self.dbeta

    @property
    def generalized_slt(self):
        return self.clausius - self.dI_QC_D

    @property
    def residual(self):
        return self.clausius - self.dI_QC_D - self.D_QC

    @property
    def no_demon_residual(self):
        return self.clausius - self.D_QC

    @property
    def subsystem_residual_Q(self):
        return self.dS_Q - (self.beta_Q * self.Q_Q - self.D_Q)

    @property
    def subsystem_residual_C(self):
        return self.dS_C - (self.beta_C * self.Q_C - self.D_C)

    @property
    def epsilon(self):
        return heat_gain(self.Q_C, self.Q_C_baseline)

    def as_dict(self) -> dict:
        """Flat mapping of every stored and derived quantity."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, StageEntropy):
                for g in fields(v):
                    out[f"{g.name}_{f.name}"] = getattr(v, g.name)
            else:
                out[f.name] = v
        for name in DERIVED:
            out[name] = getattr(self, name)
        return out


DERIVED = (
    "I_readout",
    "I_feedback",
    "I_Q_C",
    "dI_QC_D",
    "dI_Q_C",
    "dS_QC",
    "dS_QDC",
    "clausius",
    "clausius_qubit",
    "generalized_slt",
    "residual",
    "no_demon_residual",
    "subsystem_residual_Q",
    "subsystem_residual_C",
    "epsilon",
)


def report_from_tables(pre: np.ndarray, post: np.ndarray, spec: ThermalSpec, demon_on: bool,
                       baseline: float | None = None) -> ThermoReport:
    """Build a report from logical tables before and after the feedback step.

    ``pre`` and ``post`` have shape ``(..., 2, 2, n_max+1)`` with matching batch axes.
    """
    D_Q, D_C, _, D_QC, direct = _relative_entropy_qc_table(post, spec)
    ro, fb = StageEntropy.from_table(pre), StageEntropy.from_table(post)
    if baseline is None:
        baseline = classical_baseline(spec)
    return ThermoReport(
        demon_on=demon_on,
        p_e=spec.p_e,
        n_th=spec.n_th,
        beta_Q=spec.beta_Q,
        beta_C=spec.beta_C,
        dbeta=spec.dbeta,
        dbeta_tilde=spec.dbeta_tilde,
        readout=ro,
        feedback=fb,
        Q_Q=excited_table(post) - excited_table(pre),
        Q_C=mean_photons_table(post) - mean_photons_table(pre),
        n_mean=mean_photons_table(post),
        dS_Q=fb.S_Q - ro.S_Q,
        dS_C=fb.S_C - ro.S_C,
        D_Q=D_Q,
        D_C=D_C,
        D_QC=D_QC,
        D_QC_direct=direct,
        Q_C_baseline=baseline,
    )


def _scalarize(report: ThermoReport) -> ThermoReport:
    def f(v):
        if isinstance(v, StageEntropy):
            return StageEntropy(*(float(getattr(v, g.name)) for g in fields(v)))
        if isinstance(v, np.ndarray):
            return float(v)
        return v

    return ThermoReport(**{fl.name: f(getattr(report, fl.name)) for fl in fields(report)})


def slt_report(trace: dynamics.StageTrace, spec: ThermalSpec) -> ThermoReport:
    """Full bookkeeping of a trace; Gibbs references come from ``spec``."""
    pre = logical_table(trace.post_readout.p)
    post = logical_table(trace.post_feedback.p)
    return _scalarize(report_from_tables(pre, post, spec, trace.demon_on))


def classical_baseline(spec: ThermalSpec) -> float:
    """Largest heat a temperature-only strategy can push into the cavity.

    Couple qubit and cavity when the qubit is hotter, otherwise keep them apart.
    """
    if spec.dbeta_tilde <= 0:
        return 0.0
    trace = dynamics.run_stages(spec, dynamics.ImperfectionSpec.ideal(), demon_on=False)
    return heats(trace)[1]


def heat_gain(Q_C_demon, Q_C_baseline):
    return Q_C_demon - Q_C_baseline


def check_report(report: ThermoReport, tol: float = MI_CLAMP) -> None:
    """Raise if the report violates the sign constraints of its quantities."""
    for stage in (report.readout, report.feedback):
        for name in ("S_Q", "S_D", "S_C", "S_QC", "S_QDC", "I_QC_D", "I_Q_C"):
            if getattr(stage, name) < -tol:
                raise ArithmeticError(f"{name} is negative")
        if stage.I_QC_D > min(stage.S_QC, stage.S_D) + tol:
            raise ArithmeticError("I_QC:D exceeds the entropy of one of its parts")
    for name in ("D_Q", "D_C", "D_QC"):
        if getattr(report, name) < -tol:
            raise ArithmeticError(f"{name} is negative")

