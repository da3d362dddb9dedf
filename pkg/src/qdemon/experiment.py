"""Temperature sweeps, shot emulation and bootstrap error bars."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__, dynamics, thermo
from .dynamics import ImperfectionSpec
from .statespace import LOGICAL_OF_LEVEL, ThermalSpec, beta_c, logical_table, pe_from_beta

BOOTSTRAP_DEFAULT = 1000


class SweepError(RuntimeError):
    def __init__(self, index: int, p_e: float, cause: Exception):
        super().__init__(f"sweep point {index} (p_e={p_e!r}) failed: {cause}")
        self.index = index


def default_grid(n_th: float, points: int = 41, lo: float = -4.0, hi: float = 4.0) -> np.ndarray:
    """Excited populations evenly spaced in ``dbeta_tilde`` over ``[lo, hi]``.

    Even spacing in ``dbeta_tilde`` is even spacing in ``ln(p_e / (1 - p_e))``.
    """
    bc = beta_c(n_th)
    return np.array([pe_from_beta(bc * (1.0 - d)) for d in np.linspace(lo, hi, points)])


@dataclass(frozen=True)
class SweepPoint:
    dbeta_tilde: float
    demon: thermo.ThermoReport
    no_demon: thermo.ThermoReport


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    config: dict = field(default_factory=dict)
    version: str = __version__

    def __post_init__(self):
        d = [p.dbeta_tilde for p in self.points]
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("sweep points must have strictly increasing dbeta_tilde")

    def __len__(self):
        return len(self.points)

    def column(self, name: str, demon: bool = True) -> np.ndarray:
        return np.array([getattr(p.demon if demon else p.no_demon, name) for p in self.points])

    @property
    def dbeta_tilde(self) -> np.ndarray:
        return np.array([p.dbeta_tilde for p in self.points])


def run_point(spec: ThermalSpec, imp: ImperfectionSpec, demon_on: bool) -> thermo.ThermoReport:
    return thermo.slt_report(dynamics.run_stages(spec, imp, demon_on), spec)


def _sweep_point(i: int, p_e: float, n_th: float, imp: ImperfectionSpec, n_max: int | None) -> SweepPoint:
    try:
        spec = ThermalSpec(float(p_e), n_th, n_max)
        return SweepPoint(spec.dbeta_tilde, run_point(spec, imp, True), run_point(spec, imp, False))
    except Exception as exc:
        raise SweepError(i, p_e, exc) from exc


def sweep(grid, n_th: float, imp: ImperfectionSpec, n_max: int | None = None,
          config: dict | None = None, workers: int = 1) -> SweepResult:
    """Run the protocol with and without the demon at every ``p_e`` of ``grid``.

    Points come back ordered by ``dbeta_tilde`` whatever the order of ``grid``
    or the number of worker threads.
    """
    jobs = [(i, p_e, n_th, imp, n_max) for i, p_e in enumerate(grid)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            points = list(pool.map(lambda job: _sweep_point(*job), jobs))
    else:
        points = [_sweep_point(*job) for job in jobs]
    points.sort(key=lambda p: p.dbeta_tilde)
    return SweepResult(tuple(points), dict(config or {}))


@dataclass(frozen=True)
class ShotTable:
    """Detected-outcome counts ``counts[s_Q, s_D, n]``."""

    counts: np.ndarray
    shots: int
    detected: int
    seed: int | None = None
    stage: str = "post_feedback"
    demon_on: bool = True

    def __post_init__(self):
        c = np.array(self.counts)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if c.ndim != 3 or c.shape[:2] != (2, 2):
            raise ValueError(f"counts must have shape (2, 2, n_max+1), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("negative counts")
        if not np.isclose(c.sum(), self.detected, rtol=1e-12, atol=0):
            raise ValueError(f"counts sum to {c.sum()}, expected {self.detected} detected shots")
        if self.detected > self.shots:
            raise ValueError("more detected than total shots")

    @property
    def frequencies(self) -> np.ndarray:
        if self.detected <= 0:
            raise ValueError("empty shot table")
        return self.counts / self.counts.sum()


def _sample(p: np.ndarray, shots: int, imp: ImperfectionSpec, rng: np.random.Generator):
    """Draw ``shots`` atoms from ``p[level, n]`` and pass them through the detector."""
    detected = int(rng.binomial(shots, imp.efficiency))
    true = rng.multinomial(detected, p.ravel() / p.sum()).reshape(p.shape)
    M = dynamics.confusion_matrix(imp.eps)
    seen = np.zeros_like(true)
    for level in range(3):
        # counts of each true level are redistributed over the detected labels
        seen += rng.multinomial(true[level], M[:, level]).T
    counts = np.zeros((2, 2, p.shape[1]), dtype=np.int64)
    for level, (sq, sd) in LOGICAL_OF_LEVEL.items():
        counts[sq, sd] = seen[level]
    return counts, detected


def monte_carlo(spec: ThermalSpec, imp: ImperfectionSpec, shots: int = 25_000, seed=None,
                demon_on: bool = True, stage: str = "post_feedback") -> ShotTable:
    """Emulate ``shots`` repetitions and record the detected outcomes at ``stage``.

    Atoms are drawn from the pre-detection populations; each is lost with
    probability ``1 - p_det`` and otherwise misattributed per the confusion matrix.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if stage not in ("initial", "post_readout", "post_feedback"):
        raise ValueError(f"cannot sample stage {stage!r}")
    trace = dynamics.run_stages(spec, imp, demon_on)
    rng = np.random.default_rng(seed)
    counts, detected = _sample(trace[stage].p, shots, imp, rng)
    return ShotTable(counts, shots, detected, seed, stage, demon_on)


def monte_carlo_run(spec: ThermalSpec, imp: ImperfectionSpec, shots: int = 25_000, seed=None,
                    demon_on: bool = True) -> tuple[ShotTable, ShotTable]:
    """Independently sampled ``(pre-feedback, post-feedback)`` tables; costs ``2 * shots``."""
    ss = np.random.SeedSequence(seed)
    a, b = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    return (
        monte_carlo(spec, imp, shots, a, demon_on, "post_readout"),
        monte_carlo(spec, imp, shots, b, demon_on, "post_feedback"),
    )


def estimate_report(table: ShotTable, spec: ThermalSpec, reference: ShotTable) -> thermo.ThermoReport:
    """Plug-in report from measured frequencies.

    ``table`` holds the final outcomes and ``reference`` the outcomes before
    the feedback step; heats and information changes are taken between them.
    """
    rep = thermo.report_from_tables(reference.frequencies, table.frequencies, spec, table.demon_on)
    return thermo._scalarize(rep)


def _resample(table: ShotTable, B: int, rng: np.random.Generator) -> np.ndarray:
    f = table.frequencies
    draws = rng.multinomial(int(round(table.detected)), f.ravel(), size=B)
    return draws.reshape((B,) + f.shape) / table.detected


def bootstrap_errors(table: ShotTable, spec: ThermalSpec, reference: ShotTable,
                     B: int = BOOTSTRAP_DEFAULT, seed=None) -> dict[str, float]:
    """Standard deviation of every report quantity under multinomial resampling.

    Both tables are resampled independently; all ``B`` replicas are evaluated
    in one vectorized pass.
    """
    if B < 100:
        raise ValueError("B must be >= 100")
    for t in (table, reference):
        if t.detected < 2:
            raise ValueError(f"degenerate {t.stage} table: {t.detected} detected shot(s)")
    rng = np.random.default_rng(seed)
    pre = _resample(reference, B, rng)
    post = _resample(table, B, rng)
    rep = thermo.report_from_tables(pre, post, spec, table.demon_on)
    out = {}
    for name, v in rep.as_dict().items():
        if isinstance(v, np.ndarray) and v.shape == (B,):
            out[name] = float(np.std(v, ddof=1))
        elif not isinstance(v, bool):
            out[name] = 0.0
    return out


def report_fields() -> list[str]:
    """Names in :meth:`ThermoReport.as_dict` order."""
    names = []
    for f in fields(thermo.ThermoReport):
        if f.name in ("readout", "feedback"):
            names += [f"{g.name}_{f.name}" for g in fields(thermo.StageEntropy)]
        else:
            names.append(f.name)
    return names + list(thermo.DERIVED)
