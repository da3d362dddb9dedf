"""Command line front end.

Subcommands ``run``, ``sweep``, ``mc`` and ``validate``. Settings come from
an optional YAML/JSON file given with ``--config``; flags override it.
``QDEMON_THREADS`` sets the number of sweep worker threads.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

import numpy as np
import yaml

from . import __version__, experiment
from .dynamics import ImperfectionSpec
from .statespace import ThermalSpec, TruncationError

MODES = {"run": "single", "sweep": "sweep", "mc": "mc", "validate": "validate"}
FORMATS = ("csv", "json")
THREADS_ENV = "QDEMON_THREADS"
IMPERFECTION_KEYS = tuple(f.name for f in dataclasses.fields(ImperfectionSpec))


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ProtocolConfig:
    p_e: Optional[float] = None
    n_th: float = 0.63
    n_max: Optional[int] = None
    eta_readout: float = 0.95
    t_flight: float = 1.2e-3
    T_atom: float = 30e-3
    T_cav: float = 25e-3
    n_env: float = 0.243
    eps_det: float = 0.05
    p_det: float = 0.5
    relax_split: float = 0.5
    readout_mixing: bool = True
    atom_relaxation: bool = True
    cavity_relaxation: bool = True
    detection: bool = True
    ideal: bool = False
    demon: bool = True
    mode: str = "single"
    grid_points: int = 41
    grid_min: float = -4.0
    grid_max: float = 4.0
    shots: int = 25_000
    bootstrap: int = 1000
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        _validate(self)

    def thermal(self, p_e: float | None = None) -> ThermalSpec:
        p_e = self.p_e if p_e is None else p_e
        if p_e is None:
            raise ConfigError("p_e", f"required for mode {self.mode!r}")
        return ThermalSpec(p_e, self.n_th, self.n_max)

    def imperfections(self) -> ImperfectionSpec:
        kw = {k: getattr(self, k) for k in IMPERFECTION_KEYS}
        if self.ideal:
            return ImperfectionSpec.ideal(**{k: v for k, v in kw.items() if k not in _FLAGS})
        return ImperfectionSpec(**kw)

    def grid(self) -> np.ndarray:
        return experiment.default_grid(self.n_th, self.grid_points, self.grid_min, self.grid_max)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FLAGS = ("readout_mixing", "atom_relaxation", "cavity_relaxation", "detection")
_FIELDS = {f.name: f for f in dataclasses.fields(ProtocolConfig)}
_UNIT = ("eta_readout", "eps_det", "p_det", "relax_split")
_POSITIVE = ("n_th", "t_flight", "T_atom", "T_cav")


def _validate(cfg: ProtocolConfig) -> None:
    if cfg.p_e is not None and not 0.0 < cfg.p_e < 1.0:
        raise ConfigError("p_e", f"must lie strictly inside (0, 1), got {cfg.p_e}")
    for k in _POSITIVE:
        v = getattr(cfg, k)
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(k, f"must be finite and > 0, got {v}")
    for k in _UNIT:
        v = getattr(cfg, k)
        if not 0.0 <= v <= 1.0:
            raise ConfigError(k, f"must lie in [0, 1], got {v}")
    if cfg.n_env < 0:
        raise ConfigError("n_env", f"must be >= 0, got {cfg.n_env}")
    if cfg.n_max is not None and cfg.n_max < 1:
        raise ConfigError("n_max", f"must be >= 1, got {cfg.n_max}")
    if cfg.mode not in MODES.values():
        raise ConfigError("mode", f"must be one of {sorted(MODES.values())}, got {cfg.mode!r}")
    if cfg.format not in FORMATS:
        raise ConfigError("format", f"must be csv or json, got {cfg.format!r}")
    if cfg.grid_points < 2:
        raise ConfigError("grid_points", "need at least 2 points")
    if not cfg.grid_min < cfg.grid_max:
        raise ConfigError("grid_max", "must exceed grid_min")
    if cfg.shots < 1:
        raise ConfigError("shots", "must be >= 1")
    if cfg.bootstrap < 100:
        raise ConfigError("bootstrap", "must be >= 100")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")


def _coerce(key: str, value):
    if value is None:
        return None
    kind = _FIELDS[key].type
    try:
        if "bool" in kind:
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            if not isinstance(value, (bool, int)):
                raise ValueError(value)
            return bool(value)
        if "int" in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if "float" in kind:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {value!r} as {kind}") from None


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text) if text.strip() else {}
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("<file>", "config file must hold a mapping")
    return data


def parse_config(path=None, overrides: dict | None = None) -> ProtocolConfig:
    """Merge file values and overrides (overrides win) into a validated config."""
    merged = load_config_file(path) if path else {}
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return ProtocolConfig(**{k: _coerce(k, v) for k, v in merged.items()})


# ---- figure data -------------------------------------------------------------------

FIGURE_COLUMNS = {
    "fig2": ["delta_beta_tilde", "Q_C_demon", "Q_Q_demon", "Q_C_nodemon", "Q_Q_nodemon", "epsilon"],
    "fig3a": ["delta_beta_tilde", "I_readout", "I_feedback", "dI",
              "I_readout_nodemon", "I_feedback_nodemon", "dI_nodemon"],
    "fig3b": ["delta_beta_tilde", "Q_dbeta", "g"],
    "fig3c": ["delta_beta_tilde", "D_Q", "D_C", "dI_QC", "D_QC"],
    "fig3d": ["delta_beta_tilde", "residual"],
}


def figure_rows(result: experiment.SweepResult) -> dict[str, list[list[float]]]:
    panels = {k: [] for k in FIGURE_COLUMNS}
    for pt in result.points:
        on, off = pt.demon, pt.no_demon
        x = pt.dbeta_tilde
        panels["fig2"].append([x, on.Q_C, on.Q_Q, off.Q_C, off.Q_Q, on.epsilon])
        panels["fig3a"].append([x, on.I_readout, on.I_feedback, on.dI_QC_D,
                                off.I_readout, off.I_feedback, off.dI_QC_D])
        panels["fig3b"].append([x, on.clausius, on.generalized_slt])
        panels["fig3c"].append([x, on.D_Q, on.D_C, on.dI_Q_C, on.D_QC])
        panels["fig3d"].append([x, on.residual])
    return panels


def fmt(v) -> str:
    return f"{float(v):.12g}"


def _json_number(v):
    v = float(v)
    return float(fmt(v)) if math.isfinite(v) else None


def emit_sweep(result: experiment.SweepResult, out_dir, format: str = "csv") -> list[Path]:
    """Write one table per figure panel (CSV) or a single bundle (JSON).

    CSV tables point to the ``config.json`` sidecar in their first line.
    """
    if not len(result):
        raise ValueError("empty sweep result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panels = figure_rows(result)
    provenance = {"version": result.version, "config": result.config}
    written = []
    if format == "csv":
        sidecar = out / "config.json"
        sidecar.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
        written.append(sidecar)
        for name, rows in panels.items():
            path = out / f"{name}.csv"
            lines = [f"# config: {sidecar.name}", ",".join(FIGURE_COLUMNS[name])]
            lines += [",".join(fmt(v) for v in row) for row in rows]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
    elif format == "json":
        bundle = dict(provenance)
        bundle["panels"] = {
            name: {"columns": FIGURE_COLUMNS[name], "rows": [[_json_number(v) for v in row] for row in rows]}
            for name, rows in panels.items()
        }
        bundle["reports"] = [
            {"delta_beta_tilde": _json_number(pt.dbeta_tilde),
             "demon": _report_json(pt.demon), "no_demon": _report_json(pt.no_demon)}
            for pt in result.points
        ]
        path = out / "sweep.json"
        path.write_text(json.dumps(bundle, indent=2) + "\n")
        written.append(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    return written


def _report_json(report) -> dict:
    return {k: (v if isinstance(v, bool) else _json_number(v)) for k, v in report.as_dict().items()}


def read_figure_csv(path) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data


# ---- validate ----------------------------------------------------------------------

VALIDATION_P_E = np.linspace(0.02, 0.98, 21)
VALIDATION_N_TH = (0.2, 0.63, 1.0)


def _ideal_sweeps():
    imp = ImperfectionSpec.ideal()
    return [experiment.sweep(VALIDATION_P_E, n_th, imp) for n_th in VALIDATION_N_TH]


def _reports(sweeps):
    for res in sweeps:
        for pt in res.points:
            yield pt.demon
            yield pt.no_demon


def _max_abs(values) -> float:
    return max(abs(float(v)) for v in values)


def validation_checks():
    """``(name, passed, detail)`` for every invariant family, in reporting order."""
    ideal = _ideal_sweeps()
    mixing = experiment.sweep(experiment.default_grid(0.63), 0.63, ImperfectionSpec.ideal(readout_mixing=True))
    reports = list(_reports(ideal))

    dS = _max_abs(r.dS_QDC for r in reports)
    yield "entropy_conservation", dS < 1e-12, f"max |dS_QDC| = {dS:.2e} (tol 1e-12)"

    g = min(float(r.generalized_slt) for r in list(_reports([*ideal, mixing])))
    yield "generalized_slt", g >= -1e-10, f"min(Q_C dbeta - dI_QC:D) = {g:.3e} (tol -1e-10)"

    res = _max_abs(r.residual for r in reports)
    yield "balance_identity", res < 1e-10, f"max |Q_C dbeta - dI_QC:D - D_QC| = {res:.2e} (tol 1e-10)"

    offs = [r for r in reports if not r.demon_on]
    red = _max_abs(r.no_demon_residual for r in offs)
    low = min(float(r.clausius) for r in offs)
    yield "no_demon_clausius", red < 1e-10 and low >= -1e-10, f"max |Q_C dbeta - D_QC| = {red:.2e}, min Q_C dbeta = {low:.3e}"

    sub = max(_max_abs(r.subsystem_residual_Q for r in reports), _max_abs(r.subsystem_residual_C for r in reports))
    yield "subsystem_identity", sub < 1e-10, f"max |dS_X - beta_X Q_X + D_X| = {sub:.2e} (tol 1e-10)"

    route = _max_abs(r.D_QC - r.D_QC_direct for r in reports)
    yield "relative_entropy_routes", route < 1e-10, f"max |D_QC sum - D_QC joint| = {route:.2e} (tol 1e-10)"

    ons = [r for r in reports if r.demon_on]
    rev_on = _max_abs(r.Q_C - r.p_e for r in ons)
    rev_off = all(
        (abs(r.Q_C) < 1e-12) if abs(r.dbeta_tilde) < 1e-12 else (np.sign(r.Q_C) == np.sign(r.dbeta_tilde))
        for r in offs
    )
    yield "heat_flow_reversal", rev_on < 1e-6 and rev_off, f"max |Q_C - p_e| (demon) = {rev_on:.2e}; no-demon sign rule {'ok' if rev_off else 'broken'}"

    peak = experiment.run_point(ThermalSpec(0.5, 0.63), ImperfectionSpec.ideal(), True).I_readout
    yield "mutual_information_peak", abs(peak - math.log(2)) < 1e-10, f"I_QC:D(p_e=0.5) - ln 2 = {peak - math.log(2):.2e}"


def validate_command(stream: TextIO = sys.stdout) -> int:
    """Run every invariant family; return 0 iff all pass."""
    failed = []
    count = 0
    for name, ok, detail in validation_checks():
        count += 1
        print(f"{'PASS' if ok else 'FAIL'}  {name:26s} {detail}", file=stream)
        if not ok:
            failed.append(name)
    if failed:
        print(f"validation failed: {failed[0]} ({len(failed)} of {count} checks failed)", file=stream)
        return 1
    print(f"all {count} invariant families passed", file=stream)
    return 0


# ---- single / mc runs --------------------------------------------------------------

def _write_table(path: Path, header: list[str], rows) -> None:
    lines = ["# config: config.json", ",".join(header)]
    lines += [",".join([r[0], *(_cell(v) for v in r[1:])]) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def _emit_quantities(cfg: ProtocolConfig, stem: str, columns: dict[str, dict], stream: TextIO) -> None:
    names = list(next(iter(columns.values())))
    if cfg.out is None:
        if cfg.format == "json":
            payload = {"version": __version__, "config": cfg.as_dict(),
                       **{c: {k: _jsonable(v) for k, v in vals.items()} for c, vals in columns.items()}}
            print(json.dumps(payload, indent=2), file=stream)
        else:
            print(",".join(["quantity", *columns]), file=stream)
            for n in names:
                print(",".join([n, *(_cell(columns[c][n]) for c in columns)]), file=stream)
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        payload = {"version": __version__, "config": cfg.as_dict(),
                   **{c: {k: _jsonable(v) for k, v in vals.items()} for c, vals in columns.items()}}
        (out / f"{stem}.json").write_text(json.dumps(payload, indent=2) + "\n")
    else:
        (out / "config.json").write_text(json.dumps({"version": __version__, "config": cfg.as_dict()},
                                                    indent=2, sort_keys=True) + "\n")
        rows = [[n, *(columns[c][n] for c in columns)] for n in names]
        _write_table(out / f"{stem}.csv", ["quantity", *columns], rows)
    print(f"wrote {stem} to {out}", file=stream)


def _cell(v) -> str:
    return str(v) if isinstance(v, bool) else fmt(v)


def _jsonable(v):
    return v if isinstance(v, bool) else _json_number(v)


def cmd_run(cfg: ProtocolConfig, stream: TextIO) -> int:
    spec = cfg.thermal()
    report = experiment.run_point(spec, cfg.imperfections(), cfg.demon)
    _emit_quantities(cfg, "report", {"value": report.as_dict()}, stream)
    return 0


def cmd_sweep(cfg: ProtocolConfig, stream: TextIO) -> int:
    workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    result = experiment.sweep(cfg.grid(), cfg.n_th, cfg.imperfections(), cfg.n_max,
                              config=cfg.as_dict(), workers=workers)
    out = cfg.out or "qdemon-out"
    for path in emit_sweep(result, out, cfg.format):
        print(f"wrote {path}", file=stream)
    return 0


def cmd_mc(cfg: ProtocolConfig, stream: TextIO) -> int:
    spec, imp = cfg.thermal(), cfg.imperfections()
    ref, fin = experiment.monte_carlo_run(spec, imp, cfg.shots, cfg.seed, cfg.demon)
    est = experiment.estimate_report(fin, spec, ref)
    err = experiment.bootstrap_errors(fin, spec, ref, cfg.bootstrap, cfg.seed + 1)
    exact = experiment.run_point(spec, imp, cfg.demon)
    est_d, exact_d = est.as_dict(), exact.as_dict()
    keys = [k for k in est_d if not isinstance(est_d[k], bool)]
    columns = {
        "estimate": {k: est_d[k] for k in keys},
        "stderr": {k: err.get(k, 0.0) for k in keys},
        "model": {k: exact_d[k] for k in keys},
    }
    print(f"detected {fin.detected} of {fin.shots} final shots, {ref.detected} of {ref.shots} reference shots",
          file=stream)
    _emit_quantities(cfg, "mc", columns, stream)
    return 0


COMMANDS = {"single": cmd_run, "sweep": cmd_sweep, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdemon", description="Autonomous Maxwell demon simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON configuration file")
        p.add_argument("--print-config", action="store_true", help="echo the effective configuration and exit")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--seed", type=int)
        p.add_argument("--no-demon", dest="demon", action="store_const", const=False)
        p.add_argument("--ideal", action="store_const", const=True, help="disable every imperfection")
        for key, f in _FIELDS.items():
            if key in ("out", "format", "seed", "demon", "ideal", "mode"):
                continue
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar=key.upper())
    return parser


def main(argv=None, stream: TextIO = sys.stdout) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k in _FIELDS}
    overrides["mode"] = MODES[args.command]
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(json.dumps(cfg.as_dict(), indent=2), file=stream)
        return 0
    if cfg.mode == "validate":
        return validate_command(stream)
    try:
        return COMMANDS[cfg.mode](cfg, stream)
    except (ConfigError, TruncationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
