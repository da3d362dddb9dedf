import dataclasses
import io
import json
from pathlib import Path

import numpy as np
import pytest

from qdemon import cli, experiment, thermo
from qdemon.cli import ConfigError, ProtocolConfig, emit_sweep, main, parse_config, read_figure_csv
from qdemon.dynamics import ImperfectionSpec

DATA = Path(__file__).parent / "data"


def run_cli(*argv):
    buf = io.StringIO()
    code = main(list(argv), buf)
    return code, buf.getvalue()


def ideal_sweep(points=5, n_th=0.63, **kw):
    grid = experiment.default_grid(n_th, points)
    return experiment.sweep(grid, n_th, ImperfectionSpec.ideal(**kw), config={"n_th": n_th, "points": points})


class TestConfig:
    def test_defaults(self):
        cfg = parse_config()
        assert cfg.n_th == 0.63
        assert cfg.shots == 25_000 and cfg.bootstrap == 1000
        imp = cfg.imperfections()
        assert (imp.eta, imp.eps, imp.efficiency) == (0.95, 0.05, 0.5)

    def test_ideal_switch(self):
        imp = parse_config(overrides={"ideal": True}).imperfections()
        assert (imp.eta, imp.eps, imp.efficiency, imp.relaxes) == (1.0, 0.0, 1.0, False)

    def test_out_of_range_names_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides={"p_e": 1.2})
        assert info.value.key == "p_e"
        assert "p_e" in str(info.value)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("n_th: 0.5\nbogus: 3\n")
        with pytest.raises(ConfigError, match="bogus"):
            parse_config(path)

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("n_th: 0.5\np_e: 0.2\n")
        cfg = parse_config(path, {"p_e": "0.4"})
        assert (cfg.n_th, cfg.p_e) == (0.5, 0.4)

    def test_json_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"eta_readout": 0.9, "detection": False}))
        cfg = parse_config(path)
        assert cfg.imperfections().eps == 0.0 and cfg.eta_readout == 0.9

    def test_print_config(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("n_th: 1.0\n")
        code, out = run_cli("run", "--config", str(path), "--p-e", "0.3", "--print-config")
        assert code == 0
        cfg = json.loads(out)
        assert cfg["n_th"] == 1.0 and cfg["p_e"] == 0.3

    def test_bad_flag_exit_code(self, capsys):
        code, _ = run_cli("run", "--p-e", "1.2")
        assert code == 2
        assert "p_e" in capsys.readouterr().err

    def test_run_requires_excited_population(self, capsys):
        assert run_cli("run")[0] == 2
        assert "p_e" in capsys.readouterr().err

    def test_frozen(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            ProtocolConfig().n_th = 1.0


class TestEmit:
    def test_ideal_residual_column(self, tmp_path):
        emit_sweep(ideal_sweep(21), tmp_path)
        header, data = read_figure_csv(tmp_path / "fig3d.csv")
        assert header == ["delta_beta_tilde", "residual"]
        assert np.max(np.abs(data[:, 1])) < 1e-10

    def test_no_demon_information_is_zero(self, tmp_path):
        emit_sweep(ideal_sweep(9), tmp_path)
        header, data = read_figure_csv(tmp_path / "fig3a.csv")
        cols = [header.index(c) for c in ("I_readout_nodemon", "I_feedback_nodemon", "dI_nodemon")]
        assert np.max(np.abs(data[:, cols])) < 1e-12

    def test_csv_round_trip(self, tmp_path):
        res = ideal_sweep(7)
        emit_sweep(res, tmp_path)
        _, data = read_figure_csv(tmp_path / "fig2.csv")
        np.testing.assert_allclose(data[:, 0], res.dbeta_tilde, rtol=1e-11, atol=1e-15)
        np.testing.assert_allclose(data[:, 1], res.column("Q_C"), rtol=1e-11, atol=1e-15)

    def test_provenance(self, tmp_path):
        emit_sweep(ideal_sweep(3), tmp_path)
        for name in cli.FIGURE_COLUMNS:
            first = (tmp_path / f"{name}.csv").read_text().splitlines()[0]
            assert first == "# config: config.json"
        meta = json.loads((tmp_path / "config.json").read_text())
        assert meta["config"] == {"n_th": 0.63, "points": 3} and meta["version"]

    @pytest.mark.parametrize("name", sorted(cli.FIGURE_COLUMNS))
    def test_golden_files(self, tmp_path, name):
        emit_sweep(ideal_sweep(5), tmp_path)
        assert (tmp_path / f"{name}.csv").read_bytes() == (DATA / "golden" / f"{name}.csv").read_bytes()

    def test_json_bundle(self, tmp_path):
        (path,) = emit_sweep(ideal_sweep(5), tmp_path, "json")
        bundle = json.loads(path.read_text())
        assert set(bundle["panels"]) == set(cli.FIGURE_COLUMNS)
        assert len(bundle["reports"]) == 5
        assert bundle["reports"][0]["no_demon"]["demon_on"] is False

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_sweep(ideal_sweep(3), tmp_path, "xml")


class TestValidate:
    def test_pristine_build_passes(self):
        code, out = run_cli("validate")
        assert code == 0
        lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
        assert len(lines) >= 6
        assert all(ln.startswith("PASS") for ln in lines)

    def test_swapped_information_is_caught(self, monkeypatch):
        real = thermo.slt_report

        def swapped(trace, spec):
            r = real(trace, spec)
            readout = dataclasses.replace(r.readout, I_QC_D=r.feedback.I_QC_D)
            feedback = dataclasses.replace(r.feedback, I_QC_D=r.readout.I_QC_D)
            return dataclasses.replace(r, readout=readout, feedback=feedback)

        monkeypatch.setattr(thermo, "slt_report", swapped)
        code, out = run_cli("validate")
        assert code != 0
        assert "FAIL  generalized_slt" in out
        assert "validation failed: generalized_slt" in out


class TestCommands:
    def test_run_csv(self):
        code, out = run_cli("run", "--p-e", "0.5", "--ideal")
        assert code == 0
        rows = dict(ln.split(",", 1) for ln in out.splitlines()[1:])
        assert float(rows["Q_C"]) == pytest.approx(0.5, abs=1e-8)

    def test_run_json_to_directory(self, tmp_path):
        code, _ = run_cli("run", "--p-e", "0.3", "--format", "json", "--out", str(tmp_path))
        assert code == 0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["config"]["p_e"] == 0.3
        assert abs(payload["value"]["D_QC"] - payload["value"]["D_QC_direct"]) < 1e-10

    def test_sweep_command(self, tmp_path):
        code, _ = run_cli("sweep", "--grid-points", "5", "--out", str(tmp_path))
        assert code == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "config.json", "fig2.csv", "fig3a.csv", "fig3b.csv", "fig3c.csv", "fig3d.csv"
        ]

    def test_sweep_threads(self, tmp_path, monkeypatch):
        run_cli("sweep", "--grid-points", "7", "--out", str(tmp_path / "a"))
        monkeypatch.setenv("QDEMON_THREADS", "3")
        run_cli("sweep", "--grid-points", "7", "--out", str(tmp_path / "b"))
        for name in cli.FIGURE_COLUMNS:
            assert (tmp_path / "a" / f"{name}.csv").read_bytes() == (tmp_path / "b" / f"{name}.csv").read_bytes()

    def test_mc_is_reproducible(self):
        args = ("mc", "--p-e", "0.5", "--shots", "2000", "--bootstrap", "200", "--seed", "3")
        a, b = run_cli(*args), run_cli(*args)
        assert a == b and a[0] == 0
        header = a[1].splitlines()[1]
        assert header == "quantity,estimate,stderr,model"
