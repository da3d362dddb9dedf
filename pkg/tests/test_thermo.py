import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from qdemon.dynamics import ImperfectionSpec, run_stages
from qdemon.statespace import JointState, ThermalSpec, compose_initial, logical_map, thermal_cavity
from qdemon.thermo import (
    classical_baseline,
    entropy,
    heat_gain,
    heats,
    mutual_information,
    relative_entropy,
    relative_entropy_QC,
    slt_report,
)

N_TH = 0.63
IDEAL = ImperfectionSpec.ideal()

distributions = st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda x: sum(x) > 1e-3).map(
    lambda x: np.array(x) / sum(x)
)


def report(p_e, n_th=N_TH, demon_on=True, imp=IDEAL, **kw):
    spec = ThermalSpec(p_e, n_th, **kw)
    return slt_report(run_stages(spec, imp, demon_on), spec)


class TestEntropy:
    def test_pure(self):
        assert entropy([0.0, 1.0, 0.0]) == 0.0

    def test_uniform_pair(self):
        assert entropy([0.5, 0.5]) == pytest.approx(0.6931471805599453, abs=1e-15)

    def test_thermal_closed_form(self):
        # (1 + n) ln(1 + n) - n ln n at n = 0.63
        assert entropy(thermal_cavity(N_TH)) == pytest.approx(1.0874677637, abs=1e-8)

    def test_unnormalized(self):
        with pytest.raises(ValueError):
            entropy([0.5, 0.6])


class TestMutualInformation:
    def test_product_state(self):
        s = compose_initial(ThermalSpec(0.3, N_TH))
        assert mutual_information(s, "QC", "D") == 0.0
        assert mutual_information(s, "Q", "C") < 1e-12

    def test_perfect_readout_at_infinite_temperature(self):
        t = run_stages(ThermalSpec(0.5, N_TH), IDEAL)
        assert mutual_information(t.post_readout, "QC", "D") == pytest.approx(math.log(2), abs=1e-12)

    def test_qubit_uncorrelated_after_feedback(self):
        t = run_stages(ThermalSpec(0.5, N_TH), IDEAL)
        pre, post = oracle.ideal_run(0.5, N_TH, t.post_feedback.n_max)
        # only the truncated top state (e, n_max) keeps the qubit excited
        assert oracle.mutual(post, "Q", "C") < 1e-7
        assert mutual_information(t.post_feedback, "Q", "C") == pytest.approx(oracle.mutual(post, "Q", "C"), abs=1e-12)

    def test_overlapping_blocks(self):
        with pytest.raises(ValueError, match="overlap"):
            mutual_information(compose_initial(ThermalSpec(0.3, N_TH)), "QC", "C")


class TestRelativeEntropy:
    def test_self(self):
        q = thermal_cavity(N_TH)
        assert relative_entropy(q, q) == 0.0

    def test_pure_against_uniform(self):
        assert relative_entropy([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)

    def test_support_violation(self):
        assert relative_entropy([0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_bad_input_raises(self):
        with pytest.raises(ValueError):
            relative_entropy([0.5, 0.5], [0.2, 0.2])

    @given(distributions, st.integers(0, 2**31))
    def test_gibbs_inequality(self, p, seed):
        q = np.random.default_rng(seed).random(p.size) + 1e-3
        assert relative_entropy(p, q / q.sum()) >= -1e-15


class TestRelativeEntropyQC:
    def test_initial_state_is_zero(self):
        spec = ThermalSpec(0.3, N_TH)
        parts = relative_entropy_QC(compose_initial(spec), spec)
        assert max(abs(x) for x in parts) < 1e-12

    def test_pure_final_qubit(self):
        spec = ThermalSpec(0.5, N_TH)
        parts = relative_entropy_QC(run_stages(spec, IDEAL).post_feedback, spec)
        assert parts.D_Q == pytest.approx(math.log(2), abs=1e-8)

    @pytest.mark.parametrize("imp", [IDEAL, ImperfectionSpec()])
    @pytest.mark.parametrize("p_e", [0.02, 0.3, 0.5, 0.9])
    def test_routes_agree(self, p_e, imp):
        r = report(p_e, imp=imp)
        assert abs(r.D_QC - r.D_QC_direct) < 1e-10


class TestHeats:
    def test_demon_ideal(self):
        QQ, QC = heats(run_stages(ThermalSpec(0.4, N_TH), IDEAL))
        assert (QQ, QC) == pytest.approx((-0.4, 0.4), abs=1e-8)

    def test_equilibrium_without_demon(self):
        QQ, QC = heats(run_stages(ThermalSpec(N_TH / (1 + 2 * N_TH), N_TH), IDEAL, demon_on=False))
        assert abs(QQ) < 1e-12 and abs(QC) < 1e-12

    def test_saturation(self):
        QQ, QC = heats(run_stages(ThermalSpec(1 - 1e-9, N_TH), IDEAL))
        assert QC == pytest.approx(1.0, abs=1e-6)

    def test_monotone_in_excitation(self):
        qc = [heats(run_stages(ThermalSpec(p, N_TH), IDEAL))[1] for p in np.linspace(0.01, 0.99, 25)]
        assert np.all(np.diff(qc) >= 0)


class TestBaseline:
    def test_equal_temperatures(self):
        assert abs(classical_baseline(ThermalSpec(N_TH / (1 + 2 * N_TH), N_TH))) < 1e-15

    def test_colder_qubit(self):
        assert classical_baseline(ThermalSpec(0.1, N_TH)) == 0.0

    def test_infinite_temperature(self):
        # brute force over basis states: e injects with p_e, g absorbs when n >= 1
        spec = ThermalSpec(0.5, N_TH)
        pre, post = oracle.ideal_run(0.5, N_TH, spec.n_max, demon_on=False)
        expected = oracle.functionals(pre, post, 0.5, N_TH, spec.n_max)["Q_C"]
        assert classical_baseline(spec) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(0.5 - 0.5 * N_TH / (1 + N_TH), abs=1e-8)


class TestHeatGain:
    def test_equal(self):
        assert heat_gain(0.3, 0.3) == 0.0

    @pytest.mark.parametrize("p_e", [0.05, 0.2, N_TH / (1 + 2 * N_TH)])
    def test_cold_qubit_gain_is_demon_heat(self, p_e):
        r = report(p_e)
        assert r.epsilon == pytest.approx(p_e, abs=1e-8)

    def test_vanishes_at_extremes(self):
        gains = [report(p).epsilon for p in (1e-6, 0.3, 0.5, 1 - 1e-6)]
        assert gains[0] < 1e-5 and gains[-1] < 1e-5
        assert gains[1] > 0.1 and gains[2] > 0.1


class TestReport:
    @pytest.mark.parametrize("demon_on", [True, False])
    @pytest.mark.parametrize("n_th", [0.2, 0.63, 1.0])
    @pytest.mark.parametrize("p_e", [0.01, 0.25, 0.5, 0.75, 0.99])
    def test_balance_and_conservation(self, p_e, n_th, demon_on):
        r = report(p_e, n_th, demon_on)
        assert abs(r.residual) < 1e-10
        assert abs(r.dS_QDC) < 1e-12
        assert abs(r.subsystem_residual_Q) < 1e-10
        assert abs(r.subsystem_residual_C) < 1e-10
        assert r.generalized_slt >= -1e-10

    @pytest.mark.parametrize("p_e", [0.01, 0.2, 0.5, 0.95])
    def test_no_demon_reduced_law(self, p_e):
        r = report(p_e, demon_on=False)
        assert abs(r.dI_QC_D) < 1e-15
        assert abs(r.no_demon_residual) < 1e-10
        assert r.clausius >= -1e-12

    def test_demon_readout_mixing_keeps_second_law(self):
        imp = ImperfectionSpec.ideal(readout_mixing=True)
        for p_e in np.linspace(0.01, 0.99, 15):
            r = report(p_e, imp=imp)
            assert r.generalized_slt >= -1e-10
            assert abs(r.residual) < 1e-10

    def test_information_bounded_by_parts(self):
        for p_e in (0.1, 0.5, 0.9):
            r = report(p_e, imp=ImperfectionSpec())
            for stage in (r.readout, r.feedback):
                assert stage.I_QC_D <= min(stage.S_QC, stage.S_D) + 1e-12

    def test_as_dict_is_flat(self):
        d = report(0.4).as_dict()
        assert d["I_QC_D_readout"] == report(0.4).I_readout
        assert "residual" in d and "readout" not in d


@given(st.floats(0.02, 0.98), st.sampled_from([0.2, 0.63, 1.0]), st.booleans(), st.floats(0.5, 1.0))
@settings(max_examples=40, deadline=None)
def test_balance_identity_property(p_e, n_th, demon_on, eta):
    imp = ImperfectionSpec.ideal(readout_mixing=True, eta_readout=eta)
    r = report(p_e, n_th, demon_on, imp=imp)
    assert abs(r.residual) < 1e-10
    assert r.generalized_slt >= -1e-10


@pytest.mark.parametrize("n_max", [1, 2, 3])
@pytest.mark.parametrize("p_e", [0.1, 0.5, 0.85])
@pytest.mark.parametrize("demon_on", [True, False])
def test_matches_enumeration_oracle(n_max, p_e, demon_on):
    spec = ThermalSpec(p_e, N_TH, n_max, tail_tol=None)
    r = slt_report(run_stages(spec, IDEAL, demon_on), spec)
    pre, post = oracle.ideal_run(p_e, N_TH, n_max, demon_on)
    want = oracle.functionals(pre, post, p_e, N_TH, n_max)
    got = r.as_dict()
    for key, value in want.items():
        assert got.get(key, getattr(r, key, None)) == pytest.approx(value, abs=1e-12), key


def test_pure_state_report():
    spec = ThermalSpec(0.5, N_TH)
    pre = post = logical_map(JointState.pure("g", 0, spec.n_max))
    from qdemon.thermo import report_from_tables

    r = report_from_tables(pre.P, post.P, spec, True)
    assert float(r.feedback.S_QDC) == 0.0
