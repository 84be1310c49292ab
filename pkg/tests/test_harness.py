import math

import numpy as np
import pytest

from qfluct.errors import ConfigError, DomainError
from qfluct.harness import (
    ConvergenceRow,
    ExperimentPlan,
    certify,
    converge_theorem2,
    eq36_limit,
    is_decreasing,
    lemma4_decay,
    limit_point,
    prop1_scaling,
    scenario_a,
    scenario_b,
    semigroup_for,
    spin1_demo,
    thermal_char_fock,
    thermal_char_laguerre,
)
from qfluct.chainstate import ProductState
from qfluct.lindblad import CouplingProfile
from qfluct.opcore import pauli


def test_is_decreasing():
    assert is_decreasing([3, 2, 1])
    assert not is_decreasing([3, 2, 2.2])
    assert is_decreasing([3, 2, 2.05], slack=0.05)
    assert not is_decreasing([3, 2, 2], strict=True)
    assert is_decreasing([1e-16, 2e-16, 1e-16], floor=1e-12)
    assert not is_decreasing([1e-16, 1e-3], floor=1e-12)


def test_plan_validation():
    m = scenario_a()
    with pytest.raises(ConfigError):
        ExperimentPlan("A", m, (1, 0), (0, 0), (0, 0), n_list=(9, 9))
    with pytest.raises(ConfigError):
        ExperimentPlan("A", m, (1, 0), (0, 0), (0, 0), t_list=(-1,))
    with pytest.raises(ConfigError):
        ExperimentPlan("A", m, (1, 0, 0), (0, 0), (0, 0))


def test_row_deviation():
    row = ConvergenceRow(9, 0.5, 1 + 1j, 1.0)
    assert row.abs_dev == 1.0


@pytest.mark.parametrize("model", [scenario_a, scenario_b])
def test_bundled_scenarios_certify(model):
    assert all(c.passed for c in certify(model()))


def test_t0_rows_reproduce_static_limit():
    m = scenario_a()
    plan = ExperimentPlan("A", m, (1, 0), (0.5, 0), (0, 0.5), t_list=(0.0, 1.0), n_list=(9, 27))
    rows = converge_theorem2(plan)
    sg = semigroup_for(m)
    for row in rows:
        if row.t == 0:
            micro, meso = limit_point(m, sg, plan.a, plan.r, plan.b, row.n_sites)
            assert row.micro == micro and row.meso == meso
    assert [(r.n_sites, r.t) for r in rows] == [(9, 0.0), (9, 1.0), (27, 0.0), (27, 1.0)]


def test_parallel_merge_is_deterministic():
    m = scenario_a()
    plan = ExperimentPlan("A", m, (1, 0), (0, 0), (0, 0), t_list=(0.5, 0.0), n_list=(9, 27, 81))
    serial = converge_theorem2(plan, workers=1)
    parallel = converge_theorem2(plan, workers=2)
    assert [(r.n_sites, r.t, r.micro, r.meso) for r in serial] == [(r.n_sites, r.t, r.micro, r.meso) for r in parallel]


def test_dense_path_small_chain():
    m = scenario_b()
    plan = ExperimentPlan("B", m, (1, 0), (0, 0), (0, 0), t_list=(1.0,), n_list=(3, 5))
    devs = [r.abs_dev for r in converge_theorem2(plan)]
    assert devs[1] < devs[0]


def test_certificate_failure_is_config_error():
    m = scenario_b()
    bad = type(m)("bad", m.spec.replace(J=CouplingProfile.custom({0: 0.5, 1: 0.5, -1: 0.5})), m.state, m.chi)
    plan = ExperimentPlan("bad", bad, (1, 0), (0, 0), (0, 0), t_list=(1.0,), n_list=(3,))
    with pytest.raises(ConfigError, match="kossakowski_check"):
        converge_theorem2(plan)


def test_worker_env_validation(monkeypatch):
    m = scenario_a()
    plan = ExperimentPlan("A", m, (1, 0), (0, 0), (0, 0), t_list=(0.0,), n_list=(9,))
    monkeypatch.setenv("QFLUCT_WORKERS", "many")
    with pytest.raises(ConfigError):
        converge_theorem2(plan)


def test_prop1_zero_vector():
    res = prop1_scaling(scenario_b(), (0.0, 0.0))
    assert all(v < 1e-14 for v in res.residuals)
    assert math.isnan(res.slope) or res.slope is not None


def test_prop1_report_has_slope():
    res = prop1_scaling(scenario_b(), (1.0, 0.5))
    assert math.isfinite(res.slope) and res.slope < 0
    assert res.bounded() and res.C > 0


def test_eq36_targets():
    rows = eq36_limit(scenario_a(), (0.0, 0.0), (3,))
    assert rows[0][3] == 0.0
    rows = eq36_limit(scenario_b(), (1.0, 0.0), (3, 5))
    assert all(abs(r[1] - (-2 * 0.5 * 1.0)) < 1e-12 for r in rows)


def test_lemma4_rows_and_failure():
    s3 = pauli()[2]
    state = ProductState(np.eye(2) / 2)
    rows = lemma4_decay(state, s3, s3, CouplingProfile.geometric(0.5, 0.3))
    assert [n for n, _ in rows] == [10, 100, 1000]
    # identically zero variance is flat, which is accepted as converged
    assert lemma4_decay(state, s3, s3, CouplingProfile.onsite(1.0))


def test_thermal_routes_agree():
    for x in (0.5, 1.0, 3.0):
        z = 0.4 - 0.3j
        fock, M = thermal_char_fock(x, z)
        assert math.exp(-x * (M + 1)) < 1e-12
        assert abs(fock - thermal_char_laguerre(x, z, M)) < 1e-12
        assert abs(fock - math.exp(-abs(z) ** 2 / 2 / math.tanh(x / 2))) < 1e-11
    with pytest.raises(DomainError):
        thermal_char_fock(0.0, 0.1)


def test_spin1_demo_infinite_temperature():
    rep = spin1_demo(0.0, 1.0, 0.5)
    assert rep.passed()
    assert rep.thermal == {}
    with pytest.raises(DomainError):
        spin1_demo(1.0, 1.0, 0.0)


@pytest.mark.parametrize("beta_omega", [0.3, 1.0, 2.0])
def test_spin1_demo_closed_forms(beta_omega):
    rep = spin1_demo(beta_omega, 1.0, 1.0)
    assert rep.max_error() < 1e-12
    assert rep.thermal_error() < 1e-10
