"""One test per acceptance criterion; each records a PASS/FAIL line shown in the terminal summary."""

import math
import time

import numpy as np
from scipy.linalg import expm

from qfluct.chainstate import ProductState
from qfluct.harness import (
    ExperimentPlan,
    certify,
    commutator_decay,
    converge_theorem1,
    converge_theorem2,
    eq36_limit,
    eq36_target,
    is_decreasing,
    lemma4_decay,
    meso_grid_residual,
    prop1_scaling,
    scenario_a,
    scenario_b,
    semigroup_for,
    spin1_demo,
    thermal_char_fock,
    thermal_char_laguerre,
)
from qfluct.fluct import gaussian_char, local_weyl
from qfluct.lindblad import CouplingProfile, micro_evolve, micro_evolve_factorized
from qfluct.meso import cp_certificate, evolve_gaussian
from qfluct.opcore import herm_exp_derivative, pauli

from conftest import ACCEPTANCE_LINES, random_hermitian

TRIPLES = [
    ((0.5, 0.0), (1.0, 0.0), (0.0, 0.5)),
    ((0.3, -0.4), (0.7, 0.2), (-0.5, 0.6)),
    ((1.0, 1.0), (-1.0, 0.5), (0.5, -1.0)),
]
THEOREM1_N = (9, 27, 81, 243, 729, 10_000)


class Criterion:
    def __init__(self, number, budget):
        self.number = number
        self.budget = budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start
        return False

    def finish(self, ok, detail):
        in_time = self.seconds < self.budget
        status = "PASS" if ok and in_time else "FAIL"
        ACCEPTANCE_LINES.append(
            f"criterion {self.number:2d}: {status}  {detail}  [{self.seconds:.2f}s of {self.budget:g}s]"
        )
        assert ok, detail
        assert in_time, f"runtime {self.seconds:.1f}s exceeds {self.budget}s"


def test_criterion_01_closed_forms():
    worst = 0.0
    with Criterion(1, 5.0) as c:
        for bo in (0.0, 1.0, 2.0):
            for omega in (1.0, 2.0):
                for lam in (0.5, 1.0):
                    rep = spin1_demo(bo, omega, lam, r_grid=(0.0,))
                    worst = max(worst, rep.max_error())
    c.finish(worst <= 1e-12, f"spin-1 L, sigma, Sigma, r_t, Y_t max error {worst:.2e} (tol 1e-12)")


def test_criterion_02_thermal_cross_check():
    grid = np.linspace(-1.0, 1.0, 5)
    worst, tail = 0.0, 0.0
    with Criterion(2, 5.0) as c:
        for x in (1.0, 2.0):
            den = 1 + 2 * math.cosh(x)
            eta = math.sqrt(math.sinh(x) / den)
            Sigma = (1 + math.cosh(x)) / den * np.eye(2)
            for r1 in grid:
                for r2 in grid:
                    z = 1j * eta * complex(r1, r2)
                    fock, M = thermal_char_fock(x, z)
                    tail = max(tail, math.exp(-x * (M + 1)))
                    target = gaussian_char(Sigma, (r1, r2))
                    worst = max(worst, abs(fock - target), abs(thermal_char_laguerre(x, z, M) - target))
    c.finish(worst <= 1e-10 and tail < 1e-12, f"thermal char. fn. max error {worst:.2e}, Fock tail {tail:.1e}")


def test_criterion_03_static_limit():
    with Criterion(3, 30.0) as c:
        devs = converge_theorem1(scenario_a(), TRIPLES, THEOREM1_N)
    ok = all(is_decreasing(v, slack=0.05) and v[-1] < 1e-2 for v in devs.values())
    finals = ", ".join(f"{v[-1]:.1e}" for v in devs.values())
    c.finish(ok, f"three-point Weyl limit monotone, final deviations {finals}")


def test_criterion_04_dynamical_limit():
    with Criterion(4, 300.0) as c:
        ok = True
        finals = []
        for a, r, b in TRIPLES:
            plan = ExperimentPlan("A", scenario_a(), r, a, b, t_list=(0.5, 1.0, 2.0))
            rows = converge_theorem2(plan)
            for t in plan.t_list:
                devs = [row.abs_dev for row in rows if row.t == t]
                ok &= is_decreasing(devs, slack=0.05) and devs[-1] < 1e-2
                finals.append(devs[-1])
        strict = True
        for a, r, b in TRIPLES:
            plan = ExperimentPlan("B", scenario_b(), r, a, b, t_list=(0.5, 1.0, 2.0), n_list=(1, 3, 5))
            rows = converge_theorem2(plan)
            for t in plan.t_list:
                strict &= is_decreasing([row.abs_dev for row in rows if row.t == t], strict=True)
    c.finish(ok and strict, f"A max final deviation {max(finals):.1e}; B strictly decreasing={strict}")


def test_criterion_05_mesoscopic_structure():
    grid = np.linspace(0.2, 2.0, 10)
    rng = np.random.default_rng(5)
    vectors = list(rng.normal(size=(3, 2)))
    with Criterion(5, 10.0) as c:
        res, ylo, inv, cp = 0.0, np.inf, 0.0, np.inf
        certs = True
        for model in (scenario_a(), scenario_b()):
            certs &= all(x.passed for x in certify(model))
            sg = semigroup_for(model)
            res = max(res, meso_grid_residual(sg, grid, vectors))
            for t in np.linspace(0.05, 5.0, 100):
                ylo = min(ylo, np.linalg.eigvalsh(sg.Y(t)).min())
                inv = max(inv, np.abs(evolve_gaussian(sg, sg.Sigma, t) - sg.Sigma).max())
                cp = min(cp, cp_certificate(sg, t).min_eig)
    ok = certs and res < 1e-10 and ylo >= -1e-10 and inv <= 1e-12 and cp >= -1e-10
    c.finish(ok, f"semigroup {res:.1e}, min eig Y {ylo:.2e}, invariance {inv:.1e}, CP min eig {cp:.3f}")


def test_criterion_06_generator_mean():
    model = scenario_a()
    with Criterion(6, 60.0) as c:
        rows = eq36_limit(model, (1.0, 0.0), (3, 9, 27))
        target = eq36_target(model, (1.0, 0.0))
    closed = -0.5 * (1 + math.cosh(1)) / (1 + 2 * math.cosh(1))
    devs = [row[3] for row in rows]
    # deviations sit at round-off for this model, so ordering below 1e-12 is not meaningful
    ok = is_decreasing(devs, floor=1e-12) and devs[-1] < 1e-2 and abs(target - closed) < 1e-12
    ok &= abs(target - (-0.311156)) < 1e-4
    c.finish(ok, f"target {target:.10f} (closed form {closed:.10f}), deviations {', '.join(f'{d:.1e}' for d in devs)}")


def test_criterion_07_coupling_average():
    s3 = pauli()[2]
    state = ProductState(np.eye(2) / 2)
    profiles = {"nearest": CouplingProfile.custom({1: 1.0, -1: 1.0}), "geometric": CouplingProfile.geometric(0.5, 0.3)}
    chi = scenario_b().chi
    with Criterion(7, 60.0) as c:
        ok = True
        parts = []
        for name, J in profiles.items():
            rows = lemma4_decay(state, s3, s3, J)
            ok &= all(v < 10 / n for n, v in rows)
            comm = [v for _, v in commutator_decay(chi, (1.0, 0.0), s3, s3, J, (6, 8, 10))]
            ok &= is_decreasing(comm, strict=True)
            parts.append(f"{name}: var@1000={rows[-1][1]:.2e}, comm {comm[0]:.3f}->{comm[-1]:.3f}")
    c.finish(ok, "; ".join(parts))


def test_criterion_08_generator_action():
    with Criterion(8, 120.0) as c:
        res = prop1_scaling(scenario_b(), (1.0, 0.5), (1, 3, 5))
    ok = is_decreasing(res.residuals, strict=True) and res.bounded()
    vals = ", ".join(f"{v:.3f}" for v in res.residuals)
    c.finish(ok, f"residuals {vals}; fitted C={res.C:.4f}, log-log slope {res.slope:.3f}")


def test_criterion_09_exponential_derivative():
    rng = np.random.default_rng(9)
    worst = 0.0
    h = 1e-5
    with Criterion(9, 5.0) as c:
        for _ in range(50):
            A, B, C = (random_hermitian(rng, 4) for _ in range(3))
            t0 = rng.uniform(-1, 1)
            path = lambda t: A + t * B + t * t * C
            fd = (expm(1j * path(t0 + h)) - expm(1j * path(t0 - h))) / (2 * h)
            O = herm_exp_derivative(path(t0), B + 2 * t0 * C)
            worst = max(worst, np.abs(O @ expm(1j * path(t0)) - fd).max())
    c.finish(worst < 1e-6, f"max |series - finite difference| = {worst:.2e} over 50 paths")


def test_criterion_10_factorized_oracle():
    model = scenario_a()
    worst = 0.0
    with Criterion(10, 30.0) as c:
        W = local_weyl(model.chi, (0.8, -0.6), 3)
        for t in (0.1, 1.0, 2.0):
            fact = micro_evolve_factorized(model.spec, W, t).to_chain().dense()
            dense = micro_evolve(model.spec, 3, W.to_chain(), t).dense((0, 1, 2))
            worst = max(worst, np.abs(fact - dense).max())
    c.finish(worst <= 1e-10, f"factorized vs dense evolution at N_T=3: {worst:.2e}")
