"""Experiment drivers: convergence studies, limit checks and the spin-1 demo."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_laguerre

from .chainstate import ProductState, expect, gibbs_single_site
from .errors import ConfigError, DomainError, LocalityViolation, QFluctError
from .fluct import (
    ObservableSet,
    WeylElement,
    gaussian_char,
    gaussian_expect,
    kinematics,
    local_weyl,
    weyl_compose,
    weyl_product_expect,
)
from .lindblad import (
    CouplingProfile,
    LindbladSpec,
    MicroDynamics,
    check_locality,
    generator_action_residual,
    invariance_probe,
    kossakowski_check,
    micro_evolve_factorized,
    rn_commutator_norm,
    rn_statistics,
    s_operator_moments,
    single_site_propagator,
)
from .meso import MesoSemigroup, cp_certificate, meso_apply, semigroup_residual
from .opcore import DENSE_CAP, operator_norm, pauli, spin1

__all__ = [
    "CertificateResult",
    "ConvergenceRow",
    "ExperimentPlan",
    "Model",
    "Prop1Result",
    "Spin1Report",
    "certify",
    "converge_theorem1",
    "converge_theorem2",
    "commutator_decay",
    "eq36_limit",
    "eq36_target",
    "is_decreasing",
    "lemma4_decay",
    "limit_point",
    "meso_grid_residual",
    "prop1_scaling",
    "scenario_a",
    "scenario_b",
    "semigroup_for",
    "spin1_demo",
    "thermal_char_fock",
    "thermal_char_laguerre",
]

FACTORIZED_N = (9, 27, 81, 243, 729, 2187, 10_000)
DENSE_N = (1, 3, 5)
KOSSAKOWSKI_SITES = 64
WORKERS_ENV = "QFLUCT_WORKERS"


@dataclass(frozen=True)
class Model:
    """A microscopic model: generator data, reference state and fluctuation observables."""

    name: str
    spec: LindbladSpec
    state: ProductState
    chi: ObservableSet

    @property
    def d(self) -> int:
        return self.chi.d


def scenario_a(beta_omega: float = 1.0, omega: float = 1.0, lam: float = 1.0) -> Model:
    """Spin-1 chain, ``h = omega J3``, on-site dephasing ``lam/2 [[J3, X], J3]``, thermal state."""
    if omega <= 0:
        raise DomainError("omega must be positive")
    J1, J2, J3 = spin1()
    spec = LindbladSpec(omega * J3, [J3], [[1.0]], CouplingProfile.onsite(lam), form="double_commutator")
    state = gibbs_single_site(spec.h, beta_omega / omega)
    return Model("A", spec, state, ObservableSet.bind([J1, J2], state))


def scenario_b(omega: float = 1.0, beta: float = 0.5, lam: float = 0.5, q: float = 0.3) -> Model:
    """Qubit chain with ``h = omega/2 s3`` and double-commutator dephasing through ``J(p) = lam q^|p|``."""
    s1, s2, s3 = pauli()
    spec = LindbladSpec(0.5 * omega * s3, [s3], [[1.0]], CouplingProfile.geometric(lam, q), form="double_commutator")
    state = gibbs_single_site(spec.h, beta)
    return Model("B", spec, state, ObservableSet.bind([s1, s2], state))


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: str
    model: Model
    r: np.ndarray
    a: np.ndarray
    b: np.ndarray
    t_list: tuple = (0.0, 0.5, 1.0, 2.0)
    n_list: tuple = FACTORIZED_N
    tol: float = 1e-2
    out: str | None = None

    def __post_init__(self):
        d = self.model.d
        for name in ("r", "a", "b"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (d,) or not np.all(np.isfinite(v)):
                raise ConfigError(f"{name} must be a finite vector of length {d}")
            object.__setattr__(self, name, v)
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list or any(n < 1 for n in n_list) or any(y <= x for x, y in zip(n_list, n_list[1:])):
            raise ConfigError("n_list must be strictly increasing positive integers")
        t_list = tuple(float(t) for t in self.t_list)
        if any(not (t >= 0 and math.isfinite(t)) for t in t_list):
            raise ConfigError("times must be finite and non-negative")
        object.__setattr__(self, "n_list", n_list)
        object.__setattr__(self, "t_list", t_list)


@dataclass(frozen=True)
class ConvergenceRow:
    n_sites: int
    t: float
    micro: complex
    meso: complex
    seconds: float = 0.0

    @property
    def abs_dev(self) -> float:
        return abs(self.micro - self.meso)


def is_decreasing(values: Sequence[float], slack: float = 0.0, strict: bool = False, floor: float = 0.0) -> bool:
    """Monotone decrease with relative ``slack``.

    Consecutive values that are both below ``floor`` count as converged: at
    round-off level the ordering carries no information.
    """
    vals = list(values)
    for x, y in zip(vals, vals[1:]):
        if x <= floor and y <= floor:
            continue
        if strict and not y < x:
            return False
        if y > x * (1 + slack):
            return False
    return True


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class CertificateResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


def certify(model: Model, t_list: Sequence[float] = (0.5, 1.0, 2.0, 5.0), tol: float = 1e-10) -> list[CertificateResult]:
    """Locality, Kossakowski, invariance and CP certificates of a model."""
    out = []
    try:
        red = check_locality(model.spec, model.chi, tol=tol)
        out.append(CertificateResult("check_locality", True, red.residual))
    except LocalityViolation as exc:
        out.append(CertificateResult("check_locality", False, exc.residual, str(exc)))
        red = None
    kr = kossakowski_check(model.spec, KOSSAKOWSKI_SITES)
    out.append(CertificateResult("kossakowski_check", kr.passed, kr.min_eig))
    n_inv = 3 if model.spec.p ** 6 <= DENSE_CAP else 2
    inv = invariance_probe(model.spec, model.state, n_inv)
    out.append(CertificateResult("invariance_probe", inv <= tol, inv))
    kin = kinematics(model.state, model.chi)
    out.append(CertificateResult("admissibility", kin.admissible(tol), kin.min_eig()))
    if red is not None:
        sg = MesoSemigroup(red, kin)
        worst = min(cp_certificate(sg, t, tol).min_eig for t in t_list)
        out.append(CertificateResult("cp_certificate", worst >= -tol, worst))
    return out


def semigroup_for(model: Model) -> MesoSemigroup:
    return MesoSemigroup(check_locality(model.spec, model.chi), kinematics(model.state, model.chi))


def _require(model: Model) -> MesoSemigroup:
    failed = [c for c in certify(model) if not c.passed]
    if failed:
        names = ", ".join(c.name for c in failed)
        raise ConfigError(f"model {model.name!r} fails {names}")
    return semigroup_for(model)


# ---------------------------------------------------------------- convergence


def limit_point(model: Model, sg: MesoSemigroup, a, r, b, n_sites: int) -> tuple[complex, complex]:
    """``omega(W_N(a) W_N(r) W_N(b))`` and its Gaussian limit ``Omega(W(a) W(r) W(b))``."""
    micro = weyl_product_expect(model.state, model.chi, [a, r, b], n_sites)
    w = weyl_compose(weyl_compose(WeylElement(a), WeylElement(r), sg.sigma), WeylElement(b), sg.sigma)
    return micro, complex(gaussian_expect(sg.Sigma, w))


def _meso_value(sg: MesoSemigroup, a, r, b, t: float) -> complex:
    f, wt = meso_apply(sg, t, WeylElement(r))
    w = weyl_compose(weyl_compose(WeylElement(a), wt, sg.sigma), WeylElement(b), sg.sigma)
    return complex(math.exp(f) * gaussian_expect(sg.Sigma, w))


def _micro_factorized(model: Model, a, r, b, n: int, t: float, P: np.ndarray) -> complex:
    chi = model.chi
    Wr = micro_evolve_factorized(model.spec, local_weyl(chi, r, n), t, propagator=P)
    prod = local_weyl(chi, a, n) @ Wr @ local_weyl(chi, b, n)
    return complex(expect(model.state, prod))


def _micro_dense(model: Model, a, r, b, n: int, dyn: MicroDynamics, t: float) -> complex:
    chi = model.chi
    Wr = dyn.evolve(local_weyl(chi, r, n).to_chain(cap=dyn.dim), t)
    cap = max(DENSE_CAP, dyn.dim)
    prod = local_weyl(chi, a, n).to_chain(cap=cap) @ Wr @ local_weyl(chi, b, n).to_chain(cap=cap)
    return complex(expect(model.state, prod))


def _rows_for_n(model: Model, sg: MesoSemigroup, a, r, b, n: int, t_list) -> list[ConvergenceRow]:
    rows = []
    dyn = None
    for t in t_list:
        start = time.perf_counter()
        if t == 0:
            # identical to the static limit check, so t=0 rows reproduce it exactly
            micro, meso = limit_point(model, sg, a, r, b, n)
        else:
            if model.spec.J.is_onsite:
                micro = _micro_factorized(model, a, r, b, n, t, single_site_propagator(model.spec, t))
            else:
                if dyn is None:
                    dyn = MicroDynamics(model.spec, n)
                micro = _micro_dense(model, a, r, b, n, dyn, t)
            meso = _meso_value(sg, a, r, b, t)
        rows.append(ConvergenceRow(n, t, micro, meso, time.perf_counter() - start))
    return rows


def _worker_count(workers: int | None) -> int:
    if workers is None:
        try:
            workers = int(os.environ.get(WORKERS_ENV, "1"))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
    return max(1, workers)


def converge_theorem2(plan: ExperimentPlan, workers: int | None = None) -> list[ConvergenceRow]:
    """Micro/meso correlation functions on the (N, t) grid of ``plan``, sorted by (N, t).

    On-site models use the exact per-site factorization of the evolution;
    otherwise the full chain is evolved densely, which limits N to a handful
    of sites.  Work is split by chain length; set ``QFLUCT_WORKERS`` (or pass
    ``workers``) to run chain lengths in separate processes.
    """
    model = plan.model
    sg = _require(model)
    if not model.spec.J.is_onsite and model.spec.p ** max(plan.n_list) > 1 << 10:
        raise ConfigError("off-site couplings need the dense path; keep p**N_T <= 1024")
    args = [(model, sg, plan.a, plan.r, plan.b, n, plan.t_list) for n in plan.n_list]
    n_workers = min(_worker_count(workers), len(args))
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            chunks = list(pool.map(_rows_for_n, *zip(*args)))
    else:
        chunks = [_rows_for_n(*arg) for arg in args]
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=lambda row: (row.n_sites, row.t))


def converge_theorem1(model: Model, triples, n_list: Sequence[int] = FACTORIZED_N) -> dict:
    """Deviations ``|omega(W_N(a)W_N(r)W_N(b)) - Omega(W(a)W(r)W(b))|`` per triple."""
    sg = semigroup_for(model)
    out = {}
    for a, r, b in triples:
        key = (tuple(a), tuple(r), tuple(b))
        out[key] = [abs(np.subtract(*limit_point(model, sg, a, r, b, n))) for n in n_list]
    return out


# ---------------------------------------------------------------- generator limits


@dataclass(frozen=True)
class Prop1Result:
    n_list: tuple
    residuals: tuple
    slope: float
    C: float
    q_norm: float

    def envelope(self, n: int) -> float:
        return self.C * math.exp(2 * self.q_norm) / math.sqrt(n)

    def bounded(self, rtol: float = 1e-12) -> bool:
        return all(res <= self.envelope(n) * (1 + rtol) for n, res in zip(self.n_list, self.residuals))


def _loglog_slope(n_list, values) -> float:
    pts = [(math.log(n), math.log(v)) for n, v in zip(n_list, values) if v > 0 and n > 0]
    if len(pts) < 2:
        return float("nan")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def prop1_scaling(model: Model, r, n_list: Sequence[int] = DENSE_N) -> Prop1Result:
    """Dense residuals of the generator action on ``W_N(r)`` with a log-log slope.

    ``C`` is the smallest constant for which ``C exp(2||q_r||) / sqrt(N_T)``
    dominates every residual in the list.
    """
    red = check_locality(model.spec, model.chi)
    res = tuple(generator_action_residual(model.spec, model.chi, r, n, red) for n in n_list)
    qn = operator_norm(model.chi.q(r))
    C = max((v * math.sqrt(n) for n, v in zip(n_list, res)), default=0.0) / math.exp(2 * qn)
    return Prop1Result(tuple(n_list), res, _loglog_slope(n_list, res), C, qn)


def eq36_target(model: Model, r) -> float:
    sg = semigroup_for(model)
    r = np.asarray(r, dtype=float)
    return float(r @ sg.L @ sg.Sigma @ r)


def eq36_limit(model: Model, r, n_list: Sequence[int] = (3, 9, 27)) -> list[tuple]:
    """Rows ``(N_T, omega(S), omega(S^2), |omega(S) - (r, L Sigma r)|)``."""
    target = eq36_target(model, r)
    rows = []
    for n in n_list:
        mean, second = s_operator_moments(model.spec, model.chi, model.state, r, n)
        rows.append((int(n), mean, second, abs(mean - target)))
    return rows


def lemma4_decay(state: ProductState, a, b, J: CouplingProfile, n_list: Sequence[int] = (10, 100, 1000)) -> list[tuple]:
    """Rows ``(N_T, variance)`` of ``R_N`` about its limit; raises if the decay is not strict."""
    rows = [(row.n_sites, row.variance) for row in rn_statistics(state, a, b, J, n_list)]
    if not is_decreasing([v for _, v in rows], strict=True, floor=1e-15):
        raise QFluctError(f"R_N variance is not strictly decreasing: {rows}")
    return rows


def commutator_decay(chi: ObservableSet, r, a, b, J: CouplingProfile, n_list: Sequence[int]) -> list[tuple]:
    return [(int(n), rn_commutator_norm(chi, r, a, b, J, n)) for n in n_list]


# ---------------------------------------------------------------- spin-1 demo


def thermal_char_fock(x: float, z: complex, tail: float = 1e-12, pad: int = 60) -> tuple[complex, int]:
    """``Tr(R D(z))`` for the oscillator thermal state ``R ~ exp(-x a^dag a)``.

    Fock levels ``n <= M`` with ``exp(-x (M + 1)) < tail`` are kept; the
    displacement is exponentiated in ``M + pad`` levels so truncation of the
    ladder operators does not reach the retained block.
    """
    if x <= 0:
        raise DomainError("thermal state needs a positive inverse temperature")
    M = int(math.ceil(-math.log(tail) / x))
    dim = M + 1 + pad + int(4 * abs(z) ** 2)
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    D = expm(z * a.conj().T - np.conj(z) * a)
    n = np.arange(M + 1)
    weights = (1 - math.exp(-x)) * np.exp(-x * n)
    return complex(np.sum(weights * np.diag(D)[: M + 1])), M


def thermal_char_laguerre(x: float, z: complex, M: int) -> complex:
    """Same quantity through ``<n|D(z)|n> = exp(-|z|^2/2) L_n(|z|^2)``."""
    n = np.arange(M + 1)
    s = abs(z) ** 2
    weights = (1 - math.exp(-x)) * np.exp(-x * n)
    return complex(math.exp(-s / 2) * np.sum(weights * eval_laguerre(n, s)))


@dataclass
class Spin1Report:
    beta_omega: float
    omega: float
    lam: float
    errors: dict = field(default_factory=dict)
    thermal: dict = field(default_factory=dict)
    fock_levels: int = 0

    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def thermal_error(self) -> float:
        return max(self.thermal.values(), default=0.0)

    def passed(self, tol: float = 1e-12, thermal_tol: float = 1e-10) -> bool:
        return self.max_error() <= tol and self.thermal_error() <= thermal_tol


def spin1_demo(
    beta_omega: float = 1.0,
    omega: float = 1.0,
    lam: float = 1.0,
    t_list: Sequence[float] = (0.1, 0.5, 1.0, 2.0, 5.0),
    r_grid: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0),
) -> Spin1Report:
    """Compare the spin-1 model against its closed forms; errors are max-abs differences."""
    if lam <= 0:
        raise DomainError("lam must be positive")
    model = scenario_a(beta_omega, omega, lam)
    sg = semigroup_for(model)
    x = beta_omega
    den = 1 + 2 * math.cosh(x)
    w3 = -2 * math.sinh(x) / den
    sig = (1 + math.cosh(x)) / den
    rep = Spin1Report(beta_omega, omega, lam)
    err = rep.errors

    J3 = spin1()[2]
    err["omega_3"] = abs(model.state.site_mean(J3) - w3)
    err["sigma"] = float(np.max(np.abs(sg.sigma - w3 * np.array([[0, 1], [-1, 0]]))))
    err["Sigma"] = float(np.max(np.abs(sg.Sigma - sig * np.eye(2))))
    L = np.array([[-lam / 2, -omega], [omega, -lam / 2]])
    err["L"] = float(np.max(np.abs(sg.L - L)))

    grid = [np.array([u, v]) for u in r_grid for v in r_grid]
    for t in t_list:
        c, s = math.cos(omega * t), math.sin(omega * t)
        XT = math.exp(-lam * t / 2) * np.array([[c, s], [-s, c]])
        X, Y = sg.X(t), sg.Y(t)
        err[f"r_t@{t:g}"] = float(np.max(np.abs(X.T - XT)))
        Yc = sig / 2 * (1 - math.exp(-lam * t)) * np.eye(2)
        err[f"Y_t@{t:g}"] = float(np.max(np.abs(Y - Yc)))
    err["Omega"] = max(abs(gaussian_char(sg.Sigma, r) - math.exp(-0.5 * sig * (r @ r))) for r in grid)
    eta = math.sqrt(math.sinh(x) / den)

    if x > 0:
        # the oscillator covariance coth(x/2)/2 times 2 eta^2 must reproduce Sigma
        err["eta"] = abs(eta**2 / math.tanh(x / 2) - sig)
        for r in grid:
            z = 1j * eta * complex(r[0], r[1])
            fock, M = thermal_char_fock(x, z)
            target = gaussian_char(sg.Sigma, r)
            key = f"({r[0]:g},{r[1]:g})"
            rep.thermal[key] = max(abs(fock - target), abs(thermal_char_laguerre(x, z, M) - target))
            rep.fock_levels = M
    return rep


def meso_grid_residual(sg: MesoSemigroup, grid: Sequence[float], vectors) -> float:
    """Largest semigroup composition residual over ``grid x grid`` and ``vectors``."""
    return max(semigroup_residual(sg, s, t, r) for s in grid for t in grid for r in vectors)
