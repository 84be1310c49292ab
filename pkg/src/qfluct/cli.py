"""Command-line front end.

Exit codes: 0 success, 1 failed certificate/suite or invalid request,
2 unreadable or malformed config, 3 unwritable output.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import harness
from .config import ConfigParseError, load_config
from .errors import ConfigError, DomainError, LocalityViolation, QFluctError
from .lindblad import check_locality, rn_statistics
from .fluct import WeylElement
from .meso import cp_certificate, evolve_gaussian, meso_apply

CONVERGE_HEADER = "scenario,N_T,t,micro_re,micro_im,meso_re,meso_im,abs_dev,seconds"
SEMIGROUP_GRID = tuple(np.linspace(0.2, 2.0, 10))
CP_TIMES = tuple(np.linspace(0.5, 5.0, 10))


def _g(x) -> str:
    return format(float(x), ".17g")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def _load(args):
    """``(config, model)`` or an exit code."""
    try:
        cfg = load_config(args.config)
    except ConfigParseError as exc:
        _err(f"config {args.config}: {exc}")
        return None, 2
    except ConfigError as exc:
        _err(str(exc))
        return None, 2
    try:
        model = cfg.build()
    except ConfigError as exc:
        _err(str(exc))
        return None, 2
    return (cfg, model), 0


def _run_value(args, cfg, name: str, d: int):
    v = getattr(args, name)
    if v is None:
        v = getattr(cfg.run, name)
    if v is None:
        v = [1.0] + [0.0] * (d - 1) if name == "r" else [0.0] * d
    return v


def _plan(args, cfg, model) -> harness.ExperimentPlan:
    return harness.ExperimentPlan(
        scenario=cfg.name,
        model=model,
        r=_run_value(args, cfg, "r", model.d),
        a=_run_value(args, cfg, "a", model.d),
        b=_run_value(args, cfg, "b", model.d),
        t_list=tuple(args.t_list if args.t_list is not None else cfg.run.t_list),
        n_list=tuple(args.n_list if args.n_list is not None else cfg.run.n_list),
        tol=args.tol if args.tol is not None else cfg.run.tol,
        out=args.out,
    )


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", newline="")


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


def _fmt_matrix(name: str, m) -> str:
    rows = ["  [" + ", ".join(f"{v: .6g}" for v in row) + "]" for row in np.asarray(m)]
    return f"{name} =\n" + "\n".join(rows)


# ---------------------------------------------------------------- commands


def cmd_check(args) -> int:
    loaded, code = _load(args)
    if code:
        return code
    _, model = loaded
    try:
        red = check_locality(model.spec, model.chi)
    except LocalityViolation as exc:
        print(f"check_locality: FAIL residual={_g(exc.residual)} observable={exc.index} site={exc.site}")
        return 1
    print(_fmt_matrix("H", red.H_mat))
    print(_fmt_matrix("D", red.D_mat))
    print(_fmt_matrix("L", red.L_mat))
    certs = harness.certify(model)
    for c in certs:
        print(f"{c.name}: {'PASS' if c.passed else 'FAIL'} value={_g(c.value)}")
    return 0 if all(c.passed for c in certs) else 1


def cmd_converge(args) -> int:
    loaded, code = _load(args)
    if code:
        return code
    cfg, model = loaded
    try:
        plan = _plan(args, cfg, model)
    except ConfigError as exc:
        _err(str(exc))
        return 2
    # fail on the output path before spending time on the computation
    try:
        fh = _open_out(args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc.strerror}")
        return 3
    try:
        try:
            rows = harness.converge_theorem2(plan)
        except QFluctError as exc:
            _err(str(exc))
            return 1
        lines = [CONVERGE_HEADER]
        for row in rows:
            secs = _g(row.seconds) if args.timings else "0"
            fields = [
                plan.scenario, str(row.n_sites), _g(row.t),
                _g(row.micro.real), _g(row.micro.imag), _g(row.meso.real), _g(row.meso.imag),
                _g(row.abs_dev), secs,
            ]
            lines.append(",".join(fields))
        try:
            fh.write("\n".join(lines) + "\n")
            fh.flush()
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc.strerror}")
            return 3
    finally:
        _close(fh)
    return 0


def cmd_meso(args) -> int:
    loaded, code = _load(args)
    if code:
        return code
    cfg, model = loaded
    t_list = args.t_list if args.t_list is not None else cfg.run.t_list
    if any(not (t >= 0) for t in t_list):
        _err("times must be non-negative; the mesoscopic semigroup runs forward only")
        return 1
    r = np.asarray(_run_value(args, cfg, "r", model.d), dtype=float)
    if r.shape != (model.d,):
        _err(f"r must have {model.d} components")
        return 1
    try:
        sg = harness._require(model)
    except QFluctError as exc:
        _err(str(exc))
        return 1
    d = model.d
    header = ["t", "f"] + [f"rt_{i + 1}" for i in range(d)]
    header += [f"Y_{i + 1}_{j + 1}" for i in range(d) for j in range(d)] + ["cp_min_eig"]
    try:
        fh = _open_out(args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc.strerror}")
        return 3
    try:
        fh.write(",".join(header) + "\n")
        for t in t_list:
            f, w = meso_apply(sg, t, WeylElement(r))
            Y = sg.Y(t)
            cp = cp_certificate(sg, t).min_eig
            vals = [t, f, *w.r, *Y.reshape(-1), cp]
            fh.write(",".join(_g(v) for v in vals) + "\n")
    finally:
        _close(fh)
    return 0


def _suite_results(model, r, seed: int, tol: float):
    """Yield ``(name, passed, value)`` for each verification suite.

    ``seed`` only drives the random vectors of the algebraic identities; the
    physics suites use the fixed vector ``r``.
    """
    certs = harness.certify(model)
    for c in certs:
        yield c.name, c.passed, c.value
    if not all(c.passed for c in certs if c.name == "check_locality"):
        for name in ("semigroup", "psd", "invariance", "eq36", "prop1"):
            yield name, False, math.nan
    else:
        sg = harness.semigroup_for(model)
        rng = np.random.default_rng(seed)
        vectors = list(rng.normal(size=(3, model.d)))
        res = harness.meso_grid_residual(sg, SEMIGROUP_GRID, vectors)
        yield "semigroup", res < 1e-10, res

        lo = min(float(np.linalg.eigvalsh(sg.Y(t)).min()) for t in CP_TIMES)
        damp = max(meso_apply(sg, t, WeylElement(v))[0] for t in CP_TIMES for v in vectors)
        yield "psd", lo >= -1e-10 and damp <= 1e-12, lo

        dev = max(float(np.max(np.abs(evolve_gaussian(sg, sg.Sigma, t) - sg.Sigma))) for t in CP_TIMES)
        yield "invariance", dev <= 1e-12, dev

        rows = harness.eq36_limit(model, r, (3, 9) if model.spec.p > 2 else (3, 9, 27))
        devs = [row[3] for row in rows]
        yield "eq36", harness.is_decreasing(devs, floor=1e-12) and devs[-1] < tol, devs[-1]

        n_list = tuple(n for n in harness.DENSE_N if model.spec.p**n <= 4096)
        p1 = harness.prop1_scaling(model, r, n_list)
        ok = harness.is_decreasing(p1.residuals, strict=True, floor=1e-12) and p1.bounded()
        yield "prop1", ok, p1.residuals[-1]

    v = model.spec.kraus[0] if model.spec.kraus else model.chi.chi[0]
    var = [row.variance for row in rn_statistics(model.state, v, v.conj().T, model.spec.J, (10, 100, 1000))]
    yield "lemma4", harness.is_decreasing(var, strict=True, floor=1e-15), var[-1]

    rep = harness.spin1_demo()
    yield "spin1", rep.passed(), max(rep.max_error(), rep.thermal_error())


def cmd_verify(args) -> int:
    loaded, code = _load(args)
    if code:
        return code
    cfg, model = loaded
    seed = args.seed if args.seed is not None else cfg.run.seed
    tol = args.tol if args.tol is not None else cfg.run.tol
    r = np.asarray(_run_value(args, cfg, "r", model.d), dtype=float)
    if r.shape != (model.d,):
        _err(f"r must have {model.d} components")
        return 1
    failed = []
    for name, passed, value in _suite_results(model, r, seed, tol):
        print(f"suite={name} status={'PASS' if passed else 'FAIL'} value={_g(value)}")
        if not passed:
            failed.append(name)
    if failed:
        print("failed suites: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def cmd_demo_spin1(args) -> int:
    t_list = args.t_list if args.t_list is not None else [0.1, 0.5, 1.0, 2.0, 5.0]
    try:
        rep = harness.spin1_demo(args.beta_omega, args.omega, args.lam, t_list)
    except DomainError as exc:
        _err(str(exc))
        return 1
    for key, val in rep.errors.items():
        print(f"{key}: max_abs_err={_g(val)}")
    if rep.thermal:
        print(f"thermal: fock_levels={rep.fock_levels} max_abs_err={_g(rep.thermal_error())}")
    else:
        print("thermal: skipped (infinite temperature has no oscillator thermal state)")
    ok = rep.passed()
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfluct", description="Quantum fluctuation dynamics lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default="builtin:scenario_a", help="model file or builtin:<name>")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")
        p.add_argument("--n-list", type=_int_list, default=None)
        p.add_argument("--t-list", type=_float_list, default=None)
        p.add_argument("--r", type=_float_list, default=None)
        p.add_argument("--a", type=_float_list, default=None)
        p.add_argument("--b", type=_float_list, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None, help="seed for randomized checks only")
        return p

    common(sub.add_parser("check", help="locality, Kossakowski, invariance and CP certificates")).set_defaults(func=cmd_check)
    conv = common(sub.add_parser("converge", help="micro vs meso correlation table"))
    conv.add_argument("--timings", action="store_true", help="write wall times (breaks byte-identical output)")
    conv.set_defaults(func=cmd_converge)
    common(sub.add_parser("meso", help="mesoscopic propagator table")).set_defaults(func=cmd_meso)
    common(sub.add_parser("verify", help="run every verification suite")).set_defaults(func=cmd_verify)
    demo = sub.add_parser("demo-spin1", help="spin-1 closed-form comparison")
    demo.add_argument("--beta-omega", type=float, default=1.0)
    demo.add_argument("--omega", type=float, default=1.0)
    demo.add_argument("--lam", type=float, default=1.0)
    demo.add_argument("--t-list", type=_float_list, default=None)
    demo.set_defaults(func=cmd_demo_spin1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
