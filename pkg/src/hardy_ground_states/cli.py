"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge,
4 a hypothesis of the requested construction fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import extremals as ex
from .constraint_checker import TwoComponentSpec, thresholds_d
from .coupled_ground_states import (GammaSpec, HypothesisError, RootNotFoundError,
                                    assemble_state, solve_gamma_system, solve_two_component)
from .grid import GridError, RadialGrid
from .nehari import CouplingSpec, PredicateNotApplicable, energy, nehari_defect
from .radial_solver import (ConvergenceError, MinimizeOptions, fields_csv, minimize_theta,
                            nonexistence_infimum, pde_residual, richardson_theta,
                            separated_bubble_experiment)
from .scaling_system import (ScalingProblem, SolvabilityError, check_solvability,
                             random_admissible_problem, solve_newton_oracle, solve_picard)

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_HYPOTHESIS = 0, 2, 3, 4
OUTPUT_DIR_ENV = "HARDY_GS_OUTPUT_DIR"


def _floats(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def _number(text: str):
    """Exact rational when the text is a fraction or short decimal."""
    return Fraction(text)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Fraction):
        return _fmt(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _resolve_path(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(args, payload: dict, table=None):
    if args.format == "csv":
        if table is None:
            table = (["key", "value"], [(k, v) for k, v in payload.items()
                                        if not isinstance(v, (dict, list))])
        text = _table_csv(*table)
    else:
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if args.output:
        path = _resolve_path(args.output)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_fields(args, state):
    if getattr(args, "fields_csv", None):
        path = _resolve_path(args.fields_csv)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(fields_csv(state))


def _grid(args, N):
    return RadialGrid(N, args.r_min, args.r_max, args.M)


def _coupling_from_args(args) -> CouplingSpec:
    if args.spec:
        with open(args.spec) as fh:
            return CouplingSpec.from_dict(json.load(fh))
    if args.N is None or args.lambdas is None or args.beta is None:
        raise ex.DomainError("give --spec or all of --N, --lambdas, --beta")
    return CouplingSpec.uniform(args.N, _floats(args.lambdas), args.beta, args.alpha)


# ---------------------------------------------------------------------------


def cmd_constants(args):
    p = ex.HardyParams(args.N, args.lam)
    conv = args.convention or ex.default_convention(p)
    c = ex.sobolev_constants(p)
    payload = {"N": p.N, "lambda": p.lam, "Lambda_N": p.Lambda, "critical_exponent": p.crit,
               "a_lambda": p.a, "q": p.q, "A": p.A, "S": c.S, "S_lambda": c.S_lambda,
               "theta_single": c.theta_single, "convention": conv,
               "amplitude": ex.amplitude(p, conv)}
    _emit(args, payload)


def cmd_exact(args):
    if args.gamma or args.gamma_file:
        if args.gamma_file:
            with open(args.gamma_file) as fh:
                data = json.load(fh)
            G = data["gamma"] if isinstance(data, dict) else data
            lam = data.get("lam", args.lam) if isinstance(data, dict) else args.lam
        else:
            G, lam = json.loads(args.gamma), args.lam
        source = GammaSpec(lam, G)
        gs = solve_gamma_system(source, mu=args.mu)
        N = 4
    else:
        if args.N is None or args.alpha is None or args.nu is None:
            raise ex.DomainError("give --gamma, or --N, --alpha and --nu for two components")
        beta = args.beta if args.beta is not None else ex.critical_exponent(args.N) - args.alpha
        source = TwoComponentSpec(args.N, args.alpha, beta, args.nu)
        gs = solve_two_component(source, args.lam, mu=args.mu)
        N = args.N
    payload = gs.to_dict()
    if args.check or args.fields_csv:
        st = assemble_state(gs, _grid(args, N), source)
        payload["checks"] = {"grid_energy": energy(st), "nehari_defects": nehari_defect(st),
                             "pde_residual": pde_residual(st), "M": args.M}
        _write_fields(args, st)
    _emit(args, payload, (["j", "c"], list(enumerate(gs.c, 1))))


def cmd_minimize(args):
    spec = _coupling_from_args(args)
    grid = _grid(args, spec.N)
    opts = MinimizeOptions(tol=args.tol, max_iter=args.max_iter, seed=args.seed, refine=args.refine)
    rep = minimize_theta(spec, grid, args.init, opts)
    if not rep.converged and args.strict:
        raise ConvergenceError(f"flow stopped after {rep.iterations} iterations "
                               f"(gradient ratio {rep.final_gradient_norm / rep.initial_gradient_norm:.3g})")
    payload = rep.to_dict()
    if args.richardson:
        rr = richardson_theta(spec, grid, args.init, opts)
        payload["richardson"] = {"coarse": rr.coarse, "fine": rr.fine,
                                 "extrapolated": rr.extrapolated, "M": rr.M}
    _write_fields(args, rep.state)
    _emit(args, payload, (["iteration", "theta", "gradient_norm"], rep.history))


def cmd_nonexistence(args):
    spec = _coupling_from_args(args)
    rows = separated_bubble_experiment(spec, _floats(args.mu_schedule))
    inf = nonexistence_infimum(spec)
    payload = {"infimum": inf, "rows": [r.to_dict() for r in rows]}
    header = ["mu"] + [f"t{j + 1}" for j in range(spec.r)] + ["J", "J_minus_infimum",
                                                             "certified", "solvable", "d"]
    table = [[r.mu, *r.t, r.J, r.J - inf, r.certified, r.solvable, r.contraction_d] for r in rows]
    _emit(args, payload, (header, table))


def cmd_thresholds(args):
    alpha, beta = args.alpha, args.beta
    if beta is None:
        if args.N is None:
            raise ex.DomainError("give --beta or --N")
        beta = Fraction(2 * args.N, args.N - 2) - alpha
    th = thresholds_d(alpha, beta, args.N)
    payload = {"alpha": alpha, "beta": beta, "p": th.p, "d1": th.d1, "d2": th.d2, "d3": th.d3,
               "d2_literal": th.d2_literal, "nu_star": th.nu_star}
    if isinstance(th.nu_star, Fraction):
        payload["nu_star_float"] = float(th.nu_star)
    _emit(args, payload)


def cmd_scaling(args):
    if args.problem:
        with open(args.problem) as fh:
            prob = ScalingProblem.from_dict(json.load(fh))
    else:
        rng = np.random.default_rng(args.seed)
        prob = random_admissible_problem(rng, args.r, args.N)
    rep = check_solvability(prob)
    payload = {"problem": prob.to_dict(), "solvability": rep.to_dict()}
    if rep.solvable:
        payload["picard"] = solve_picard(prob).to_dict()
    elif args.require_certificate:
        raise SolvabilityError(f"certificate fails (min C = {np.min(rep.C):.3g}, d = {rep.d:.3g})")
    payload["newton_roots"] = [t.tolist() for t in solve_newton_oracle(prob, args.starts, args.seed)]
    table = (["root"] + [f"t{j + 1}" for j in range(prob.r)],
             [[i, *t] for i, t in enumerate(payload["newton_roots"])])
    _emit(args, payload, table)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", help=f"output file (relative paths go under ${OUTPUT_DIR_ENV})")
    common.add_argument("--seed", type=int, default=0)

    gridp = argparse.ArgumentParser(add_help=False)
    gridp.add_argument("--M", type=int, default=512)
    gridp.add_argument("--r-min", type=float, default=1e-4)
    gridp.add_argument("--r-max", type=float, default=1e4)
    gridp.add_argument("--fields-csv", help="write sampled fields (r, u1..ur) here")

    specp = argparse.ArgumentParser(add_help=False)
    specp.add_argument("--spec", help="CouplingSpec JSON file")
    specp.add_argument("--N", type=int)
    specp.add_argument("--lambdas", help="comma-separated Hardy coefficients")
    specp.add_argument("--beta", type=float, help="common coupling for every pair")
    specp.add_argument("--alpha", type=float, help="common exponent alpha_jk (default 2*/2)")

    parser = argparse.ArgumentParser(prog="hardy-gs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="bubble and Sobolev constants")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--convention", choices=ex.CONVENTIONS)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("exact", parents=[common, gridp], help="explicit ground states")
    p.add_argument("--gamma", help="gamma matrix as JSON, e.g. [[1,0,0],[0,1,0],[0,0,1]]")
    p.add_argument("--gamma-file")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--N", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--check", action="store_true", help="sample on a grid and report defects")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("minimize", parents=[common, gridp, specp], help="radial energy minimizer")
    p.add_argument("--init", default="multi-start",
                   choices=("multi-start", "coupled-bubble", "independent-bubbles", "random"))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--refine", action="store_true",
                   help="finish with the per-component Nehari scaling")
    p.add_argument("--strict", action="store_true", help="exit 3 unless the flow converged")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("nonexistence", parents=[common, specp], help="separated-bubble table")
    p.add_argument("--mu-schedule", default="4,16,64,256")
    p.set_defaults(func=cmd_nonexistence)

    p = sub.add_parser("thresholds", parents=[common], help="two-component constants d1, d2, d3")
    p.add_argument("--N", type=int)
    p.add_argument("--alpha", type=_number, required=True)
    p.add_argument("--beta", type=_number)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("scaling", parents=[common], help="coupled scaling system")
    p.add_argument("--problem", help="ScalingProblem JSON file")
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--require-certificate", action="store_true")
    p.set_defaults(func=cmd_scaling)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            conf = json.load(fh)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and EXIT_INVALID
    try:
        args.func(args)
    except (HypothesisError, PredicateNotApplicable, SolvabilityError) as e:
        print(f"hypothesis violated: {e}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ex.DomainError, GridError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, RootNotFoundError, ArithmeticError, ex.QuadratureError) as e:
        print(f"solver did not converge: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
