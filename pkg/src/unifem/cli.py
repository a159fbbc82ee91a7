"""Command-line harness: convergence studies, Jacobian/model checks, perf counters."""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import assembly
from .assembly import (
    PerfCounters,
    apply_assembled,
    apply_jacobian_matrix_free,
    build_problem,
    check_jacobian_fd,
    evaluate_residual,
    report_per_dof,
)
from .mesh import MESH_FAMILIES
from .mms import SOLUTIONS, run_convergence
from .physics import model_bratu, model_mass_reaction, model_poisson, verify_model_derivatives

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

_ELEMENTS = {
    "interval": {"p1", "p2"},
    "tri-square": {"p1", "p2"},
    "quad-square": {"q1"},
    "tet-cube": {"p1"},
}


def _num(v) -> str:
    return f"{v:.17g}"


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", choices=sorted(MESH_FAMILIES), default="tri-square")
    common.add_argument("--n", type=int, default=4, help="cells per direction")
    common.add_argument("--element", choices=["p1", "p2", "q1"])
    common.add_argument("--model", choices=["poisson", "mass", "bratu"], default="poisson")
    common.add_argument("--lambda", dest="lam", type=float, help="Bratu parameter (default 2)")
    common.add_argument("--coefficient", type=float, help="mass/reaction coefficient (default 1)")
    common.add_argument("--chunk-size", type=int, default=assembly.DEFAULT_CHUNK_SIZE)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--output", help="write the main output here instead of stdout")
    common.add_argument("--format", choices=["table", "csv"], default="table")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="unifem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", parents=[common], help="manufactured-solution convergence study")
    p.add_argument("--levels", default="8,16,32", help="comma-separated refinements")
    p.add_argument("--solution", choices=sorted(SOLUTIONS), default="sine")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    p.add_argument("--expect-rate", type=float, help="fail unless the final rate is within --rate-tol")
    p.add_argument("--rate-tol", type=float, default=0.15)

    p = sub.add_parser("check-jacobian", parents=[common], help="assembled Jacobian vs finite differences")
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("verify-model", parents=[common], help="pointwise Jacobian blocks vs finite differences")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)

    sub.add_parser("perf", parents=[common], help="flops and bytes per dof for residual and Jacobian apply")

    p = sub.add_parser("residual-dump", parents=[common], help="dump F(u0) and optionally F'(u0)")
    p.add_argument("--matrix", help="write the Jacobian here as 'row col value' triplets")
    return parser


def _validate(args, parser) -> None:
    if args.element is None:
        args.element = "q1" if args.mesh == "quad-square" else "p1"
    if args.element not in _ELEMENTS[args.mesh]:
        parser.error(f"element {args.element} is not compatible with mesh {args.mesh}")
    if args.lam is not None and args.model != "bratu":
        parser.error("--lambda only applies to --model bratu")
    if args.coefficient is not None and args.model != "mass":
        parser.error("--coefficient only applies to --model mass")
    if args.n < 1 or args.chunk_size < 1 or args.threads < 1:
        parser.error("--n, --chunk-size and --threads must be positive")
    if args.command == "converge":
        if args.model == "bratu":
            parser.error("converge needs a model with a manufactured forcing (poisson or mass)")
        try:
            args.levels = [int(v) for v in args.levels.split(",") if v.strip()]
        except ValueError:
            parser.error(f"--levels must be comma-separated integers, got {args.levels!r}")
        if not args.levels or args.levels != sorted(set(args.levels)) or args.levels[0] < 1:
            parser.error("--levels must be strictly increasing positive integers")


def _model(args, forcing=None, exact=None):
    if args.model == "poisson":
        return model_poisson(forcing)
    if args.model == "mass":
        c = 1.0 if args.coefficient is None else args.coefficient
        g = None if exact is None else (lambda x: c * exact(x))
        return model_mass_reaction(c, g)
    return model_bratu(2.0 if args.lam is None else args.lam)


def _problem(args):
    mesh = MESH_FAMILIES[args.mesh](args.n)
    sol = SOLUTIONS["sine"]()
    model = _model(args, sol.forcing, sol.exact)
    bc = sol.exact if args.model != "bratu" else None
    return build_problem(mesh, args.element, model, bc, chunk_size=args.chunk_size, threads=args.threads)


def _emit(rows, header, args, out):
    if args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    out.write("  ".join(h.rjust(wd) for h, wd in zip(header, widths)) + "\n")
    for r in rows:
        out.write("  ".join(v.rjust(wd) for v, wd in zip(r, widths)) + "\n")


def _cmd_converge(args, out) -> int:
    sol = SOLUTIONS[args.solution]()
    study = run_convergence(
        sol,
        args.element,
        args.mesh,
        args.levels,
        model_factory=lambda g: _model(args, g, sol.exact),
        chunk_size=args.chunk_size,
        threads=args.threads,
    )
    rates = [None] + study.rates
    rows = []
    for lvl, rate in zip(study.levels, rates):
        secs = "0" if args.no_timing else _num(lvl.runtime_seconds)
        rows.append([_num(lvl.h), str(lvl.num_global), _num(lvl.l2_error), "" if rate is None else _num(rate), secs])
    _emit(rows, ["h", "dofs", "l2_error", "rate", "seconds"], args, out)
    if not all(np.isfinite(lvl.l2_error) for lvl in study.levels):
        return EXIT_CHECK_FAILED
    if args.expect_rate is not None:
        final = study.rates[-1] if study.rates else float("nan")
        if not abs(final - args.expect_rate) <= args.rate_tol:
            print(f"final rate {final:.4f} outside {args.expect_rate} +- {args.rate_tol}", file=sys.stderr)
            return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_check_jacobian(args, out) -> int:
    pr = _problem(args)
    rng = np.random.default_rng(args.seed)
    u = rng.uniform(-0.5, 0.5, pr.num_global)
    rep = check_jacobian_fd(
        pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, pr.bc, tol=args.tol, chunk_size=args.chunk_size
    )
    verdict = "<=" if rep.passed else ">"
    out.write(
        f"model={pr.model.name} mesh={args.mesh} n={args.n} element={args.element} "
        f"columns={rep.columns_checked}\n"
        f"max rel err {rep.max_rel_error:.3e} {verdict} {args.tol:g}\n"
    )
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _cmd_verify_model(args, out) -> int:
    sol = SOLUTIONS["sine"]()
    model = _model(args, sol.forcing, sol.exact)
    dim = MESH_FAMILIES[args.mesh](1).dim
    rep = verify_model_derivatives(model, samples=args.samples, seed=args.seed, dim=dim, rtol=args.tol)
    rows = [[b, f"{e:.3e}", "ok" if e <= rep.tolerance else "FAIL"] for b, e in rep.errors.items()]
    _emit(rows, ["block", "max_rel_err", "status"], args, out)
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _cmd_perf(args, out) -> int:
    pr = _problem(args)
    rng = np.random.default_rng(args.seed)
    u = rng.uniform(-0.5, 0.5, pr.num_global)
    x = rng.standard_normal(pr.num_global)
    kw = dict(chunk_size=args.chunk_size, aux=pr.aux)
    results = []

    c = PerfCounters()
    evaluate_residual(pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, pr.bc, counters=c, **kw)
    results.append(("residual", c))
    A = pr.jacobian(u)
    c = PerfCounters()
    apply_assembled(A, x, counters=c)
    results.append(("assembled-apply", c))
    c = PerfCounters()
    apply_jacobian_matrix_free(pr.mesh, pr.section, pr.gmap, pr.tab, pr.model, u, x, pr.bc, counters=c, **kw)
    results.append(("matrix-free-apply", c))

    rows = []
    for name, ctr in results:
        f, b = report_per_dof(ctr, pr.num_global)
        rows.append([name, _num(f), _num(b)])
    _emit(rows, ["kernel", "flops_per_dof", "bytes_per_dof"], args, out)
    return EXIT_OK


def _cmd_residual_dump(args, out) -> int:
    pr = _problem(args)
    u = np.zeros(pr.num_global)
    F = pr.residual(u)
    rows = [[str(i), _num(v)] for i, v in enumerate(F)]
    _emit(rows, ["index", "value"], args, out)
    if args.matrix:
        with open(args.matrix, "w") as fh:
            pr.jacobian(u).write_triplets(fh)
    return EXIT_OK


_COMMANDS = {
    "converge": _cmd_converge,
    "check-jacobian": _cmd_check_jacobian,
    "verify-model": _cmd_verify_model,
    "perf": _cmd_perf,
    "residual-dump": _cmd_residual_dump,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args, parser)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    buf = io.StringIO()
    code = _COMMANDS[args.command](args, buf)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
