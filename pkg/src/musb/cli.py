"""Command-line front end: ``musb kernel | verify | heat | transform``.

Exit codes: 0 all identities hold, 1 an identity failed, 2 usage error,
3 numerical non-convergence.  Complex numbers are written as ``[re, im]``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import heat as H
from . import transforms as T
from . import verify as V
from .errors import ConvergenceError
from .special import check_mu, check_t

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3
HEAT_ROUTE_TOL = 1e-10


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing helpers
# ---------------------------------------------------------------------------


def parse_real(text: str, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"{name}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise UsageError(f"{name}: {text!r} is not finite")
    return v


def parse_complex(text: str, name: str = "--z") -> complex:
    """``"a+bi"``, ``"a-bj"``, ``"bi"`` or a plain real."""
    s = text.strip().replace(" ", "").replace("i", "j")
    try:
        v = complex(s)
    except ValueError:
        raise UsageError(f"{name}: malformed complex number {text!r} (expected e.g. 0.5-1.2i)") from None
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise UsageError(f"{name}: {text!r} is not finite")
    return v


def parse_grid(text: str, name: str) -> tuple[float, ...]:
    """``"start:stop:count"`` (inclusive), a comma list, or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"{name}: expected start:stop:count, got {text!r}")
        a, b = parse_real(parts[0], name), parse_real(parts[1], name)
        try:
            n = int(parts[2])
        except ValueError:
            raise UsageError(f"{name}: count {parts[2]!r} is not an integer") from None
        if n < 0:
            raise UsageError(f"{name}: count must be nonnegative")
        vals = tuple(float(v) for v in np.linspace(a, b, n)) if n != 1 else (a,)
    elif text == "":
        vals = ()
    else:
        vals = tuple(parse_real(v, name) for v in text.split(","))
    if not vals:
        raise UsageError(f"{name}: the grid {text!r} is empty")
    return vals


def parse_z_grid(text: str) -> np.ndarray:
    """``"re0:re1:n,im0:im1:m"``: the rectangular grid, real part varying fastest."""
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--z-grid: expected re0:re1:n,im0:im1:m, got {text!r}")
    re = parse_grid(parts[0], "--z-grid (real part)")
    im = parse_grid(parts[1], "--z-grid (imaginary part)")
    return (np.asarray(re)[None, :] + 1j * np.asarray(im)[:, None]).ravel()


def _mu(v: float) -> float:
    try:
        return check_mu(v)
    except ValueError:
        raise UsageError(f"--mu {v!r}: the parameter must satisfy mu > -1/2") from None


def _t(v: float, name: str = "--t") -> float:
    try:
        return check_t(v)
    except ValueError:
        raise UsageError(f"{name} {v!r}: must be positive") from None


def _version(v: str) -> str:
    if v.upper() not in T.VERSIONS:
        raise UsageError(f"--version must be one of A, B, C, D; got {v!r}")
    return v.upper()


def cx(v) -> list[float]:
    v = complex(v)
    return [v.real, v.imag]


_VALUE_FLAGS = {"--version", "--mu", "--t", "--z", "--q", "--grid", "--z-grid", "--mu-grid", "--t-grid",
                "--x-grid", "--probe", "--out", "--suite", "--jobs"}


def _glue_negative_values(argv: Sequence[str]) -> list[str]:
    # argparse reads "-1:1:3" or "-0.5+1i" as an option; bind such values to their flag
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            elif nxt.startswith("-") and nxt not in _VALUE_FLAGS and not nxt.startswith("--"):
                out.append(f"{tok}={nxt}")
            else:
                out.extend([tok, nxt])
        else:
            out.append(tok)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="musb", description="Deformed Segal-Bargmann transforms and their identity checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kernel", help="evaluate a transform kernel")
    k.add_argument("--version", required=True)
    k.add_argument("--mu", required=True)
    k.add_argument("--t", required=True)
    k.add_argument("--z", default=None, help='complex point such as "0.5-1i"')
    k.add_argument("--q", default=None)
    k.add_argument("--grid", default=None, help="q range start:stop:count (replaces --q)")
    k.add_argument("--z-grid", default=None, help="re0:re1:n,im0:im1:m (replaces --z)")

    v = sub.add_parser("verify", help="run identity suites")
    v.add_argument("--suite", default="all", choices=sorted(V.SUITES) + ["all"])
    v.add_argument("--mu-grid", default=None)
    v.add_argument("--t-grid", default=None)
    v.add_argument("--out", default="json", choices=["json", "csv"])
    v.add_argument("--jobs", type=int, default=1)

    h = sub.add_parser("heat", help="solve the deformed heat equation for a probe")
    h.add_argument("--mu", required=True)
    h.add_argument("--t", required=True)
    h.add_argument("--probe", required=True, help="builtin name, inline JSON or a .json ProbeSpec file")
    h.add_argument("--x-grid", required=True)

    tr = sub.add_parser("transform", help="apply a transform to a probe on a complex grid")
    tr.add_argument("--version", required=True)
    tr.add_argument("--mu", required=True)
    tr.add_argument("--t", required=True)
    tr.add_argument("--probe", required=True)
    tr.add_argument("--z-grid", required=True)
    return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_kernel(args, out) -> int:
    version = _version(args.version)
    mu = _mu(parse_real(args.mu, "--mu"))
    t = _t(parse_real(args.t, "--t"))
    if args.z_grid is not None:
        zs = parse_z_grid(args.z_grid)
    elif args.z is not None:
        zs = np.array([parse_complex(args.z)])
    else:
        raise UsageError("kernel needs --z or --z-grid")
    if args.grid is not None:
        qs = np.array(parse_grid(args.grid, "--grid"))
    elif args.q is not None:
        qs = np.array([parse_real(args.q, "--q")])
    else:
        raise UsageError("kernel needs --q or --grid")
    records = []
    for z in zs:
        vals = np.atleast_1d(T.kernel(version, mu, t, np.full(qs.shape, z), qs))
        for q, val in zip(qs, vals):
            records.append({"version": version, "mu": mu, "t": t, "z": cx(z), "q": float(q), "value": cx(val)})
    json.dump(records[0] if len(records) == 1 else records, out)
    out.write("\n")
    return EXIT_OK


def _grid_arg(text: Optional[str], name: str, check) -> Optional[tuple]:
    if text is None:
        return None
    return tuple(check(v) for v in parse_grid(text, name))


def cmd_verify(args, out, err) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    mu_grid = _grid_arg(args.mu_grid, "--mu-grid", _mu)
    t_grid = _grid_arg(args.t_grid, "--t-grid", lambda v: _t(v, "--t-grid"))
    names = V.ALL_ORDER if args.suite == "all" else (args.suite,)

    reports: list[V.VerificationReport] = []
    writer = csv.writer(out, lineterminator="\r\n") if args.out == "csv" else None
    if writer:
        writer.writerow(V.CSV_FIELDS)
    status, note = EXIT_OK, None
    t0 = time.perf_counter()
    pool = ProcessPoolExecutor(max_workers=args.jobs) if args.jobs > 1 else None
    try:
        for name in names:
            jobs = V.suite_cells(name, mu_grid, t_grid)
            try:
                results = pool.map(V.run_cell, jobs) if pool else map(V.run_cell, jobs)
                for cell in results:  # map keeps cell order whatever the completion order
                    for r in cell:
                        reports.append(r)
                        if writer:
                            writer.writerow(V.report_row(r))
                    out.flush()
            except (ConvergenceError, ArithmeticError) as exc:
                status, note = EXIT_NONCONVERGENCE, f"{name}: {exc}"
                break
            if name == "quadrature" and args.suite == "all" and not all(r.passed for r in reports):
                note = "quadrature self-test failed; remaining suites skipped"
                break
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
    failed = sum(not r.passed for r in reports)
    if status == EXIT_OK and failed:
        status = EXIT_FAIL
    summary = {"total": len(reports), "passed": len(reports) - failed, "failed": failed,
               "wall_time": time.perf_counter() - t0}
    if note:
        summary["note"] = note
    if writer is None:
        json.dump({"reports": [r.to_dict() for r in reports], "summary": summary}, out, indent=1)
        out.write("\n")
    out.flush()
    err.write(f"{summary['passed']}/{summary['total']} passed, {failed} failed"
              + (f" ({note})" if note else "") + "\n")
    return status


def cmd_heat(args, out) -> int:
    mu = _mu(parse_real(args.mu, "--mu"))
    t = _t(parse_real(args.t, "--t"))
    xs = parse_grid(args.x_grid, "--x-grid")
    try:
        spec = V.resolve_probe(args.probe, mu, t)
    except ValueError as exc:
        raise UsageError(f"--probe: {exc}") from None
    phi0 = spec.to_polygauss()
    p = H.HeatKernelParams(mu, t)
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(["x", "re", "im", "route_residual", "moment_residual"])
    worst = 0.0
    for x in xs:
        a = H.heat_solve(phi0, p, x)
        b = H.mu_convolve(p, phi0, mu, x)
        c = H.heat_solve_moments(phi0, p, x)
        route, moment = abs(a - b), abs(a - c)
        worst = max(worst, route, moment)
        writer.writerow([repr(x), repr(a.real), repr(a.imag), repr(route), repr(moment)])
    out.flush()
    return EXIT_OK if worst <= HEAT_ROUTE_TOL else EXIT_FAIL


def cmd_transform(args, out) -> int:
    version = _version(args.version)
    mu = _mu(parse_real(args.mu, "--mu"))
    t = _t(parse_real(args.t, "--t"))
    zs = parse_z_grid(args.z_grid)
    try:
        spec = V.resolve_probe(args.probe, mu, t)
    except ValueError as exc:
        raise UsageError(f"--probe: {exc}") from None
    vals = np.atleast_1d(T.apply(version, spec.to_polygauss(), mu, t, zs))
    rows = [{"version": version, "mu": mu, "t": t, "probe": spec.to_dict(), "z": cx(z), "value": cx(v)}
            for z, v in zip(zs, vals)]
    json.dump(rows, out)
    out.write("\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        args = build_parser().parse_args(_glue_negative_values(argv))
        if args.command == "kernel":
            return cmd_kernel(args, out)
        if args.command == "verify":
            return cmd_verify(args, out, err)
        if args.command == "heat":
            return cmd_heat(args, out)
        return cmd_transform(args, out)
    except UsageError as exc:
        err.write(f"musb: error: {exc}\n")
        return EXIT_USAGE
    except ConvergenceError as exc:
        out.flush()
        err.write(f"musb: not converged: {exc}\n")
        return EXIT_NONCONVERGENCE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def entry() -> None:
    try:
        code = main()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the interpreter's flush at exit
        sys.stdout = open(os.devnull, "w")
        code = EXIT_OK
    sys.exit(code)
