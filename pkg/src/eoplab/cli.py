"""Command-line experiments: ``eoplab {eop, werner-sweep, bound, delta-probe}``.

Exit codes: 0 success, 2 input error, 3 numerical-quality warning.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import bounds, qcore
from .eop import OptimizerOptions, eop_estimate

SWEEP_HEADER = ["f", "eop_upper", "entropy", "delta", "n_restarts", "n_distinct_minima", "seed"]
INPUT_TOL = 1e-8

EXIT_OK, EXIT_INPUT, EXIT_NUMERICS = 0, 2, 3


class InputError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{x:.12g}"


def num(x: float) -> float:
    """Round to the printed precision of 12 significant digits."""
    return float(fmt(x))


# ---------------------------------------------------------------------------
# Input formats


def parse_state(obj) -> qcore.DensityOperator:
    """Density operator from ``"werner:f"`` or ``{"dims": [...], "matrix": [[[re, im], ...], ...]}``.

    Inputs are checked at tolerance ``INPUT_TOL``, then Hermitized and
    renormalized to unit trace.
    """
    if isinstance(obj, str):
        if not obj.startswith("werner:"):
            raise InputError(f"unknown state shorthand {obj!r}; expected 'werner:f'")
        try:
            f = float(obj.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad Werner parameter in {obj!r}") from None
        return qcore.werner(f)
    if not isinstance(obj, dict) or "dims" not in obj or "matrix" not in obj:
        raise InputError("state must have fields 'dims' and 'matrix'")
    dims = obj["dims"]
    if (not isinstance(dims, list) or not dims
            or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims)):
        raise InputError(f"invariant 'dims' violated: need a list of positive integers, got {dims!r}")
    try:
        m = np.asarray(obj["matrix"], dtype=float)
    except (TypeError, ValueError):
        raise InputError("invariant 'matrix' violated: entries must be [re, im] number pairs") from None
    n = int(np.prod(dims))
    if m.shape != (n, n, 2):
        raise InputError(
            f"invariant 'matrix shape' violated: expected {n}x{n} [re, im] pairs for dims {dims}, "
            f"got array of shape {m.shape}"
        )
    m = m[..., 0] + 1j * m[..., 1]
    try:
        qcore.check_density_matrix(m, atol=INPUT_TOL)
    except qcore.StateError as e:
        raise InputError(f"invariant violated: {e}") from None
    m = 0.5 * (m + m.conj().T)
    m = m / np.trace(m).real
    return qcore.DensityOperator(tuple(dims), m)


def state_to_json(rho: qcore.DensityOperator) -> dict:
    m = rho.matrix
    return {
        "dims": list(rho.dims),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def load_state_file(path: str) -> qcore.DensityOperator:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read state file: {e}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"state file is not valid JSON: {e}") from None
    return parse_state(obj)


def load_decomposition(path: str) -> bounds.EnsembleDecomposition:
    """Decomposition file: ``{"items": [{"weight", "state", "u", "provenance"}, ...]}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read decomposition file: {e}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"decomposition file is not valid JSON: {e}") from None
    items = obj.get("items") if isinstance(obj, dict) else obj
    if not isinstance(items, list) or not items:
        raise InputError("decomposition must list at least one item")
    out = []
    for k, it in enumerate(items):
        if not isinstance(it, dict) or not {"weight", "state", "u"} <= it.keys():
            raise InputError(f"item {k}: fields 'weight', 'state' and 'u' are required")
        try:
            out.append(bounds.DecompositionItem(
                weight=float(it["weight"]),
                state=parse_state(it["state"]),
                upper_bound=float(it["u"]),
                provenance=it.get("provenance", "external"),
            ))
        except (qcore.StateError, ValueError, TypeError) as e:
            raise InputError(f"item {k}: {e}") from None
    weights = np.array([it.weight for it in out])
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > qcore.WEIGHT_TOL:
        raise InputError(f"invariant violated: weights must be a probability vector (sum = {weights.sum():.15g})")
    try:
        return bounds.EnsembleDecomposition(tuple(out))
    except qcore.StateError as e:
        raise InputError(f"invariant violated: {e}") from None


def write_sweep_csv(rows: list[dict], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for r in rows:
                w.writerow([
                    fmt(r["f"]), fmt(r["eop_upper"]), fmt(r["entropy"]), fmt(r["delta"]),
                    r["n_restarts"], r["n_distinct_minima"], r["seed"],
                ])
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from None


def read_sweep_csv(path: str) -> tuple[list[dict], bounds.DeltaGrid]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SWEEP_HEADER:
                raise InputError(f"sweep CSV header must be {','.join(SWEEP_HEADER)}")
            rows = []
            for line in reader:
                if not line:
                    continue
                if len(line) != len(SWEEP_HEADER):
                    raise InputError(f"malformed sweep row: {line}")
                r = dict(zip(SWEEP_HEADER, line))
                for key in ("f", "eop_upper", "entropy", "delta"):
                    r[key] = float(r[key])
                for key in ("n_restarts", "n_distinct_minima", "seed"):
                    r[key] = int(r[key])
                rows.append(r)
    except OSError as e:
        raise InputError(f"cannot read sweep CSV: {e}") from None
    except ValueError as e:
        raise InputError(f"malformed sweep CSV: {e}") from None
    if len(rows) < 3:
        raise InputError(f"need at least 3 sweep rows, got {len(rows)}")
    for r in rows:
        if abs(r["eop_upper"] - r["entropy"] - r["delta"]) > 1e-10:
            raise InputError(f"invariant violated: delta != eop_upper - entropy at f={r['f']}")
    rows.sort(key=lambda r: r["f"])
    try:
        grid = bounds.DeltaGrid(tuple(
            bounds.DeltaPoint(r["f"], r["delta"], r["eop_upper"], r["eop_upper"] - r["delta"])
            for r in rows
        ))
    except ValueError as e:
        raise InputError(str(e)) from None
    return rows, grid


# ---------------------------------------------------------------------------
# Commands


def options_from_args(args) -> OptimizerOptions:
    kw = {}
    for name in ("restarts", "seed", "ancilla_a", "ancilla_b", "max_iters", "grad_tol"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    try:
        return OptimizerOptions(**kw)
    except ValueError as e:
        raise InputError(str(e)) from None


def certificate_report(cert) -> dict:
    return {
        "best_value": num(cert.best_value),
        "kind": "upper-bound",
        "ancilla_dims": list(cert.ancilla_dims),
        "seed": cert.seed,
        "n_restarts": len(cert.restarts),
        "n_distinct_minima": cert.distinct_minima(),
        "iterations": cert.iterations,
        "line_search_failed": cert.line_search_failed,
        "restarts": [
            {"label": r.label, "value": num(r.value), "iterations": r.iterations, "status": r.status}
            for r in cert.restarts
        ],
    }


def cmd_eop(args) -> int:
    if args.werner is not None:
        rho = parse_state(f"werner:{args.werner}")
    elif args.state:
        rho = load_state_file(args.state)
    else:
        raise InputError("give a state file or --werner f")
    if len(rho.dims) != 2:
        raise InputError(f"invariant 'bipartite' violated: dims {list(rho.dims)} must have two entries")
    try:
        cert = eop_estimate(rho, options_from_args(args))
    except ValueError as e:
        raise InputError(str(e)) from None
    report = certificate_report(cert)
    _emit(json.dumps(report, indent=2), args.out)
    return EXIT_NUMERICS if cert.line_search_failed else EXIT_OK


def _sweep_point(job):
    f, opts = job
    rho = qcore.werner(f)
    cert = eop_estimate(rho, opts)
    s = qcore.entropy(rho)
    return {
        "f": f,
        "eop_upper": cert.best_value,
        "entropy": s,
        "delta": cert.best_value - s,
        "n_restarts": len(cert.restarts),
        "n_distinct_minima": cert.distinct_minima(),
        "seed": opts.seed,
        "line_search_failed": cert.line_search_failed,
    }


def werner_sweep(fmin: float, fmax: float, steps: int, opts: OptimizerOptions,
                 workers: int = 1) -> list[dict]:
    """One row per grid point of ``linspace(fmin, fmax, steps)``, in grid order."""
    if not (0.0 <= fmin < fmax <= 1.0):
        raise InputError(f"need 0 <= fmin < fmax <= 1, got fmin={fmin}, fmax={fmax}")
    if steps < 2:
        raise InputError(f"need steps >= 2, got {steps}")
    grid = [float(x) for x in np.linspace(fmin, fmax, steps)]
    jobs = [(f, replace(opts, workers=1)) for f in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def cmd_werner_sweep(args) -> int:
    if not args.out:
        raise InputError("--out is required for werner-sweep")
    workers = int(os.environ.get("EOPLAB_THREADS") or 1)
    rows = werner_sweep(args.fmin, args.fmax, args.steps, options_from_args(args), workers)
    write_sweep_csv(rows, args.out)
    return EXIT_NUMERICS if any(r["line_search_failed"] for r in rows) else EXIT_OK


def bound_report(d: bounds.EnsembleDecomposition) -> dict:
    res = bounds.decomposition_bound(d)
    report = {
        "chi": num(res.chi),
        "weighted_upper": num(res.weighted_upper),
        "bound": num(res.bound),
        "kind": "regularized-upper-bound",
        "provenances": list(res.provenances),
    }
    avg = res.average_state
    if qcore.is_bell_diagonal(avg):
        fw = qcore.werner_fraction(avg)
        report["average_werner_fraction"] = num(fw)
        for row in bounds.werner_benchmark():
            if row.kind == "regularized-upper-bound" and abs(row.f - fw) <= 1e-9:
                report["reference_bound"] = row.value
    return report


def cmd_bound(args) -> int:
    report = bound_report(load_decomposition(args.decomposition))
    _emit(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def delta_probe(grid: bounds.DeltaGrid, threshold: float = 1e-3) -> dict:
    try:
        v, witness = bounds.convexity_violation(grid)
    except bounds.NoTripleError as e:
        raise InputError(str(e)) from None
    return {
        "max_violation": num(v),
        "witness": [num(x) for x in witness],
        "threshold": threshold,
        "flag": "NONCONVEX" if v > threshold else "INCONCLUSIVE",
        "applies_to": "curve of upper estimates of E_P - S",
    }


def cmd_delta_probe(args) -> int:
    _, grid = read_sweep_csv(args.sweep)
    report = delta_probe(grid, args.threshold)
    _emit(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        except OSError as e:
            raise InputError(f"cannot write {out}: {e}") from None
    else:
        print(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eoplab", description="Entanglement of purification experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def optimizer_flags(sp):
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--ancilla-a", type=int)
        sp.add_argument("--ancilla-b", type=int)
        sp.add_argument("--max-iters", type=int)
        sp.add_argument("--grad-tol", type=float)

    e = sub.add_parser("eop", help="upper estimate of E_P for one state")
    e.add_argument("state", nargs="?", help="JSON state file")
    e.add_argument("--werner", type=float, metavar="F", help="use the Werner state W(F)")
    optimizer_flags(e)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eop)

    w = sub.add_parser("werner-sweep", help="E_P upper estimates over a Werner grid, as CSV")
    w.add_argument("--fmin", type=float, required=True)
    w.add_argument("--fmax", type=float, required=True)
    w.add_argument("--steps", type=int, required=True)
    optimizer_flags(w)
    w.add_argument("--out")
    w.set_defaults(func=cmd_werner_sweep)

    b = sub.add_parser("bound", help="regularized-EoP bound from a decomposition file")
    b.add_argument("decomposition")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound)

    d = sub.add_parser("delta-probe", help="midpoint convexity test on a sweep CSV")
    d.add_argument("sweep")
    d.add_argument("--threshold", type=float, default=1e-3)
    d.add_argument("--out")
    d.set_defaults(func=cmd_delta_probe)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (qcore.StateError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
