"""Command-line entry point: ``moyalcalc {quantize,experiment,report}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 tolerance failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as _dt
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapabilityError, NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 2, 3, 4


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str | None
    output_dir: str
    timestamp: str
    config_hash: str
    tool_version: str = __version__

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _manifest(command: str, out: Path, config_path: str | None, config_bytes: bytes) -> RunManifest:
    return RunManifest(
        command=command,
        config_path=config_path,
        output_dir=str(out),
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        config_hash=hashlib.sha256(config_bytes).hexdigest(),
    )


def _thread_limit():
    n = os.environ.get("MOYALCALC_BACKEND_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        limit = int(n)
    except ValueError:
        raise ValidationError(f"MOYALCALC_BACKEND_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


# ---------------------------------------------------------------------------
# quantize
# ---------------------------------------------------------------------------


def cmd_quantize(args) -> int:
    from .core_algebra import ThetaMatrix
    from .experiments import SymbolSpec, element_on
    from .grid_operator import OperatorGrid, quantize

    theta = ThetaMatrix.parse(_theta_arg(args.theta))
    params = json.loads(args.params) if args.params else {}
    if args.family == "file":
        if not args.path:
            raise ValidationError("--family file needs --path")
        params = {"path": args.path}
    og = OperatorGrid.from_spacing(theta.d, args.m, args.spacing)
    x = element_on(SymbolSpec(args.family, params, args.family), theta, og)
    A = quantize(x, og)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    A.dump(out / "operator.bin")
    summary = {
        "family": args.family,
        "params": params,
        "theta": theta.entries.tolist(),
        "d": og.d,
        "m": og.m,
        "R": og.R,
        "size": og.size,
        "operator_norm": A.norm(),
        "frobenius_norm": float(np.linalg.norm(A.matrix)),
        "hermitian_defect": A.hermitian_defect(),
        "symbol_outer_mass": x.symbol.outer_mass(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    blob = json.dumps({k: summary[k] for k in ("family", "params", "theta", "d", "m", "R")}, sort_keys=True).encode()
    _manifest("quantize", out, args.path, blob).write(out)
    print(f"quantized {args.family} on m={og.m} (N={og.size}): norm {summary['operator_norm']:.6g}, "
          f"hermitian defect {summary['hermitian_defect']:.3g}")
    print(f"wrote {out}")
    return EXIT_OK


def _theta_arg(text: str):
    text = text.strip()
    if text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--theta: invalid matrix literal ({exc})") from exc
    return text


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def cmd_experiment(args) -> int:
    from .experiments import ExperimentConfig, run

    if args.config:
        path = Path(args.config)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ValidationError(f"--config: cannot read {path} ({exc.strerror})") from exc
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--config: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValidationError("--config: top level must be an object")
        data.setdefault("theorem", args.theorem)
        if data["theorem"] != args.theorem:
            raise ValidationError(f"config theorem {data['theorem']!r} does not match command {args.theorem!r}")
        cfg = ExperimentConfig.from_dict(data)
    else:
        cfg = ExperimentConfig.default(args.theorem)
        raw = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    overrides = {k: getattr(args, k) for k in ("alpha", "beta", "k", "p") if getattr(args, k) is not None}
    if overrides or args.seed is not None:
        d = cfg.to_dict()
        d["params"].update(overrides)
        if args.seed is not None:
            d["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(d)
    if args.tolerance_scale is not None:
        cfg = cfg.with_tolerance_scale(args.tolerance_scale)

    out = Path(args.out or cfg.outputs.get("dir") or f"runs/{cfg.theorem}")
    report = run(cfg, jobs=args.jobs)
    report.write(out)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    _manifest(f"experiment {cfg.theorem}", out, args.config, raw).write(out)

    print(f"{cfg.theorem}: config {cfg.hash()[:12]}")
    _print_rows(report.rows)
    print(report.table())
    for note in report.notes:
        print(f"note: {note}")
    print(f"{'PASS' if report.passed else 'FAIL'}; wrote {out}")
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def _print_rows(rows: list[dict]) -> None:
    if not rows:
        return
    keys = [k for k in dict.fromkeys(k for r in rows for k in r) if not isinstance(rows[0].get(k), (list, dict))]

    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return "" if v is None else str(v)

    table = [keys] + [[cell(r.get(k)) for k in keys] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(keys))]
    for row in table:
        print("  ".join(c.rjust(w) for c, w in zip(row, widths)))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    roots = [Path(p) for p in args.dirs]
    for r in roots:
        if not r.is_dir():
            raise ValidationError(f"report: {r} is not a directory")
    out = Path(args.out) if args.out else roots[0] / "aggregate"
    found = {p for r in roots for p in r.rglob("summary.json") if out not in p.parents}
    summaries = sorted(p for p in found if _is_report(p))
    if not summaries:
        raise ValidationError(f"report: no experiment summaries under {', '.join(map(str, roots))}")
    out.mkdir(parents=True, exist_ok=True)

    def rel(p: Path) -> str:
        for r in roots:
            if r in p.parents or p == r:
                return str(p.relative_to(r.parent))
        return str(p)

    rows = []
    for p in summaries:
        s = json.loads(p.read_text())
        for c in s["checks"]:
            rows.append([rel(p.parent), s["theorem"], c["name"], repr(float(c["value"])), c["bound"], "pass" if c["passed"] else "fail"])
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "theorem", "check", "value", "bound", "result"])
        w.writerows(rows)
    n_mu = _concat_series(summaries, "mu_*.dat", out / "loglog_mu.dat", rel)
    n_f = _concat_series(summaries, "dixmier_*.dat", out / "dixmier_F.dat", rel)
    print(f"aggregated {len(summaries)} runs, {len(rows)} checks, {n_mu} profiles, {n_f} Dixmier series into {out}")
    return EXIT_OK


def _is_report(p: Path) -> bool:
    try:
        s = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(s, dict) and "checks" in s and "theorem" in s


def _concat_series(summaries: list[Path], pattern: str, target: Path, rel) -> int:
    """Gnuplot-indexable blocks: a comment header per series, two blank lines between."""
    blocks = []
    for p in summaries:
        for f in sorted(p.parent.glob(pattern)):
            body = [ln for ln in f.read_text().splitlines() if ln and not ln.startswith("#")]
            blocks.append(f"# {rel(f)}\n" + "\n".join(body) + "\n")
    target.write_text("\n\n".join(blocks))
    return len(blocks)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .experiments import THEOREMS

    ap = argparse.ArgumentParser(prog="moyalcalc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"moyalcalc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="quantize a symbol on an operator grid and dump the matrix")
    q.add_argument("--family", default="gaussian", help="gaussian, hermite-gaussian, bump or file")
    q.add_argument("--params", help="family parameters as a JSON object")
    q.add_argument("--path", help="symbol file for --family file")
    q.add_argument("--theta", default="standard2", help="standard2[:HBAR], zeroN or a JSON matrix")
    q.add_argument("--m", type=int, default=32, help="nodes per axis (even)")
    q.add_argument("--spacing", type=float, default=1.0)
    q.add_argument("--out", default="runs/quantize")
    q.set_defaults(func=cmd_quantize)

    e = sub.add_parser("experiment", help="run a verification harness")
    e.add_argument("theorem", choices=THEOREMS)
    e.add_argument("--config", help="experiment config JSON (schema 1)")
    e.add_argument("--out")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--seed", type=int, help="seed for synthetic calibration profiles")
    e.add_argument("--tolerance-scale", type=float, dest="tolerance_scale")
    e.add_argument("--alpha", type=float)
    e.add_argument("--beta", type=float)
    e.add_argument("--k", type=int)
    e.add_argument("--p", type=float)
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="aggregate report directories into tables and plot data")
    r.add_argument("dirs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        with _thread_limit():
            return args.func(args)
    except (ValidationError, CapabilityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
