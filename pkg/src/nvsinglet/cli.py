"""Command-line interface: ``nvsinglet {evolve|steady|sweep|figure|abundance}``.

Exit codes: 0 success, 2 usage or config error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import pipelines
from .config import ConfigError, ResultRecord, load_config, parse_experiment, provenance
from .errors import InvalidInputError, NumericalError
from .geometry import NM, LatticeSpec, dimer_abundance

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


def _parse_set(items) -> list:
    out = []
    for item in items or []:
        path, sep, raw = item.partition("=")
        if not sep or not path:
            raise UsageError(f"--set expects path=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.append((path.strip(), value))
    return out


def _load(path, sets=()) -> dict:
    cfg = load_config(path)
    for p, v in sets:
        cfg = pipelines.apply_override(cfg, p, v)
    return cfg


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(obj if isinstance(obj, str) else json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _stem(args, exp) -> str:
    return os.path.join(args.out, exp.name)


# ---------------------------------------------------------------------------
# commands


def cmd_evolve(args) -> int:
    exp = parse_experiment(_load(args.config, _parse_set(args.set)), args.backend)
    os.makedirs(args.out, exist_ok=True)
    backends = ["full", "effective"] if exp.backend == "both" else [exp.backend]
    trajs, summary, files = {}, {}, []
    for b in backends:
        traj = pipelines.run_backend(exp, b)
        trajs[b] = traj
        summary[b] = pipelines.trajectory_summary(traj, exp.tcv_threshold)
        path = f"{_stem(args, exp)}_{b}.csv" if len(backends) > 1 else f"{_stem(args, exp)}.csv"
        pipelines.write_csv(path, pipelines.TRAJECTORY_COLUMNS, pipelines.trajectory_rows(traj))
        files.append(path)
    if len(backends) > 1:
        summary["comparison"] = pipelines.compare_trajectories(trajs["full"], trajs["effective"])
    summary["context"] = pipelines.experiment_context(exp)
    record = ResultRecord(
        config=exp.echo(),
        trajectories={b: {k: v.tolist() for k, v in t.table().items()} for b, t in trajs.items()},
        summary=summary,
        provenance=provenance(exp.seed, exp.backend),
    )
    path = f"{_stem(args, exp)}.json"
    _write_json(path, record.to_json())
    files.append(path)
    _report(files, summary.get("comparison") or summary[backends[0]])
    return EXIT_OK


def cmd_steady(args) -> int:
    exp = parse_experiment(_load(args.config, _parse_set(args.set)), "effective")
    os.makedirs(args.out, exist_ok=True)
    report = pipelines.steady_report(exp)
    record = ResultRecord(config=exp.echo(), summary=report, provenance=provenance(exp.seed, "effective"))
    path = f"{_stem(args, exp)}_steady.json"
    _write_json(path, record.to_json())
    _report([path], {k: report[k] for k in ("zero_mode_count", "spectral_gap_per_s", "LN")})
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.param or len(args.param) != len(args.values or []):
        raise UsageError("give one --values list per --param")
    if len(args.param) > 2:
        raise UsageError("sweeps support 1-D and 2-D grids")
    cfg = _load(args.config, _parse_set(args.set))
    try:
        params = [(p, pipelines.parse_values(v)) for p, v in zip(args.param, args.values)]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    if any(not v for _, v in params):
        raise UsageError("empty --values list")
    header, rows = pipelines.run_sweep(cfg, params, jobs=args.jobs, backend=args.backend, mode=args.mode)
    out = args.out_file or f"{cfg.get('name', 'experiment')}_sweep.csv"
    if os.path.dirname(out):
        os.makedirs(os.path.dirname(out), exist_ok=True)
    pipelines.write_csv(out, header, rows)
    _report([out], {"points": len(rows)})
    return EXIT_OK


def cmd_figure(args) -> int:
    if args.name not in pipelines.FIGURES:
        print(f"error: unknown figure {args.name!r}; valid names: {', '.join(pipelines.FIGURES)}", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    res = pipelines.FIGURES[args.name](args.out, jobs=args.jobs, overrides=_parse_set(args.set))
    summary = dict(res["summary"])
    path = os.path.join(args.out, f"{args.name}.json")
    record = ResultRecord(
        config=res.get("config", {}),
        summary=summary,
        provenance=provenance(0, "figure:" + args.name),
    )
    _write_json(path, record.to_json())
    _report(res["files"] + [path], summary)
    return EXIT_OK


def cmd_abundance(args) -> int:
    if args.trials < 10_000:
        raise UsageError("--trials must be at least 10000")
    res = dimer_abundance(
        LatticeSpec(),
        r_min=args.rmin * NM,
        r_max=args.rmax * NM,
        trials=args.trials,
        seed=args.seed,
        workers=args.jobs,
    )
    body = {"result": res.as_dict(), "timestamp": datetime.now(timezone.utc).isoformat()}
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    if args.out_file:
        _write_json(args.out_file, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report(files, summary) -> None:
    for f in files:
        print(f"wrote {f}")
    if summary:
        print(json.dumps(_plain(summary), sort_keys=True))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items() if not isinstance(v, (list, np.ndarray))}
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    jobs_default = os.cpu_count() or 1
    p = argparse.ArgumentParser(prog="nvsinglet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add_set(sp):
        sp.add_argument("--set", action="append", metavar="PATH=VALUE", help="override a config field (repeatable)")

    sp = sub.add_parser("evolve", help="simulate a configured experiment")
    sp.add_argument("config")
    sp.add_argument("--backend", choices=("full", "effective", "both"))
    sp.add_argument("--out", default=".", help="output directory")
    add_set(sp)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("steady", help="steady state of the effective master equation")
    sp.add_argument("config")
    sp.add_argument("--out", default=".")
    add_set(sp)
    sp.set_defaults(func=cmd_steady)

    sp = sub.add_parser("sweep", help="run a 1-D or 2-D parameter grid")
    sp.add_argument("config")
    sp.add_argument("--param", action="append", help="dotted config path, e.g. drive.detuning_sum_khz")
    sp.add_argument("--values", action="append", help="'1,2,4', 'lin:a:b:n' or 'geom:a:b:n'")
    sp.add_argument("--jobs", type=int, default=jobs_default)
    sp.add_argument("--backend", choices=("full", "effective"))
    sp.add_argument("--mode", choices=("evolve", "steady"), default="evolve")
    sp.add_argument("--out", dest="out_file", help="CSV path")
    add_set(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("figure", help="run a bundled figure pipeline")
    sp.add_argument("name", help=", ".join(pipelines.FIGURES))
    sp.add_argument("--out", default=".")
    sp.add_argument("--jobs", type=int, default=jobs_default)
    add_set(sp)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("abundance", help="Monte Carlo probability of an axis-parallel dimer")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rmin", type=float, default=1.0, help="nm")
    sp.add_argument("--rmax", type=float, default=1.5, help="nm")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", dest="out_file", help="JSON path (default stdout)")
    sp.set_defaults(func=cmd_abundance)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, UsageError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
