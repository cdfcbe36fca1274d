"""Command-line front end: JSON configs in, JSON/CSV results out.

Subcommands
    place    write the cache contents for a config
    deliver  build (and optionally verify) delivery schedules
    rates    emit rate curves as CSV

Exit codes: 0 success, 2 usage/validation error, 3 verification failure,
4 resource limit exceeded.  Every file output gets a sibling
``<name>.manifest.json`` recording how it was produced.  Outputs are
deterministic for a given config and seed, except manifest timestamps.
The ``CODEDCACHE_THREADS`` environment variable sets the worker count
for probability sweeps; results are assembled in grid order regardless.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .delivery import SCHEDULERS, decodable, exhaustive_schedule, schedule_to_json
from .errors import LimitExceededError, ValidationError
from .placement import cache_to_json, load_config, place
from .rates import (
    RateCurve,
    alpha_points,
    beta_points,
    lower_envelope,
    rate_alpha_closed,
    rate_beta_closed,
    write_curves_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_LIMIT = 4


def _threads() -> int:
    raw = os.environ.get("CODEDCACHE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"CODEDCACHE_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValidationError(f"CODEDCACHE_THREADS must be >= 1, got {n}")
    return n


def _write_manifest(out_path: Path, command: str, config: str, seed=None, outputs=None) -> None:
    manifest = {
        "tool": "codedcache",
        "version": __version__,
        "command": command,
        "config": str(config),
        "seed": seed,
        "outputs": [str(p) for p in (outputs or [out_path])],
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    side = out_path.with_name(out_path.stem + ".manifest.json")
    side.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _parse_demand(text: str, num_files: int, users: int) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != users:
        raise ValidationError(f"demand has {len(parts)} entries for {users} users")
    out = []
    for p in parts:
        if p.isalpha() and len(p) == 1:
            f = ord(p.upper()) - ord("A") + 1
        else:
            try:
                f = int(p)
            except ValueError as exc:
                raise ValidationError(f"demand entry {p!r} is not a file") from exc
        if not 1 <= f <= num_files:
            raise ValidationError(f"file {p!r} outside [1, {num_files}]")
        out.append(f)
    return tuple(out)


def _parse_grid(text: str) -> tuple[float, ...]:
    if ":" not in text:
        return (float(text),)
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValidationError(f"bad grid {text!r}")
    values = []
    x = start
    while x <= stop + 1e-12:
        values.append(round(x, 12))
        x += step
    return tuple(values)


def cmd_place(args) -> int:
    cfg = load_config(args.config)
    cache = place(cfg)
    out = Path(args.out)
    out.write_text(json.dumps(cache_to_json(cache), indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "place", args.config)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_deliver(args) -> int:
    cfg = load_config(args.config)
    cache = place(cfg)
    scheduler = SCHEDULERS[args.scheduler]
    if args.all_demands:
        if cfg.num_files**cfg.users > args.demand_limit:
            raise LimitExceededError(
                f"{cfg.num_files}**{cfg.users} demands exceed --demand-limit"
            )
        demands = list(itertools.product(range(1, cfg.num_files + 1), repeat=cfg.users))
    else:
        demands = [_parse_demand(args.demand, cfg.num_files, cfg.users)]

    results = []
    failures = 0
    for demand in demands:
        schedule = scheduler(cache, demand)
        entry = schedule_to_json(schedule, cfg.users, demand=demand)
        if args.verify:
            report = decodable(cache, schedule, demand)
            entry["verified"] = report.ok
            if not report.ok:
                failures += 1
                print(f"verification FAILED for demand {demand}", file=sys.stderr)
        results.append(entry)
        if args.print_text:
            print(f"demand {demand}: rate {entry['rate']}")
            for m in entry["messages"]:
                print(f"  {m['text']}")

    payload = results[0] if len(results) == 1 else {"schedules": results}
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        _write_manifest(out, "deliver", args.config)
        print(f"wrote {out}")
    elif not args.print_text:
        print(json.dumps(payload, indent=2))
    return EXIT_VERIFY if failures else EXIT_OK


def _reference_setup(cfg) -> bool:
    return cfg.users == 3 and tuple(g.size for g in cfg.groups) == (1, 1)


def cmd_rates(args) -> int:
    cfg = load_config(args.config)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies or any(s not in ("alpha", "beta") for s in strategies):
        raise ValidationError("--strategies needs a subset of: alpha,beta")

    if args.p_grid:
        if not _reference_setup(cfg):
            raise ValidationError(
                "--p-grid curves are the cache-size-1 closed forms of the "
                "3-user/2-file reference setup; use --m-sweep for other configs"
            )
        grid = _parse_grid(args.p_grid)
        closed = {"alpha": rate_alpha_closed, "beta": rate_beta_closed}
        curves = []
        for name in strategies:
            fn = closed[name]
            workers = _threads()
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    ys = list(pool.map(fn, grid))
            else:
                ys = [fn(p) for p in grid]
            curves.append(RateCurve(f"R_{name}", "p", tuple(zip(grid, ys))))
    else:
        envelopes = {}
        if "beta" in strategies:
            sched = lambda cache, demand: exhaustive_schedule(
                cache, demand, max_messages=args.max_messages
            )
            envelopes["beta"] = lower_envelope(
                beta_points(cfg.users, [g.size for g in cfg.groups], cfg.popularity, sched)
            )
        if "alpha" in strategies:
            envelopes["alpha"] = lower_envelope(
                alpha_points(cfg.users, cfg.popularity)
            )
        grid = sorted({m for env in envelopes.values() for m, _ in env.vertices})
        curves = [
            RateCurve(
                f"R_{name}",
                "M",
                tuple((m, envelopes[name].value(m)) for m in grid),
            )
            for name in strategies
        ]

    if args.csv:
        out = Path(args.csv)
        write_curves_csv(out, curves)
        _write_manifest(out, "rates", args.config)
        print(f"wrote {out}")
    else:
        print(",".join([curves[0].xname] + [c.label for c in curves]))
        for i, x in enumerate(curves[0].xs):
            print(",".join([f"{float(x):.12g}"] + [f"{float(c.ys[i]):.12g}" for c in curves]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedcache",
        description="Coded caching with nonuniform popularity: placement, delivery, rates.",
    )
    parser.add_argument("--version", action="version", version=f"codedcache {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_place = sub.add_parser("place", help="write cache contents for a config")
    p_place.add_argument("config")
    p_place.add_argument("--out", required=True)
    p_place.set_defaults(func=cmd_place)

    p_del = sub.add_parser("deliver", help="build delivery schedules")
    p_del.add_argument("config")
    group = p_del.add_mutually_exclusive_group(required=True)
    group.add_argument("--demand", help='request vector, e.g. "A,A,B" or "1,1,2"')
    group.add_argument("--all-demands", action="store_true")
    p_del.add_argument("--scheduler", choices=sorted(SCHEDULERS), default="greedy")
    p_del.add_argument("--verify", action="store_true")
    p_del.add_argument("--out")
    p_del.add_argument("--print-text", action="store_true")
    p_del.add_argument("--demand-limit", type=int, default=4096)
    p_del.set_defaults(func=cmd_deliver)

    p_rates = sub.add_parser("rates", help="emit rate curves as CSV")
    p_rates.add_argument("config")
    grid = p_rates.add_mutually_exclusive_group(required=True)
    grid.add_argument("--p-grid", help="probability grid start:stop:step or a single value")
    grid.add_argument("--m-sweep", action="store_true", help="rate vs cache size")
    p_rates.add_argument("--strategies", default="alpha,beta")
    p_rates.add_argument("--csv")
    p_rates.add_argument("--max-messages", type=int, default=12)
    p_rates.set_defaults(func=cmd_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LimitExceededError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
