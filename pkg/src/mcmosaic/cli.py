"""Command line interface: one executable, seven subcommands.

All randomness flows from --seed (or the config's seed); repeated runs with
the same arguments write byte-identical CSV/JSON/SVG files.  CSV floats use
shortest round-trip formatting; replication fan-out across threads is
canonicalized by (rep, event index) before writing.
"""
from __future__ import annotations

import argparse
import inspect
import json
import math
import os
import sys
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import core, dynamics, mosaic, oracle, render, stats, surplus, verify, walk
from . import limit as limit_mod

__all__ = ["main"]


def _f(v: float) -> str:
    return repr(float(v))


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_threads(args, settings: dict) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    if "threads" in settings:
        return max(1, int(settings["threads"]))
    env = os.environ.get("MC_MOSAIC_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _map_reps(work, reps: int, threads: int) -> list:
    if threads <= 1 or reps <= 1:
        return [work(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(work, range(reps)))


def _load_config(args) -> tuple[core.WeightedConfig, dict]:
    if not getattr(args, "config", None):
        raise ValueError("this subcommand requires --config")
    return core.load_config(args.config)


def _pick(args, settings: dict, flag: str, key: str, required: bool = True):
    v = getattr(args, flag, None)
    if v is None:
        v = settings.get(key)
    if v is None and required:
        raise ValueError(f"missing --{flag.replace('_', '-')} (or config {key!r})")
    return v


def _seed(args, settings: dict) -> int:
    v = getattr(args, "seed", None)
    if v is None:
        v = settings.get("seed", 0)
    return int(v)


# -- subcommands -------------------------------------------------------------


def _cmd_simulate(args) -> int:
    config, settings = _load_config(args)
    seed = _seed(args, settings)
    q_max = float(_pick(args, settings, "q_max", "q_max"))
    reps = int(_pick(args, settings, "reps", "reps", required=False) or 1)
    threads = _resolve_threads(args, settings)
    root = core.RngStream(seed)

    def work(rep: int):
        sub = root.indexed(rep)
        clocks = core.sample_clocks(config, sub.named("clocks"))
        traj = dynamics.run_trajectory(config, clocks, sub, q_max=q_max)
        rows = []
        for idx, ev in enumerate(traj.events):
            rows.append(
                (rep, idx, ev.time, ev.left.lo, ev.left.hi, ev.left.mass,
                 ev.right.lo, ev.right.hi, ev.right.mass, ev.edge[0], ev.edge[1])
            )
        return rows

    all_rows = [row for rows in _map_reps(work, reps, threads) for row in rows]
    all_rows.sort(key=lambda r: (r[0], r[1]))
    lines = ["rep,event,time,left_lo,left_hi,left_mass,right_lo,right_hi,right_mass,child,parent"]
    for r in all_rows:
        lines.append(
            f"{r[0]},{r[1]},{_f(r[2])},{r[3]},{r[4]},{_f(r[5])},"
            f"{r[6]},{r[7]},{_f(r[8])},{r[9]},{r[10]}"
        )
    _write_lines(args.out, lines)
    return 0


def _cmd_forest(args) -> int:
    config, settings = _load_config(args)
    seed = _seed(args, settings)
    q = float(_pick(args, settings, "q", "q"))
    reps = int(_pick(args, settings, "reps", "reps", required=False) or 1)
    threads = _resolve_threads(args, settings)
    root = core.RngStream(seed)

    def work(rep: int):
        sub = root.indexed(rep)
        clocks = core.sample_clocks(config, sub.named("clocks"))
        forest, _ = walk.breadth_first_forest(config, clocks, q)
        return [
            (rep, v, forest.parent[v], forest.depth[v])
            for v in range(len(config))
        ]

    rows = [row for rows in _map_reps(work, reps, threads) for row in rows]
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = ["rep,vertex,parent,depth"]
    for rep, v, p, d in rows:
        lines.append(f"{rep},{v},{'' if p is None else p},{d}")
    _write_lines(args.out, lines)
    return 0


_KIND_ORDER = {"span": 0, "simple": 1, "multi": 1, "loop": 2}


def _cmd_surplus(args) -> int:
    config, settings = _load_config(args)
    seed = _seed(args, settings)
    reps = int(_pick(args, settings, "reps", "reps", required=False) or 1)
    threads = _resolve_threads(args, settings)
    root = core.RngStream(seed)

    if args.static:
        q = float(_pick(args, settings, "q", "q"))

        def work(rep: int):
            sub = root.indexed(rep)
            clocks = core.sample_clocks(config, sub.named("clocks"))
            path = walk.WalkPath.from_clocks(config, clocks, q)
            dec = walk.decompose(path)
            forest, _ = walk.breadth_first_forest(config, clocks, q)
            g = surplus.static_surplus(path, dec, forest, sub)
            return _graph_rows(rep, g)

    else:
        q_max = float(_pick(args, settings, "q_max", "q_max"))
        variant = _pick(args, settings, "variant", "variant", required=False) or "simple"
        if variant not in ("simple", "multigraph"):
            raise ValueError(f"unknown variant {variant!r}")

        def work(rep: int):
            sub = root.indexed(rep)
            clocks = core.sample_clocks(config, sub.named("clocks"))
            traj = dynamics.run_trajectory(config, clocks, sub, q_max=q_max)
            g = surplus.dynamic_surplus(traj, sub, q_max=q_max, variant=variant)
            return _graph_rows(rep, g)

    rows = [row for rows in _map_reps(work, reps, threads) for row in rows]
    rows.sort(key=lambda r: (r[0], r[1], _KIND_ORDER[r[2]], r[3], r[4]))
    lines = ["rep,time,kind,source,target"]
    for rep, t, kind, s_v, t_v in rows:
        lines.append(f"{rep},{_f(t)},{kind},{s_v},{t_v}")
    _write_lines(args.out, lines)
    return 0


def _graph_rows(rep: int, g: surplus.LabeledGraph) -> list[tuple]:
    return [(rep, e.time, e.kind, e.source, e.target) for e in g.spanning + g.surplus]


def _cmd_mosaic(args) -> int:
    config, settings = _load_config(args)
    seed = _seed(args, settings)
    q = float(_pick(args, settings, "q", "q"))
    root = core.RngStream(seed)
    clocks = core.sample_clocks(config, root.named("clocks"))
    traj = dynamics.run_trajectory(config, clocks, root, q_max=q)
    svg = render.render_svg(traj, q, shade_slices=args.shade)
    render.save_svg(svg, args.svg)
    return 0


def _cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 7
    flags = {
        "reps": args.reps,
        "instances": args.instances,
        "trajectories": args.trajectories,
        "batches": args.batches,
    }

    def accepted(fn) -> dict:
        sig = inspect.signature(fn).parameters
        return {k: v for k, v in flags.items() if v is not None and k in sig}

    if args.suite == "all":
        overrides = {
            name: accepted(fn) for name, (_n, fn) in verify.SUITES.items()
        }
        report = verify.run_all(seed, overrides)
    else:
        result = verify.run_suite(args.suite, seed=seed, **accepted(verify.SUITES[args.suite][1]))
        report = {"seed": seed, "passed": result["passed"], "criteria": [result]}
    if args.json:
        _write_json(args.json, report)
    for r in report["criteria"]:
        status = "pass" if r["passed"] else "FAIL"
        print(f"criterion {r['criterion']} {r['name']}: {status}")
    return 0 if report["passed"] else 1


def _cmd_limit(args) -> int:
    settings: dict = {}
    if args.config:
        _cfg, payload = (None, {})
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise ValueError(f"config file not found: {args.config}")
        settings = payload.get("limit", {})
        if "seed" in payload and args.seed is None:
            args.seed = int(payload["seed"])

    def opt(flag, key, default=None):
        v = getattr(args, flag, None)
        if v is None:
            v = settings.get(key, default)
        return v

    kappa = float(opt("kappa", "kappa", 1.0))
    tau = float(opt("tau", "tau", 0.0))
    t = float(opt("t", "t", 0.0))
    c_raw = opt("c", "c", ())
    if isinstance(c_raw, str):
        c = tuple(float(x) for x in c_raw.split(",") if x.strip())
    else:
        c = tuple(float(x) for x in c_raw)
    h = float(opt("h", "h", 1e-3))
    horizon = opt("horizon", "horizon")
    horizon = float(horizon) if horizon is not None else None
    reps = int(args.reps)
    seed = args.seed if args.seed is not None else 0

    params = limit_mod.LimitParams(kappa=kappa, tau=tau, t=t, c=c)
    root = core.RngStream(seed)
    marks_gen = root.named("limit-marks").generator()
    lines = ["source,rep,rank,excursion_length,mark_count"]
    for rep in range(reps):
        path = limit_mod.sample_limit_path(
            params, root.named("limit-path").indexed(rep), h, horizon
        )
        em = limit_mod.excursions_and_marks(path, marks_gen)
        for rank in range(len(em.lengths)):
            lines.append(
                f"limit,{rep},{rank},{_f(em.lengths[rank])},{int(em.counts[rank])}"
            )
    _write_lines(args.out, lines)
    return 0


def _cmd_bench(args) -> int:
    n = args.n
    if n < 2:
        raise ValueError("bench needs n >= 2")
    reps = args.reps
    seed = args.seed if args.seed is not None else 0
    root = core.RngStream(seed).named("bench")

    # equivalence gate on a shared small case before any timing
    gate_n, gate_reps = 50, 1000
    gate_cfg = core.WeightedConfig((1.0,) * gate_n)
    gate_q = 1.0 / gate_n
    counts_a = np.zeros(gate_n + 1, dtype=np.int64)
    counts_b = np.zeros(gate_n + 1, dtype=np.int64)
    for rep in range(gate_reps):
        sub = root.named("gate-walk").indexed(rep)
        clocks = core.sample_clocks(gate_cfg, sub.named("clocks"))
        path = walk.WalkPath.from_clocks(gate_cfg, clocks, gate_q)
        dec = walk.decompose(path)
        largest = max(len(e.vertices) for e in dec.excursions)
        counts_a[largest] += 1
    for rep in range(gate_reps):
        tr = oracle.gillespie_trajectory(
            gate_cfg, root.named("gate-oracle").indexed(rep), gate_q
        )
        largest = max(len(c) for c in tr.partition_at(gate_q))
        counts_b[largest] += 1
    gate = stats.chi_square_homogeneity(counts_a, counts_b)
    gate_ok = (not gate.inconclusive) and (not gate.rejects())

    report = {
        "n": n,
        "reps": reps,
        "q": 1.0 / n,
        "gate": {
            "n": gate_n,
            "reps": gate_reps,
            "passed": bool(gate_ok),
            "statistic": float(gate.statistic),
            "p_value": float(gate.p_value),
        },
        "engines": {},
    }

    config = core.WeightedConfig((1.0,) * n)
    q = 1.0 / n

    def timed(fn):
        tracemalloc.start()
        t0 = time.perf_counter()
        counts = fn()
        elapsed = time.perf_counter() - t0
        peak = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
        return counts, elapsed, peak

    def run_walk():
        out = []
        for rep in range(reps):
            sub = root.named("time-walk").indexed(rep)
            clocks = core.sample_clocks(config, sub.named("clocks"))
            traj = dynamics.run_trajectory(config, clocks, sub, q_max=q)
            out.append(len(traj.events))
        return out

    counts, elapsed, peak = timed(run_walk)
    report["engines"]["bfw-event"] = {
        "event_counts": counts,
        "wall_time_s": elapsed,
        "peak_kb": peak / 1024.0,
    }

    if n > oracle.PAIR_ORACLE_MAX_N:
        report["engines"]["gillespie"] = {
            "skipped": f"n={n} exceeds the pairwise oracle guard "
            f"({oracle.PAIR_ORACLE_MAX_N})"
        }
    else:

        def run_gillespie():
            out = []
            for rep in range(reps):
                tr = oracle.gillespie_trajectory(
                    config, root.named("time-oracle").indexed(rep), q
                )
                out.append(len(tr.mergers))
            return out

        counts, elapsed, peak = timed(run_gillespie)
        report["engines"]["gillespie"] = {
            "event_counts": counts,
            "wall_time_s": elapsed,
            "peak_kb": peak / 1024.0,
        }

    if args.json:
        _write_json(args.json, report)
    print(
        "bench gate:",
        "pass" if gate_ok else "FAIL",
        f"(p={gate.p_value:.4g})",
    )
    for name, eng in report["engines"].items():
        if "skipped" in eng:
            print(f"{name}: skipped ({eng['skipped']})")
        else:
            print(f"{name}: {eng['wall_time_s']:.3f}s, peak {eng['peak_kb']:.0f} KiB")
    return 0 if gate_ok else 1


# -- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmosaic",
        description="simultaneous breadth-first-walk coalescent simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=True):
        if config:
            p.add_argument("--config", help="JSON config with masses and defaults")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")

    p = sub.add_parser("simulate", help="merger event log CSV")
    common(p)
    p.add_argument("--q-max", dest="q_max", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("forest", help="fixed-horizon spanning forest CSV")
    common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_forest)

    p = sub.add_parser("surplus", help="spanning + surplus edge CSV")
    common(p)
    p.add_argument("--static", action="store_true", help="fixed-horizon construction")
    p.add_argument("--q", type=float)
    p.add_argument("--q-max", dest="q_max", type=float)
    p.add_argument("--variant", choices=("simple", "multigraph"))
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_surplus)

    p = sub.add_parser("mosaic", help="excursion mosaic SVG")
    common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--shade", action="store_true", help="fill per-rank slices")
    p.add_argument("--svg", required=True)
    p.set_defaults(func=_cmd_mosaic)

    p = sub.add_parser("verify", help="acceptance criteria")
    p.add_argument("--suite", default="all", choices=sorted(verify.SUITES) + ["all"])
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--batches", type=int)
    p.add_argument("--json", help="write the verdict report here")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("limit", help="limit-path excursion CSV")
    common(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--c", help="comma-separated jump sizes")
    p.add_argument("--h", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_limit)

    p = sub.add_parser("bench", help="engine timing comparison")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int)
    p.add_argument("--json")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code
        return int(code) if isinstance(code, int) else (0 if code is None else 2)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
