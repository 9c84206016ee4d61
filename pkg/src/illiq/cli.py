"""Command-line entry point.

Subcommands
    check      validate a config and certify its cost function
    solve      solve a game (fd, picard or closed form) and dump CSV grids
    simulate   Monte-Carlo paths under a previously solved strategy field
    sweep      run one of the scripted studies and assert its claims

Exit codes: 0 ok, 1 parse/missing input, 2 certification failure,
3 method/game mismatch, 4 solver error, 5 solution/config hash mismatch,
6 sweep assertion failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .closedform import (
    QuadratureRule,
    cara_single_value,
    central_gradient,
    closed_speed_field,
    rn_aggregate_grid,
    rn_individual_values,
)
from .experiments import (
    SweepResult,
    cara_two_player_study,
    figure_grids,
    predator_sweep,
    split_sweep,
    spread_sweep,
    zero_sum_report,
)
from .manifest import RunManifest, digest, read_manifest, write_manifest
from .model import (
    CARA,
    ConfigError,
    GameSpec,
    GridSpec,
    LinearCost,
    SmoothedSpreadCost,
    ValidationError,
    game_to_dict,
    grid_to_dict,
    load_config,
)
from .pdesolve import (
    Solution,
    SolverError,
    read_solution_csv,
    residual,
    solve_fd,
    solve_picard,
    surplus,
    write_solution_csv,
)
from .simulate import (
    SimulationError,
    mc_consistency,
    realized_objectives,
    simulate_paths,
    write_paths_csv,
)
from .speeds import (
    CertificationError,
    SpeedSolverError,
    apriori_speed_bound,
    certify_for_game,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_CERTIFICATION = 2
EXIT_METHOD = 3
EXIT_SOLVER = 4
EXIT_HASH = 5
EXIT_ASSERTION = 6

DEFAULT_SIM_STEPS = 500


class MethodMismatch(RuntimeError):
    pass


class HashMismatch(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2), which collides with cert failures
        raise ConfigError(message)


def worker_cap() -> int:
    """Worker count cap from ILLIQ_THREADS (the library itself runs
    sequentially for determinism, so any positive cap is honored)."""
    raw = os.environ.get("ILLIQ_THREADS")
    if raw is None:
        return 1
    try:
        cap = int(raw)
    except ValueError as err:
        raise ConfigError(f"ILLIQ_THREADS must be an integer, got {raw!r}") from err
    if cap < 1:
        raise ConfigError("ILLIQ_THREADS must be >= 1")
    return cap


def _read_config(path: str) -> tuple[GameSpec, GridSpec, str, str]:
    text = Path(path).read_text()
    game, grid = load_config(text)
    return game, grid, digest(game_to_dict(game)), digest(grid_to_dict(grid))


def _apply_grid_flag(grid: GridSpec, flag: str | None) -> GridSpec:
    if flag is None:
        return grid
    try:
        n_p, n_t = (int(v) for v in flag.split(","))
    except Exception as err:
        raise ConfigError("--grid expects 'np,nt'") from err
    from dataclasses import replace

    return replace(grid, n_p=n_p, n_t=n_t)


def _manifest(command: str, config_hash: str, grid_hash: str, seed, t0: float,
              outputs) -> RunManifest:
    return RunManifest(
        command=command,
        config_hash=config_hash,
        grid_hash=grid_hash,
        seed=seed,
        tool_version=__version__,
        wall_time_s=time.time() - t0,
        outputs=tuple(str(o) for o in outputs),
    )


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    try:
        game, grid, config_hash, grid_hash = _read_config(args.config)
    except FileNotFoundError as err:
        print(json.dumps({"ok": False, "error": f"missing file: {err}"}))
        return EXIT_PARSE
    except (ConfigError, ValidationError) as err:
        print(json.dumps({"ok": False, "error": str(err)}))
        return EXIT_PARSE
    try:
        cert = certify_for_game(game)
        bound = apriori_speed_bound(game, cert)
    except CertificationError as err:
        print(json.dumps({"ok": False, "error": str(err)}))
        return EXIT_CERTIFICATION
    report = {
        "ok": True,
        "config_hash": config_hash,
        "grid_hash": grid_hash,
        "n_players": game.n_players,
        "eps_floor": cert.eps_floor,
        "marginal_monotone": cert.marginal_monotone,
        "working_interval": [cert.z_lo, cert.z_hi],
        "speed_bound": bound,
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _solve_closed(game: GameSpec, grid: GridSpec) -> Solution:
    if not isinstance(game.cost, LinearCost):
        raise MethodMismatch("closed form needs a linear cost function")
    rule = QuadratureRule.for_grid(grid)
    times = grid.times(game.market.maturity)
    prices = grid.prices
    if game.all_risk_neutral:
        if game.n_players == 1:
            values = rn_aggregate_grid(game, grid, rule)[None, :, :]
        else:
            values = rn_individual_values(game, grid, rule)
    elif game.n_players == 1 and isinstance(game.players[0].utility, CARA):
        values = np.empty((1, times.size, prices.size))
        for k, t in enumerate(times):
            values[0, k] = cara_single_value(game, float(t), prices, rule)
    else:
        raise MethodMismatch(
            "closed form covers risk-neutral games and the single CARA player only"
        )
    grads = central_gradient(values, grid.dp)
    speeds, agg = closed_speed_field(game, grads)
    meta = {"scheme": "closed-form", "quad_nodes": grid.quad_nodes}
    return Solution(grid, times, prices, values, grads, speeds, agg, meta)


def _surplus_time_indices(n_t: int, cap: int = 201):
    if n_t <= cap:
        return list(range(n_t))
    return sorted(set(np.linspace(0, n_t - 1, cap).round().astype(int).tolist()))


def cmd_solve(args) -> int:
    t0 = time.time()
    game, grid, config_hash, grid_hash = _read_config(args.config)
    grid = _apply_grid_flag(grid, args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.method == "fd":
        sol = solve_fd(game, grid)
    elif args.method == "picard":
        sol = solve_picard(game, grid)
    else:
        sol = _solve_closed(game, grid)

    cert = certify_for_game(game)
    bound = apriori_speed_bound(game, cert)
    rep = residual(sol, game)
    max_speed = float(np.max(np.abs(sol.speeds)))
    bound_ok = max_speed <= bound + 1e-6

    sol_path = out / "solution.csv"
    write_solution_csv(sol, sol_path)
    idx = _surplus_time_indices(sol.times.size)
    surp = surplus(sol, game, QuadratureRule.for_grid(grid), time_indices=idx)
    surp_path = out / "surplus.csv"
    _write_surplus_csv(sol, surp, idx, surp_path)
    manifest_path = out / "manifest.json"
    write_manifest(
        _manifest(f"solve --method {args.method}", config_hash, grid_hash, None, t0,
                  [sol_path.name, surp_path.name]),
        manifest_path,
    )
    print(f"max interior residual: {rep.overall:.6g}")
    print(f"speed bound check: max |speed| = {max_speed:.6g} vs bound {bound:.6g} "
          f"-> {'PASS' if bound_ok else 'FAIL'}")
    print(f"wrote {sol_path} {surp_path} {manifest_path}")
    return EXIT_OK


def _write_surplus_csv(sol: Solution, surp: np.ndarray, time_indices, path) -> None:
    n = sol.n_players
    cols = ["t", "p"] + [f"surplus_{j+1}" for j in range(n)]
    n_sel = len(time_indices)
    n_p = sol.prices.size
    data = np.empty((n_sel * n_p, 2 + n))
    data[:, 0] = np.repeat(sol.times[time_indices], n_p)
    data[:, 1] = np.tile(sol.prices, n_sel)
    for j in range(n):
        data[:, 2 + j] = surp[j].reshape(-1)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    t0 = time.time()
    game, grid, config_hash, grid_hash = _read_config(args.config)
    sol_path = Path(args.solution)
    manifest_path = sol_path.parent / "manifest.json"
    if not manifest_path.exists():
        raise HashMismatch(f"no manifest next to {sol_path}; cannot verify provenance")
    recorded = read_manifest(manifest_path)
    if recorded.get("config_hash") != config_hash or recorded.get("grid_hash") != grid_hash:
        raise HashMismatch("solution manifest hashes do not match the config")
    sol = read_solution_csv(sol_path, grid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = simulate_paths(sol, game, args.paths, args.seed, DEFAULT_SIM_STEPS)
    means, ses = realized_objectives(bundle, game)
    z = mc_consistency(bundle, sol)
    paths_path = out / "paths.csv"
    write_paths_csv(bundle, paths_path)
    summary = {
        "n_paths": bundle.n_paths,
        "n_steps": DEFAULT_SIM_STEPS,
        "seed": args.seed,
        "clamped_fraction": bundle.clamped_fraction,
        "players": [
            {"mean": float(means[j]), "se": float(ses[j]), "z": float(z[j])}
            for j in range(bundle.n_players)
        ],
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    write_manifest(
        _manifest("simulate", config_hash, grid_hash, args.seed, t0,
                  [paths_path.name, summary_path.name]),
        out / "manifest.json",
    )
    print(json.dumps(summary["players"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _csv_list(raw: str, cast):
    return tuple(cast(v) for v in raw.split(","))


def _write_sweep_csv(result: SweepResult, path) -> None:
    lines = ["param,value,metric,metric_value"]
    for name, arr in result.metrics.items():
        vals = np.atleast_1d(arr)
        if vals.size == len(result.values):
            for v, m in zip(result.values, vals):
                lines.append(f"{result.param},{v},{name},{m:.17g}")
        else:
            for m in vals:
                lines.append(f"{result.param},,{name},{m:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def _write_grids_csv(grids: dict, path) -> None:
    one_d = {k: np.asarray(v) for k, v in grids.items() if np.ndim(v) == 1}
    if one_d:
        cols = list(one_d)
        data = np.column_stack([one_d[c] for c in cols])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")


def _sweep_outputs(result: SweepResult, out: Path, prefix: str = "sweep"):
    csv_path = out / f"{prefix}.csv"
    _write_sweep_csv(result, csv_path)
    grids_path = out / f"{prefix}_grids.csv"
    _write_grids_csv(result.grids, grids_path)
    return [csv_path.name, grids_path.name], {
        "assertions": result.assertions,
        "passed": result.passed,
        "failing": result.failing(),
        "game_hash": result.game_hash,
        "grid_hash": result.grid_hash,
    }


def cmd_sweep(args) -> int:
    t0 = time.time()
    game, grid, config_hash, grid_hash = _read_config(args.config)
    grid = _apply_grid_flag(grid, args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    study = args.study

    outputs: list = []
    report: dict
    if study == "zero_sum":
        rep = zero_sum_report(game, grid)
        csv_path = out / "sweep.csv"
        lines = [
            "param,value,metric,metric_value",
            f"study,zero_sum,max_aggregate_speed,{rep.max_aggregate_speed:.17g}",
            f"study,zero_sum,max_value_sum,{rep.max_value_sum:.17g}",
            f"study,zero_sum,max_payoff_sum,{rep.max_payoff_sum:.17g}",
        ]
        csv_path.write_text("\n".join(lines) + "\n")
        outputs.append(csv_path.name)
        report = {
            "assertions": {"offsetting_payoffs": rep.offsetting,
                           "aggregate_speed_cancels": rep.cancelled},
            "passed": rep.passed,
            "failing": [k for k, ok in
                        {"offsetting_payoffs": rep.offsetting,
                         "aggregate_speed_cancels": rep.cancelled}.items() if not ok],
        }
    elif study in ("predator", "split"):
        ns = _csv_list(args.n_list, int) if args.n_list else (1, 10, 100)
        h = game.players[0].endowment
        fn = predator_sweep if study == "predator" else split_sweep
        result = fn(h, ns, game, grid)
        outputs, report = _sweep_outputs(result, out)
    elif study == "spread":
        spreads = _csv_list(args.s_list, float) if args.s_list else (0.0, 0.001, 0.002, 0.003, 0.004)
        sharpness = game.cost.sharpness if isinstance(game.cost, SmoothedSpreadCost) else 100.0
        result = spread_sweep(game, spreads, sharpness, grid)
        outputs, report = _sweep_outputs(result, out)
    elif study == "cara2":
        alphas = [pl.utility.alpha for pl in game.players if isinstance(pl.utility, CARA)]
        if len(alphas) != 2:
            raise MethodMismatch("cara2 study needs a config with exactly two CARA players")
        p0 = game.market.p0
        result = cara_two_player_study(alphas, game, grid, band=(p0 - 5.0, p0 + 5.0))
        outputs, report = _sweep_outputs(result, out)
    elif study.startswith("figure:"):
        fig = study.split(":", 1)[1]
        data = figure_grids(fig, grid)
        report = {"assertions": {}, "passed": True, "failing": []}
        if isinstance(data, SweepResult):
            outputs, report = _sweep_outputs(data, out, prefix=fig)
        elif isinstance(data, dict) and all(isinstance(v, SweepResult) for v in data.values()):
            merged = {}
            for key, res in data.items():
                files, rep = _sweep_outputs(res, out, prefix=f"{fig}_{key}")
                outputs += files
                merged.update({f"{key}.{k}": v for k, v in rep["assertions"].items()})
            report = {"assertions": merged, "passed": all(merged.values()),
                      "failing": [k for k, ok in merged.items() if not ok]}
        else:
            for name in ("speed", "surplus"):
                arr = data[name]
                rows = np.empty((arr.size, 3))
                rows[:, 0] = np.repeat(data["times"], data["prices"].size)
                rows[:, 1] = np.tile(data["prices"], data["times"].size)
                rows[:, 2] = arr.reshape(-1)
                fpath = out / f"{fig}_{name}.csv"
                np.savetxt(fpath, rows, fmt="%.17g", delimiter=",",
                           header=f"t,p,{name}", comments="")
                outputs.append(fpath.name)
    else:
        raise ConfigError(f"unknown study '{study}'")

    report_path = out / "assertions.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    outputs.append(report_path.name)
    write_manifest(
        _manifest(f"sweep --study {study}", config_hash, grid_hash, None, t0, outputs),
        out / "manifest.json",
    )
    if not report["passed"]:
        print(f"sweep assertions failed: {', '.join(report['failing'])}", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"sweep '{study}' passed; outputs in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="illiq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", description="validate a config and certify its cost")
    p_check.add_argument("--config", required=True)

    p_solve = sub.add_parser("solve", description="solve a game and write CSV grids")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--method", choices=("fd", "picard", "closed"), default="fd")
    p_solve.add_argument("--grid", default=None, metavar="np,nt")

    p_sim = sub.add_parser("simulate", description="Monte-Carlo paths under a solved strategy")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--solution", required=True)
    p_sim.add_argument("--paths", type=int, default=10000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", description="run a scripted study")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--study", required=True)
    p_sweep.add_argument("--N", dest="n_list", default=None, metavar="CSVLIST")
    p_sweep.add_argument("--s", dest="s_list", default=None, metavar="CSVLIST")
    p_sweep.add_argument("--grid", default=None, metavar="np,nt")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        worker_cap()  # validate the env var early
        if args.command == "check":
            return cmd_check(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_sweep(args)
    except FileNotFoundError as err:
        print(f"error: missing file: {err}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except CertificationError as err:
        print(f"certification failure: {err}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except MethodMismatch as err:
        print(f"method/game mismatch: {err}", file=sys.stderr)
        return EXIT_METHOD
    except HashMismatch as err:
        print(f"hash mismatch: {err}", file=sys.stderr)
        return EXIT_HASH
    except (SolverError, SpeedSolverError, SimulationError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
