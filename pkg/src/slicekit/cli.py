"""Command-line front end: product studies, leader-follower runs, and
certification of recorded slice logs.

``slicekit products|lf|certify --config <path> [--seed S] [--out DIR]``

All outputs are CSV or plain text, written without timestamps so a fixed
seed reproduces byte-identical files.  Plots are emitted as gnuplot scripts
over the CSVs rather than rendered in-process, keeping the package free of
plotting dependencies.  Exit codes: 0 on success, 2 on configuration
errors, 3 when certification was requested but not achieved.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .certifier import (
    Certificate,
    certify_case1,
    certify_case2,
    search_case3,
    write_certificate,
    DEFAULT_GAMMA1_GRID,
    DEFAULT_GAMMA2_GRID,
)
from .ddf_sim import (
    LeaderFollowerConfig,
    World,
    demo_world,
    resolve_comm_radius,
    run_leader_follower,
    steady_state_check,
    write_positions_csv,
    write_trajectory_csv,
)
from .errors import ConfigError, SliceKitError
from .generators import random_product_sequence
from .matrix_core import Params, inf_norm, spectral_radius
from .slice_engine import run_sequence, write_event_log, write_slice_log

__all__ = ["ExperimentConfig", "cmd_products", "cmd_leader_follower", "cmd_certify", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CERTIFIED = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed configuration file plus command-line overrides."""

    mode: str
    raw: dict
    seed: int
    out_dir: Path
    params: Params

    @classmethod
    def load(
        cls,
        path: str | Path,
        mode: str,
        seed_override: int | None = None,
        out_override: str | None = None,
    ) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        file_mode = raw.get("mode")
        if file_mode is not None and file_mode != mode:
            raise ConfigError(
                f"config declares mode {file_mode!r} but the command is {mode!r}"
            )
        raw.setdefault("_config_dir", str(path.parent))
        seed = int(raw.get("seed", 0)) if seed_override is None else seed_override
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        out_dir = Path(
            out_override
            if out_override is not None
            else raw.get("out_dir", "out")
        )
        try:
            params = Params(
                beta1=float(raw.get("beta1", 0.05)),
                beta2=float(raw.get("beta2", 0.7)),
                alpha=float(raw.get("alpha", 0.1)),
                tol=float(raw.get("tol", 1e-12)),
            )
        except ValueError as exc:
            raise ConfigError(f"bad weight parameters: {exc}") from exc
        return cls(mode=mode, raw=raw, seed=seed, out_dir=out_dir, params=params)

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)


def _echo_config(config: ExperimentConfig) -> None:
    resolved = {
        k: v for k, v in config.raw.items() if not k.startswith("_")
    }
    resolved["mode"] = config.mode
    resolved["seed"] = config.seed
    resolved["out_dir"] = str(config.out_dir)
    (config.out_dir / "run_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n"
    )


def cmd_products(config: ExperimentConfig) -> int:
    """Generate a random product sequence, slice it, and log norms."""
    n = int(config.get("n", 4))
    horizon = int(config.get("horizon", 200))
    if n < 1 or horizon < 0:
        raise ConfigError(f"need n >= 1 and horizon >= 0, got n={n}, horizon={horizon}")
    strict = bool(config.get("strict", True))
    p_st = float(config.get("p_stochastic", 1.0 / 3.0))
    p_sub = float(config.get("p_substochastic", 1.0 / 3.0))
    p_id = float(config.get("p_identity", 1.0 / 3.0))
    matrices = random_product_sequence(
        n,
        config.params,
        horizon,
        rng=np.random.default_rng(config.seed),
        p_stochastic=p_st,
        p_substochastic=p_sub,
        p_identity=p_id,
    )
    slices, events, _ = run_sequence(matrices, config.params, strict=strict)

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    running = np.eye(n)
    with (out / "per_k.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "inf_norm", "spectral_radius"])
        for k, m in enumerate(matrices):
            running = m.p @ running
            writer.writerow(
                [
                    k,
                    f"{inf_norm(running):.17g}",
                    f"{spectral_radius(running):.17g}",
                ]
            )
    write_slice_log(slices, out / "slices.csv")
    write_event_log(events, out / "events.csv")
    cumulative = np.eye(n)
    with (out / "slice_boundaries.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "end_k", "length", "slice_norm", "cumulative_norm"]
        )
        for s in slices:
            cumulative = s.product @ cumulative
            writer.writerow(
                [
                    s.index,
                    s.end_k,
                    s.length,
                    f"{s.norm:.17g}",
                    f"{inf_norm(cumulative):.17g}",
                ]
            )
    (out / "plot_products.gp").write_text(_products_plot_script())
    _echo_config(config)
    print(
        f"products: {horizon} steps, {len(slices)} completed slice(s); "
        f"outputs in {out}"
    )
    return EXIT_OK


def _products_plot_script() -> str:
    return (
        'set datafile separator ","\n'
        "set key autotitle columnhead\n"
        "set terminal pngcairo size 1000,700\n"
        'set output "products_norms.png"\n'
        "set logscale y\n"
        'set xlabel "k"\n'
        'set ylabel "norm"\n'
        'plot "per_k.csv" using 1:2 with lines lw 2 title "inf-norm of running product", \\\n'
        '     "per_k.csv" using 1:3 with lines lw 2 title "spectral radius", \\\n'
        '     "slice_boundaries.csv" using 2:5 with points pt 7 ps 1.5 title "product at slice boundaries", \\\n'
        '     "slice_boundaries.csv" using 2:4 with points pt 6 title "per-slice norm"\n'
        "unset logscale y\n"
        'set output "slice_lengths.png"\n'
        'set ylabel "length"\n'
        'plot "slices.csv" using 1:4 with boxes title "slice length"\n'
    )


def _build_world(config: ExperimentConfig) -> World:
    n = int(config.get("n", 4))
    u = float(config.get("u", 3.0))
    sigma = float(config.get("sigma", 0.2))
    update_prob = float(config.get("update_prob", 1.0))
    comm = config.get("comm_radius", "1.5*innermost")
    x0 = config.get("x0")
    regions = config.get("regions")
    if regions is None:
        return demo_world(
            n=n,
            u=u,
            seed=config.seed,
            sigma=sigma,
            comm_radius=comm,
            x0=x0,
            update_prob=update_prob,
        )
    try:
        sensors = np.asarray(regions["sensors"], dtype=float)
        anchors = np.asarray(regions["anchors"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(
            "regions must hold 'sensors' and 'anchors' lists of [cx, cy, r]"
        ) from exc
    if sensors.ndim != 2 or sensors.shape[1] != 3 or sensors.shape[0] != n:
        raise ConfigError(f"regions.sensors must be {n} rows of [cx, cy, r]")
    if anchors.ndim != 2 or anchors.shape[1] != 3 or anchors.shape[0] < 1:
        raise ConfigError("regions.anchors must be rows of [cx, cy, r]")
    radii = np.concatenate([sensors[:, 2], anchors[:, 2]])
    return World(
        sensor_pos=sensors[:, :2].copy(),
        sensor_center=sensors[:, :2],
        sensor_radius=sensors[:, 2],
        x=np.zeros(n) if x0 is None else np.asarray(x0, dtype=float),
        anchor_pos=anchors[:, :2].copy(),
        anchor_center=anchors[:, :2],
        anchor_radius=anchors[:, 2],
        u=np.full(anchors.shape[0], u),
        comm_radius=resolve_comm_radius(comm, radii),
        sigma=sigma,
        rng_seed=config.seed,
        update_prob=update_prob,
    )


def cmd_leader_follower(config: ExperimentConfig) -> int:
    """Run the mobile fusion protocol and log states, positions, slices,
    and the per-slice steady-state identity residuals."""
    horizon = int(config.get("horizon", 200))
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    world = _build_world(config)
    run_cfg = LeaderFollowerConfig(
        world=world,
        params=config.params,
        horizon=horizon,
        strict=bool(config.get("strict", True)),
        record_positions=True,
    )
    result = run_leader_follower(run_cfg)

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(result.states, out / "trajectory.csv")
    if result.positions is not None:
        write_positions_csv(result.positions, out / "positions.csv")
    write_slice_log(result.slices, out / "slices.csv")
    write_event_log(result.events, out / "events.csv")
    with (out / "steady_state.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice_index", "residual", "ok"])
        for s, n_t in zip(result.slices, result.slice_inputs):
            check = steady_state_check(s.product, n_t)
            writer.writerow([s.index, f"{check.residual:.17g}", int(check.ok)])
    (out / "plot_states.gp").write_text(_states_plot_script(world))
    (out / "plot_trajectories.gp").write_text(_trajectories_plot_script(world))
    _echo_config(config)
    print(
        f"lf: {result.steps_run} steps, {len(result.slices)} completed "
        f"slice(s), final spread "
        f"{np.max(np.abs(result.states[-1] - world.u[0])):.3e}; outputs in {out}"
    )
    return EXIT_OK


def _states_plot_script(world: World) -> str:
    n = world.n
    u = float(world.u[0]) if world.s else 0.0
    return (
        'set datafile separator ","\n'
        "set key autotitle columnhead\n"
        "set terminal pngcairo size 1000,700\n"
        'set output "lf_states.png"\n'
        'set xlabel "k"\n'
        'set ylabel "state"\n'
        f"u = {u:.17g}\n"
        f"plot for [i=0:{n - 1}] \"trajectory.csv\" "
        'using 1:($2==i?$3:1/0) with lines lw 2 title sprintf("sensor %d", i), \\\n'
        "     u with lines dt 2 lc rgb \"black\" title \"anchor value\"\n"
    )


def _trajectories_plot_script(world: World) -> str:
    lines = [
        'set datafile separator ","',
        "set key autotitle columnhead",
        "set terminal pngcairo size 800,800",
        'set output "lf_trajectories.png"',
        "set size ratio -1",
        'set xlabel "x"',
        'set ylabel "y"',
    ]
    idx = 1
    for center, radius in zip(world.sensor_center, world.sensor_radius):
        lines.append(
            f"set object {idx} circle at {center[0]:.17g},{center[1]:.17g} "
            f"size {radius:.17g} fs empty border lc rgb \"gray\""
        )
        idx += 1
    for center, radius in zip(world.anchor_center, world.anchor_radius):
        lines.append(
            f"set object {idx} circle at {center[0]:.17g},{center[1]:.17g} "
            f"size {radius:.17g} fs empty border lc rgb \"red\""
        )
        idx += 1
    total = world.n + world.s
    lines.append(
        f"plot for [i=0:{total - 1}] \"positions.csv\" "
        "using ($2==i?$3:1/0):4 with lines title sprintf(\"node %d\", i)"
    )
    return "\n".join(lines) + "\n"


def cmd_certify(config: ExperimentConfig) -> int:
    """Certify a recorded slice log.

    Tries, in order: the uniform cap (only if ``case1_cap`` is configured),
    the capped-subfamily route (only if ``case2`` metadata is present), and
    the growth-cap grid search (always).  The first certifying case wins.
    """
    log_value = config.get("slice_log")
    if not log_value:
        raise ConfigError("certify needs 'slice_log' pointing at a slice CSV")
    log_path = Path(log_value)
    if not log_path.is_absolute():
        log_path = Path(config.get("_config_dir", ".")) / log_path
    if not log_path.exists():
        raise ConfigError(f"slice log {log_path} does not exist")
    from .slice_engine import read_slice_log

    records = read_slice_log(log_path)
    lengths = [rec["length"] for rec in records]

    attempts: list[Certificate] = []
    cert: Certificate | None = None

    if config.get("case1_cap") is not None:
        candidate = certify_case1(lengths, int(config.get("case1_cap")), config.params)
        attempts.append(candidate)
        if candidate.certified:
            cert = candidate
    if cert is None and config.get("case2") is not None:
        meta = config.get("case2")
        if not isinstance(meta, dict) or "cap" not in meta or "subset" not in meta:
            raise ConfigError("case2 metadata needs 'cap' and 'subset'")
        candidate = certify_case2(
            lengths,
            int(meta["cap"]),
            [int(t) for t in meta["subset"]],
            config.params,
            subset_declared_infinite=bool(meta.get("infinite_family", False)),
        )
        attempts.append(candidate)
        if candidate.certified:
            cert = candidate
    if cert is None:
        gamma1_grid = config.get("gamma1_grid", list(DEFAULT_GAMMA1_GRID))
        gamma2_grid = config.get("gamma2_grid", list(DEFAULT_GAMMA2_GRID))
        candidate = search_case3(
            lengths,
            config.params,
            gamma1_grid=[float(g) for g in gamma1_grid],
            gamma2_grid=[float(g) for g in gamma2_grid],
        )
        attempts.append(candidate)
        if candidate.certified:
            cert = candidate

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if cert is None:
        notes = [note for c in attempts for note in c.notes]
        cert = Certificate(
            verdict=attempts[-1].verdict,
            case_used=None,
            witnesses={},
            trace=None,
            horizon=len(lengths),
            notes=tuple(notes),
        )
    write_certificate(cert, out)
    _echo_config(config)
    case = cert.case_used.value if cert.case_used else "none"
    print(f"certify: verdict={cert.verdict.value} case={case}; outputs in {out}")
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicekit",
        description=(
            "Slice decomposition and stability certification for "
            "sub-stochastic update sequences, plus the mobile "
            "leader-follower fusion simulator."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("products", "random product study: norms, slices, logs"),
        ("lf", "leader-follower simulation run"),
        ("certify", "certify a recorded slice log"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.load(
            args.config, args.command, args.seed, args.out
        )
        if args.command == "products":
            return cmd_products(config)
        if args.command == "lf":
            return cmd_leader_follower(config)
        return cmd_certify(config)
    except SliceKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
