"""Leader-follower fusion over mobile agents in disk regions.

``n`` mobile sensors and ``s`` fixed-state mobile anchors each wander
inside their own disk.  Per step: every agent takes an independent random
step (uniform over the disk of radius ``sigma`` times its region radius,
then projected back into the region); one uniformly chosen sensor fuses its
neighborhood (nodes within communication radius); states advance by
``x <- P x + B u``.  The fusion rule realizes exactly the admissible update
forms:

* no neighbors: keep the own value (identity row);
* sensor neighbors only: equal weights over self and the sensor neighbors,
  feasible only while the neighborhood stays within ``floor(1/beta1)``;
* at least one anchor: total anchor weight ``max(alpha * a, 1 - beta2)``
  split equally over the ``a`` anchors heard, remainder split equally over
  self and the sensor neighbors.

Every full row therefore sums to one, which makes each completed slice
satisfy ``M_t 1 + N_t 1 = 1`` for the accumulated input matrix ``N_t`` and
drives all sensor states to the anchor value.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, InfeasibleWeights
from .matrix_core import Params, SystemMatrix
from .slice_engine import Slice, SliceEvent, SliceState, push

__all__ = [
    "World",
    "UpdateKind",
    "StepRecord",
    "LeaderFollowerConfig",
    "SimResult",
    "demo_world",
    "resolve_comm_radius",
    "step_motion",
    "neighbors",
    "build_update",
    "lf_step",
    "run_leader_follower",
    "steady_state_check",
    "write_trajectory_csv",
    "write_positions_csv",
]


@dataclass(frozen=True)
class World:
    """Snapshot of the mobile network.

    Sensors come first everywhere; anchors occupy indices n..n+s-1 in
    stacked arrays.  ``k`` counts completed steps and seeds the per-step
    randomness streams, so a snapshot fully determines the next motion and
    updater draw.  Treat instances (arrays included) as immutable.
    """

    sensor_pos: np.ndarray
    sensor_center: np.ndarray
    sensor_radius: np.ndarray
    x: np.ndarray
    anchor_pos: np.ndarray
    anchor_center: np.ndarray
    anchor_radius: np.ndarray
    u: np.ndarray
    comm_radius: float
    sigma: float = 0.2
    rng_seed: int = 0
    k: int = 0
    update_prob: float = 1.0

    def __post_init__(self) -> None:
        for name in (
            "sensor_pos",
            "sensor_center",
            "sensor_radius",
            "x",
            "anchor_pos",
            "anchor_center",
            "anchor_radius",
            "u",
        ):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n, s = self.n, self.s
        if self.sensor_pos.shape != (n, 2) or self.sensor_center.shape != (n, 2):
            raise DimensionMismatch("sensor position arrays must be (n, 2)")
        if self.anchor_pos.shape != (s, 2) or self.anchor_center.shape != (s, 2):
            raise DimensionMismatch("anchor position arrays must be (s, 2)")
        if self.x.shape != (n,) or self.sensor_radius.shape != (n,):
            raise DimensionMismatch("sensor state/radius arrays must be (n,)")
        if self.u.shape != (s,) or self.anchor_radius.shape != (s,):
            raise DimensionMismatch("anchor state/radius arrays must be (s,)")
        if self.rng_seed < 0 or self.k < 0:
            raise ConfigError("rng_seed and k must be non-negative")
        if not 0.0 <= self.update_prob <= 1.0:
            raise ConfigError("update_prob must lie in [0, 1]")
        for pos, center, radius, what in (
            (self.sensor_pos, self.sensor_center, self.sensor_radius, "sensor"),
            (self.anchor_pos, self.anchor_center, self.anchor_radius, "anchor"),
        ):
            if pos.size == 0:
                continue
            dist = np.linalg.norm(pos - center, axis=1)
            if np.any(dist > radius + 1e-9):
                off = int(np.argmax(dist - radius))
                raise ConfigError(
                    f"{what} {off} starts outside its region "
                    f"(distance {dist[off]!r} > radius {radius[off]!r})"
                )

    @property
    def n(self) -> int:
        return self.x.shape[0] if np.ndim(self.x) else 0

    @property
    def s(self) -> int:
        return self.u.shape[0] if np.ndim(self.u) else 0

    @property
    def positions(self) -> np.ndarray:
        return np.vstack([self.sensor_pos, self.anchor_pos])


class UpdateKind(enum.Enum):
    NO_NEIGHBORS = "no_neighbors"
    STOCHASTIC_UPDATE = "stochastic_update"
    SUB_STOCHASTIC_UPDATE = "sub_stochastic_update"
    IDLE = "idle"


@dataclass
class StepRecord:
    """What happened at one step; ``states_after`` is filled by the runner
    once the state advance is applied."""

    k: int
    updating_sensor: int | None
    update_kind: UpdateKind
    matrix: SystemMatrix
    states_after: np.ndarray | None = None


def demo_world(
    n: int = 4,
    u: float = 3.0,
    seed: int = 0,
    sigma: float = 0.2,
    comm_radius: float | str = "1.5*innermost",
    x0: Sequence[float] | None = None,
    update_prob: float = 1.0,
) -> World:
    """The reference layout: one anchor disk at the origin (radius 1), an
    inner sensor pair overlapping it, and further pairs chained outward so
    only the inner pair can ever hear the anchor (outer disks stay more
    than the communication radius away from the anchor disk)."""
    if n < 1:
        raise ConfigError("need at least one sensor")
    anchor_center = np.array([[0.0, 0.0]])
    anchor_radius = np.array([1.0])
    centers = np.zeros((n, 2))
    radii = np.full(n, 1.2)
    for i in range(n):
        side = 1.0 if i % 2 == 0 else -1.0
        ring = i // 2
        centers[i, 0] = side * (1.9 + 2.0 * ring)
    radius = resolve_comm_radius(
        comm_radius, np.concatenate([radii, anchor_radius])
    )
    return World(
        sensor_pos=centers.copy(),
        sensor_center=centers,
        sensor_radius=radii,
        x=np.zeros(n) if x0 is None else np.asarray(x0, dtype=float),
        anchor_pos=anchor_center.copy(),
        anchor_center=anchor_center,
        anchor_radius=anchor_radius,
        u=np.array([float(u)]),
        comm_radius=radius,
        sigma=sigma,
        rng_seed=seed,
        update_prob=update_prob,
    )


def resolve_comm_radius(
    value: float | str, region_radii: np.ndarray | Sequence[float]
) -> float:
    """Accept an absolute radius or the form ``'<factor>*innermost'``,
    meaning that multiple of the smallest region radius."""
    if isinstance(value, str):
        text = value.replace("x", "*").strip()
        if not text.endswith("*innermost"):
            raise ConfigError(
                f"comm_radius string must look like '1.5*innermost', got {value!r}"
            )
        try:
            factor = float(text[: -len("*innermost")])
        except ValueError as exc:
            raise ConfigError(f"bad comm_radius factor in {value!r}") from exc
        return factor * float(np.min(np.asarray(region_radii, dtype=float)))
    radius = float(value)
    if radius < 0:
        raise ConfigError(f"comm_radius must be non-negative, got {radius}")
    return radius


def _step_rng(world: World, stream: int) -> np.random.Generator:
    return np.random.default_rng([world.rng_seed, world.k, stream])


def step_motion(world: World) -> World:
    """Move every agent one random step inside its region.

    Displacements are uniform over the disk of radius ``sigma * region
    radius``; any move that would exit the region is projected back onto
    it.  Deterministic given ``rng_seed`` and ``k``: the draw comes from a
    stream derived from both, not from call history.
    """
    rng = _step_rng(world, 0)
    total = world.n + world.s
    angles = rng.uniform(0.0, 2.0 * np.pi, size=total)
    radii_frac = np.sqrt(rng.uniform(0.0, 1.0, size=total))
    region_radii = np.concatenate([world.sensor_radius, world.anchor_radius])
    step_len = world.sigma * region_radii * radii_frac
    disp = np.column_stack([np.cos(angles), np.sin(angles)]) * step_len[:, None]
    centers = np.vstack([world.sensor_center, world.anchor_center])
    new_pos = world.positions + disp
    offset = new_pos - centers
    dist = np.linalg.norm(offset, axis=1)
    over = dist > region_radii
    if np.any(over):
        scale = region_radii[over] / dist[over]
        new_pos[over] = centers[over] + offset[over] * scale[:, None]
    return replace(
        world,
        sensor_pos=new_pos[: world.n],
        anchor_pos=new_pos[world.n :],
    )


def neighbors(world: World) -> np.ndarray:
    """Symmetric boolean adjacency over all nodes (sensors then anchors):
    within communication radius, no self edges."""
    pos = world.positions
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    adj = dist <= world.comm_radius
    np.fill_diagonal(adj, False)
    return adj


def build_update(
    world: World, params: Params
) -> tuple[SystemMatrix, StepRecord]:
    """Draw the updating sensor and build its fusion row.

    Raises :class:`InfeasibleWeights` when an anchor-free neighborhood is
    too large for the weight floor (more than ``floor(1/beta1)`` members)
    or when the anchor floor cannot fit inside one unit of row mass.
    """
    n, s = world.n, world.s
    rng = _step_rng(world, 1)
    if world.update_prob < 1.0 and rng.uniform() >= world.update_prob:
        m = SystemMatrix(np.eye(n), np.zeros((n, s)), updated_row=None)
        return m, StepRecord(world.k, None, UpdateKind.IDLE, m)
    i = int(rng.integers(n))
    adj = neighbors(world)
    sensor_nbrs = np.nonzero(adj[i, :n])[0]
    anchor_nbrs = np.nonzero(adj[i, n:])[0]
    if sensor_nbrs.size == 0 and anchor_nbrs.size == 0:
        m = SystemMatrix(np.eye(n), np.zeros((n, s)), updated_row=None)
        return m, StepRecord(world.k, i, UpdateKind.NO_NEIGHBORS, m)

    p = np.eye(n)
    b = np.zeros((n, s))
    group = np.concatenate(([i], sensor_nbrs))  # self plus sensor neighbors
    if anchor_nbrs.size == 0:
        if group.size > int(np.floor(1.0 / params.beta1)):
            raise InfeasibleWeights(
                f"{group.size} sensors share the row but only "
                f"floor(1/beta1) = {int(np.floor(1.0 / params.beta1))} "
                f"weights of at least beta1 = {params.beta1} fit in one row"
            )
        p[i] = 0.0
        p[i, group] = 1.0 / group.size
        m = SystemMatrix(p, b, updated_row=i)
        return m, StepRecord(world.k, i, UpdateKind.STOCHASTIC_UPDATE, m)

    a = anchor_nbrs.size
    anchor_total = max(params.alpha * a, 1.0 - params.beta2)
    if anchor_total > 1.0:
        raise InfeasibleWeights(
            f"cannot give each of {a} anchors weight alpha = {params.alpha} "
            "within one unit of row mass"
        )
    p[i] = 0.0
    p[i, group] = (1.0 - anchor_total) / group.size
    b[i, anchor_nbrs] = anchor_total / a
    m = SystemMatrix(p, b, updated_row=i)
    return m, StepRecord(world.k, i, UpdateKind.SUB_STOCHASTIC_UPDATE, m)


def lf_step(
    x: np.ndarray, m: SystemMatrix, u: np.ndarray | float
) -> np.ndarray:
    """Advance the sensor states one step: ``P x + B u``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n,):
        raise DimensionMismatch(f"state must be ({m.n},), got {x.shape}")
    u_vec = np.asarray(u, dtype=float)
    if u_vec.ndim == 0:
        u_vec = np.full(m.s, float(u_vec))
    if u_vec.shape != (m.s,):
        raise DimensionMismatch(f"anchor state must be ({m.s},), got {u_vec.shape}")
    return m.p @ x + m.b @ u_vec


@dataclass(frozen=True)
class LeaderFollowerConfig:
    """Everything one simulation run needs.

    ``stop_when_error_below``, when set (and all anchors share one value),
    ends the run early once every sensor is within that distance of the
    anchor value; the step count actually executed is reported back.
    """

    world: World
    params: Params
    horizon: int
    strict: bool = True
    record_steps: bool = False
    record_positions: bool = False
    stop_when_error_below: float | None = None


@dataclass
class SimResult:
    """Run outputs: per-step states (row 0 is the initial state), completed
    slices with their accumulated input vectors, the engine event log, and
    optional step records / position history."""

    states: np.ndarray
    slices: list[Slice]
    slice_inputs: list[np.ndarray]
    events: list[SliceEvent]
    records: list[StepRecord]
    positions: np.ndarray | None
    world: World
    steps_run: int


def run_leader_follower(config: LeaderFollowerConfig) -> SimResult:
    """Run the full loop: motion, update construction, state advance, slice
    tracking, and per-slice input accumulation ``N <- P N + B``."""
    world = config.world
    params = config.params
    n, s = world.n, world.s
    states = np.empty((config.horizon + 1, n))
    states[0] = world.x
    positions = (
        np.empty((config.horizon + 1, n + s, 2))
        if config.record_positions
        else None
    )
    if positions is not None:
        positions[0] = world.positions
    records: list[StepRecord] = []
    slices: list[Slice] = []
    slice_inputs: list[np.ndarray] = []
    events: list[SliceEvent] = []
    state = SliceState(n=n)
    n_accum = np.zeros((n, s))
    target = None
    if config.stop_when_error_below is not None:
        if s == 0 or np.ptp(world.u) > 0:
            raise ConfigError(
                "early stopping needs a single shared anchor value"
            )
        target = float(world.u[0])
    steps_run = 0
    for k in range(config.horizon):
        world = step_motion(world)
        m, rec = build_update(world, params)
        new_x = lf_step(world.x, m, world.u)
        world = replace(world, x=new_x, k=world.k + 1)
        state, evs = push(state, m, params, strict=config.strict, k=k)
        n_accum = m.p @ n_accum + m.b
        for ev in evs:
            if ev.slice is not None:
                slices.append(ev.slice)
                slice_inputs.append(n_accum.copy())
                n_accum = np.zeros((n, s))
        events.extend(evs)
        states[k + 1] = new_x
        if positions is not None:
            positions[k + 1] = world.positions
        if config.record_steps:
            rec.states_after = new_x
            records.append(rec)
        steps_run = k + 1
        if target is not None and np.max(np.abs(new_x - target)) <= (
            config.stop_when_error_below
        ):
            break
    states = states[: steps_run + 1]
    if positions is not None:
        positions = positions[: steps_run + 1]
    return SimResult(
        states=states,
        slices=slices,
        slice_inputs=slice_inputs,
        events=events,
        records=records,
        positions=positions,
        world=world,
        steps_run=steps_run,
    )


class SteadyStateCheck(NamedTuple):
    ok: bool
    residual: float


def steady_state_check(
    m_t: np.ndarray, n_t: np.ndarray, tol: float = 1e-10
) -> SteadyStateCheck:
    """Verify that a slice product and its accumulated input matrix satisfy
    ``M 1 + N 1 = 1`` row by row, the identity that pins the fixed point at
    the anchor value."""
    m_t = np.asarray(m_t, dtype=float)
    n_t = np.asarray(n_t, dtype=float)
    row_total = m_t.sum(axis=1) + n_t.reshape(m_t.shape[0], -1).sum(axis=1)
    residual = float(np.max(np.abs(row_total - 1.0)))
    return SteadyStateCheck(residual <= tol, residual)


def write_trajectory_csv(states: np.ndarray, path: str | Path) -> None:
    """CSV ``k,sensor,state`` with k = 0 the initial state."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "sensor", "state"])
        for k, row in enumerate(np.asarray(states)):
            for i, v in enumerate(row):
                writer.writerow([k, i, f"{v:.17g}"])


def write_positions_csv(positions: np.ndarray, path: str | Path) -> None:
    """CSV ``k,node,x,y``; nodes are sensors 0..n-1 then anchors."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "node", "x", "y"])
        for k, frame in enumerate(np.asarray(positions)):
            for node, (px, py) in enumerate(frame):
                writer.writerow([k, node, f"{px:.17g}", f"{py:.17g}"])
