"""Spring-coupled particles in a reflecting box, with periodic random rewiring.

Forces are zero-rest-length Hooke springs between connected particles,
F_i = -k * sum_j A_ij (x_i - x_j), unit mass, kick-drift-kick leapfrog.
Walls reflect the position and negate the velocity component.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .core import ClipBatch, ConfigError, NumericalError


@dataclass(frozen=True)
class SimSchedule:
    n: int = 20
    num_rewirings: int = 20
    frames_per_segment: int = 250
    num_runs: int = 10
    edge_prob: float = 0.2
    spring_k: float = 0.1
    dt: float = 0.001
    sample_every: int = 100
    box_half: float = 5.0
    init_pos: float = 1.0
    init_vel_std: float = 0.5
    length_unit: float = 30.0
    window: int = 10

    def __post_init__(self):
        for name in ("n", "num_rewirings", "frames_per_segment", "num_runs", "sample_every", "window"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.edge_prob < 1.0:
            raise ConfigError("edge_prob must lie in (0, 1)")
        if min(self.spring_k, self.dt, self.box_half, self.init_pos, self.length_unit) <= 0 or self.init_vel_std < 0:
            raise ConfigError("physical constants must be positive")
        if self.init_pos > self.box_half:
            raise ConfigError("init_pos must fit inside the box")

    @property
    def num_frames(self) -> int:
        return self.num_rewirings * self.frames_per_segment


@dataclass(frozen=True)
class SpringSystem:
    positions: np.ndarray
    velocities: np.ndarray
    adjacency: np.ndarray
    spring_k: float
    dt: float
    sample_every: int
    box_half: float
    edge_prob: float

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def sample_adjacency(n: int, edge_prob: float, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.random((n, n)) < edge_prob, k=1)
    return (upper | upper.T).astype(np.float64)


def init_system(config: SimSchedule, seed: int) -> tuple[SpringSystem, np.random.Generator]:
    rng = np.random.default_rng(seed)
    n = config.n
    pos = rng.uniform(-config.init_pos, config.init_pos, size=(n, 2))
    vel = rng.normal(0.0, config.init_vel_std, size=(n, 2))
    adj = sample_adjacency(n, config.edge_prob, rng)
    system = SpringSystem(pos, vel, adj, config.spring_k, config.dt, config.sample_every, config.box_half, config.edge_prob)
    return system, rng


def rewire(system: SpringSystem, rng: np.random.Generator) -> SpringSystem:
    return replace(system, adjacency=sample_adjacency(system.n, system.edge_prob, rng))


@njit(cache=True)
def _leapfrog(pos, vel, adj, k, dt, steps, box):
    n = pos.shape[0]
    force = np.zeros_like(pos)
    for _ in range(steps):
        for i in range(n):
            fx = 0.0
            fy = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    fx -= k * adj[i, j] * (pos[i, 0] - pos[j, 0])
                    fy -= k * adj[i, j] * (pos[i, 1] - pos[j, 1])
            force[i, 0] = fx
            force[i, 1] = fy
        for i in range(n):
            for c in range(2):
                vel[i, c] += 0.5 * dt * force[i, c]
                pos[i, c] += dt * vel[i, c]
                if pos[i, c] > box:
                    pos[i, c] = 2.0 * box - pos[i, c]
                    vel[i, c] = -vel[i, c]
                elif pos[i, c] < -box:
                    pos[i, c] = -2.0 * box - pos[i, c]
                    vel[i, c] = -vel[i, c]
        for i in range(n):
            fx = 0.0
            fy = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    fx -= k * adj[i, j] * (pos[i, 0] - pos[j, 0])
                    fy -= k * adj[i, j] * (pos[i, 1] - pos[j, 1])
            vel[i, 0] += 0.5 * dt * fx
            vel[i, 1] += 0.5 * dt * fy


def _advance(system: SpringSystem, steps: int) -> SpringSystem:
    pos = system.positions.copy()
    vel = system.velocities.copy()
    _leapfrog(pos, vel, system.adjacency, system.spring_k, system.dt, steps, system.box_half)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
        raise NumericalError(f"simulation blew up with dt={system.dt}")
    return replace(system, positions=pos, velocities=vel)


def step_integrate(system: SpringSystem) -> SpringSystem:
    """One leapfrog step."""
    return _advance(system, 1)


def energy(system: SpringSystem) -> float:
    kin = 0.5 * np.sum(system.velocities**2)
    diff = system.positions[:, None] - system.positions[None, :]
    pot = 0.25 * system.spring_k * np.sum(system.adjacency * np.sum(diff**2, axis=-1))
    return float(kin + pot)


@dataclass(frozen=True)
class SimRun:
    """Emitted frames of one run plus the adjacency of every segment."""

    frames: np.ndarray  # (F, N, 2), in output length units
    adjacencies: np.ndarray  # (num_rewirings, N, N)
    frames_per_segment: int

    def segment_of_frame(self, f: int) -> int:
        return min(f // self.frames_per_segment, len(self.adjacencies) - 1)


def simulate_run(config: SimSchedule, seed: int) -> SimRun:
    system, rng = init_system(config, seed)
    frames = np.empty((config.num_frames, config.n, 2))
    adjs = [system.adjacency]
    for f in range(config.num_frames):
        if f > 0 and f % config.frames_per_segment == 0:
            system = rewire(system, rng)
            adjs.append(system.adjacency)
        frames[f] = system.positions
        if f + 1 < config.num_frames:
            system = _advance(system, config.sample_every)
    return SimRun(frames * config.length_unit, np.stack(adjs), config.frames_per_segment)


def generate_stream(config: SimSchedule, seed: int, run: SimRun | None = None):
    """Yield (input clip, target clip, adjacency) windows advancing one frame per step.

    Window w reads frames [w, w+delta) and targets [w+delta, w+2*delta); the
    adjacency is the one active at frame w.
    """
    run = simulate_run(config, seed) if run is None else run
    delta = config.window
    clips = np.transpose(run.frames, (1, 0, 2))  # N, F, 2
    for w in range(run.frames.shape[0] - 2 * delta + 1):
        inp = ClipBatch(clips[:, w : w + delta], start_time=w)
        tgt = ClipBatch(clips[:, w + delta : w + 2 * delta], start_time=w + delta)
        yield inp, tgt, run.adjacencies[run.segment_of_frame(w)]


def stream_length(config: SimSchedule) -> int:
    return config.num_frames - (2 * config.window - 1)
