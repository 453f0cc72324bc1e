"""Analytic ground-truth physics for the three benchmark tasks and dataset
generation by forward simulation.

Tasks: particles joined pairwise by linear springs, by quartic ("non-linear")
springs, and point masses under mutual gravity. Physical constants default
to 1.0; masses default to 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import jax
import numpy as np

from .errors import ConfigurationError, ContractViolationError, SingularityError
from .lagrangian import (
    ParticleState,
    Trajectory,
    pair_indices,
    rollout,
)

TASKS = ("linear_spring", "nonlinear_spring", "gravity")
GRAVITY_DISTANCE_FLOOR = 1e-6


def _is_traced(x) -> bool:
    return isinstance(x, jax.core.Tracer)


@dataclass(frozen=True)
class SystemSpec:
    """Task identity plus physical constants for one system size."""

    kind: str
    n_particles: int
    k: float = 1.0
    q0: float = 1.0
    G: float = 1.0
    masses: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in TASKS:
            raise ConfigurationError(f"unknown task {self.kind!r}, expected one of {TASKS}")
        if self.n_particles < 2:
            raise ContractViolationError(f"need n_particles >= 2, got {self.n_particles}")
        if self.kind in ("linear_spring", "nonlinear_spring") and not self.k > 0:
            raise ContractViolationError(f"spring stiffness must be > 0, got {self.k}")
        if self.kind == "gravity" and not self.G > 0:
            raise ContractViolationError(f"G must be > 0, got {self.G}")
        if not self.q0 > 0:
            raise ContractViolationError(f"q0 must be > 0, got {self.q0}")
        masses = self.masses
        if masses is None:
            masses = np.ones(self.n_particles)
        masses = np.asarray(masses, dtype=np.float64)
        if masses.shape != (self.n_particles,) or not np.all(masses > 0):
            raise ContractViolationError("masses must be positive with one entry per particle")
        object.__setattr__(self, "masses", masses)

    @property
    def uniform_mass(self) -> float:
        if not np.all(self.masses == self.masses[0]):
            raise ContractViolationError("pairwise formulas here assume uniform masses")
        return float(self.masses[0])

    def with_particles(self, n: int) -> "SystemSpec":
        """Same physics at a different system size (uniform masses kept)."""
        return SystemSpec(self.kind, n, self.k, self.q0, self.G,
                          np.full(n, self.uniform_mass))


def default_spec(kind: str) -> SystemSpec:
    """Task defaults: 3 particles for springs, 4 for gravity; unit constants."""
    if kind not in TASKS:
        raise ConfigurationError(f"unknown task {kind!r}, expected one of {TASKS}")
    return SystemSpec(kind, 4 if kind == "gravity" else 3)


@dataclass(frozen=True)
class DatasetConfig:
    """Forward-simulation dataset shape; defaults mirror the benchmark setup."""

    n_trajectories: int = 100
    points_per_trajectory: int = 20
    dt: float = 0.01
    stride: int = 10
    seed: int = 100
    perturbation: float = 0.1

    def __post_init__(self):
        for name in ("n_trajectories", "points_per_trajectory", "stride", "seed"):
            if int(getattr(self, name)) < (0 if name == "seed" else 1):
                raise ContractViolationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.dt > 0:
            raise ContractViolationError(f"dt must be > 0, got {self.dt}")
        if not self.perturbation > 0:
            raise ContractViolationError(f"perturbation must be > 0, got {self.perturbation}")

    @property
    def recorded_dt(self) -> float:
        return self.dt * self.stride


# --- analytic pair laws -------------------------------------------------------


def analytic_pair_potential(spec: SystemSpec, r):
    """The task's pair potential at separation r (array-polymorphic)."""
    if not _is_traced(r):
        r_arr = np.asarray(r, dtype=np.float64)
        if spec.kind == "gravity":
            if np.any(r_arr < GRAVITY_DISTANCE_FLOOR):
                raise SingularityError(
                    f"gravitating pair at separation below {GRAVITY_DISTANCE_FLOOR}",
                    context="analytic_pair_potential",
                )
        elif np.any(r_arr < 0):
            raise ContractViolationError("separation must be >= 0")
    if spec.kind == "linear_spring":
        return 0.5 * spec.k * (r - spec.q0) ** 2
    if spec.kind == "nonlinear_spring":
        return 0.5 * spec.k * (r - spec.q0) ** 4
    m = spec.uniform_mass
    return -spec.G * m * m / r


def analytic_pair_force_magnitude(spec: SystemSpec, r):
    """Radial force -dV/dr (negative values attract)."""
    if not _is_traced(r):
        r_arr = np.asarray(r, dtype=np.float64)
        if spec.kind == "gravity" and np.any(r_arr < GRAVITY_DISTANCE_FLOOR):
            raise SingularityError(
                f"gravitating pair at separation below {GRAVITY_DISTANCE_FLOOR}",
                context="analytic_pair_force_magnitude",
            )
    if spec.kind == "linear_spring":
        return -spec.k * (r - spec.q0)
    if spec.kind == "nonlinear_spring":
        return -2.0 * spec.k * (r - spec.q0) ** 3
    m = spec.uniform_mass
    return -spec.G * m * m / (r * r)


def analytic_potential_from_positions(spec: SystemSpec, positions):
    """Total analytic potential; traceable for Euler-Lagrange cross-checks."""
    iu, ju = pair_indices(positions.shape[0])
    d = positions[iu] - positions[ju]
    r = (d * d).sum(axis=-1) ** 0.5
    per_pair = analytic_pair_potential(spec, r)
    return per_pair.sum()


def analytic_lagrangian_fn(spec: SystemSpec):
    """L(q, qdot) for the analytic system, usable with el_acceleration_general."""
    masses = spec.masses

    def lagrangian(q, v):
        kinetic = (0.5 * masses * (v * v).sum(axis=-1)).sum()
        return kinetic - analytic_potential_from_positions(spec, q)

    return lagrangian


def analytic_accelerations(spec: SystemSpec, state: ParticleState) -> np.ndarray:
    """Per-particle acceleration from the summed pair forces."""
    if state.n_particles != spec.n_particles:
        raise ContractViolationError(
            f"state has {state.n_particles} particles, spec expects {spec.n_particles}"
        )
    q = state.positions
    iu, ju = pair_indices(state.n_particles)
    d = q[iu] - q[ju]
    r = np.sqrt((d * d).sum(axis=-1))
    if spec.kind == "gravity":
        if np.any(r < GRAVITY_DISTANCE_FLOOR):
            raise SingularityError("coincident gravitating particles",
                                   context="analytic_accelerations")
        mm = spec.masses[iu] * spec.masses[ju]
        fmag = -spec.G * mm / (r * r)
    else:
        fmag = analytic_pair_force_magnitude(spec, r)
    with np.errstate(invalid="ignore"):
        unit = np.where(r[:, None] > 1e-12, d / np.where(r == 0.0, 1.0, r)[:, None], 0.0)
    fvec = fmag[:, None] * unit
    forces = np.zeros_like(q)
    np.add.at(forces, iu, fvec)
    np.add.at(forces, ju, -fvec)
    return forces / spec.masses[:, None]


def analytic_acceleration_fn(spec: SystemSpec):
    def accel(state: ParticleState) -> np.ndarray:
        return analytic_accelerations(spec, state)
    return accel


# --- benchmark initial conditions ----------------------------------------------

_SPRING_POSITIONS = np.array([
    [0.486657678894505, 0.755041888583519, 0.0],
    [-0.681737994414464, 0.293660233197210, 0.0],
    [-0.022596327468640, -0.612645601255358, 0.0],
])
_SPRING_VELOCITIES = np.array([
    [-0.182709864466916, 0.363013287999004, 0.0],
    [-0.579074922540872, -0.748157481446087, 0.0],
    [0.761784787007641, 0.385144193447218, 0.0],
])
_GRAVITY_POSITIONS = np.array([
    [1.0, 0.0, 0.0],
    [9.0, 0.0, 0.0],
    [11.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
])
_GRAVITY_VELOCITIES = np.array([
    [0.0, 0.05, 0.0],
    [0.0, -0.05, 0.0],
    [0.0, 0.65, 0.0],
    [0.0, -0.65, 0.0],
])


def initial_conditions(task: str) -> ParticleState:
    """The benchmark starting configuration: 3 particles for both spring
    tasks (identical matrices), 4 for gravity; all masses 1.0."""
    if task in ("linear_spring", "nonlinear_spring"):
        return ParticleState(_SPRING_POSITIONS.copy(), _SPRING_VELOCITIES.copy(), np.ones(3))
    if task == "gravity":
        return ParticleState(_GRAVITY_POSITIONS.copy(), _GRAVITY_VELOCITIES.copy(), np.ones(4))
    raise ConfigurationError(f"unknown task {task!r}, expected one of {TASKS}")


def is_planar(state: ParticleState) -> bool:
    return bool(np.all(state.positions[:, 2] == 0.0) and np.all(state.velocities[:, 2] == 0.0))


def perturb_initial_conditions(base: ParticleState, seed: int,
                               magnitude: float = 0.1) -> ParticleState:
    """Seeded uniform noise in [-magnitude, magnitude] on every position and
    velocity component; planar states keep z exactly 0."""
    if not magnitude > 0:
        raise ContractViolationError(f"magnitude must be > 0, got {magnitude}")
    rng = np.random.default_rng(seed)
    n = base.n_particles
    dq = rng.uniform(-magnitude, magnitude, size=(n, 3))
    dv = rng.uniform(-magnitude, magnitude, size=(n, 3))
    if is_planar(base):
        dq[:, 2] = 0.0
        dv[:, 2] = 0.0
    return ParticleState(base.positions + dq, base.velocities + dv, base.masses)


# --- dataset generation ----------------------------------------------------------


class DatasetResult(NamedTuple):
    """Generated trajectories with the seed bookkeeping the manifest records."""

    trajectories: list
    seeds: list
    resampled: list  # (failed_seed, replacement_seed) pairs


def generate_dataset(spec: SystemSpec, config: DatasetConfig) -> DatasetResult:
    """n_trajectories forward simulations from perturbed starts.

    Trajectory t perturbs with seed config.seed + t. A singular trajectory
    (gravity close encounter) is skipped and resampled with a fresh seed
    drawn past the nominal range; every swap lands in ``resampled``.
    """
    base = initial_conditions(spec.kind)
    if base.n_particles != spec.n_particles:
        base = scaled_initial_conditions(spec.kind, spec.n_particles)
    accel = analytic_acceleration_fn(spec)
    trajectories, seeds, resampled = [], [], []
    retry = 0
    for t in range(config.n_trajectories):
        seed = config.seed + t
        while True:
            try:
                start = perturb_initial_conditions(base, seed, config.perturbation)
                traj = rollout(accel, start, config.dt, config.stride,
                               config.points_per_trajectory)
                break
            except SingularityError:
                replacement = config.seed + config.n_trajectories + retry
                retry += 1
                resampled.append((seed, replacement))
                seed = replacement
        trajectories.append(traj)
        seeds.append(seed)
    return DatasetResult(trajectories, seeds, resampled)


def sample_acceleration_dataset(spec: SystemSpec, n_samples: int = 10000,
                                seed: int = 100,
                                config: DatasetConfig | None = None) -> list:
    """(q, qdot, qddot) tuples drawn from forward simulations with perturbed
    starts; accelerations are the analytic ground truth at each record."""
    if n_samples < 1:
        raise ContractViolationError(f"n_samples must be >= 1, got {n_samples}")
    config = config or DatasetConfig(seed=seed)
    base = initial_conditions(spec.kind)
    accel = analytic_acceleration_fn(spec)
    samples = []
    t = 0
    retry = 0
    while len(samples) < n_samples:
        traj_seed = seed + t
        t += 1
        try:
            start = perturb_initial_conditions(base, traj_seed, config.perturbation)
            traj = rollout(accel, start, config.dt, config.stride,
                           config.points_per_trajectory)
        except SingularityError:
            retry += 1
            if retry > 10 * max(n_samples, 100):
                raise
            continue
        for state in traj.states:
            samples.append((state.positions, state.velocities,
                            analytic_accelerations(spec, state)))
            if len(samples) == n_samples:
                break
    return samples


# --- scaled configurations for unseen system sizes --------------------------------


def _relaxed_spring_positions(spec: SystemSpec) -> np.ndarray:
    """Near-equilibrium particle cloud for all-pairs springs, found by
    deterministic gradient descent from a seeded 3D configuration."""
    import jax

    n = spec.n_particles
    rng = np.random.default_rng(n)
    q = rng.normal(size=(n, 3)) * 0.6 * spec.q0
    grad_fn = jax.jit(jax.grad(lambda qq: analytic_potential_from_positions(spec, qq)))
    for _ in range(4000):
        q = q - 0.05 * np.asarray(grad_fn(q))
    return q - q.mean(axis=0)


def scaled_initial_conditions(task: str, n_particles: int) -> ParticleState:
    """Deterministic base configuration for a system size other than the
    benchmark one, placed so pair distances stay inside the distance range
    the benchmark dynamics explore.

    Springs: a relaxed near-equilibrium 3D cluster (pair distances near the
    rest length), at rest. Gravity: internally-circular binaries (separation
    2, the benchmark binary size) whose centers sit on a ring sized so cross
    distances match the benchmark separations, orbiting the collective
    center.
    """
    if task in ("linear_spring", "nonlinear_spring"):
        spec = SystemSpec(task, n_particles)
        q = _relaxed_spring_positions(spec)
        return ParticleState(q, np.zeros((n_particles, 3)), np.ones(n_particles))
    if task != "gravity":
        raise ConfigurationError(f"unknown task {task!r}, expected one of {TASKS}")
    if n_particles % 2:
        raise ConfigurationError("scaled gravity configurations pair particles into "
                                 f"binaries; need an even count, got {n_particles}")
    n_binaries = n_particles // 2
    if n_binaries == 1:
        q = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        v = np.array([[0.0, 0.5, 0.0], [0.0, -0.5, 0.0]])
        return ParticleState(q, v, np.ones(2))
    center_radius = 4.5 / np.sin(np.pi / n_binaries)  # adjacent centers 9 apart
    angles = 2.0 * np.pi * np.arange(n_binaries) / n_binaries
    centers = np.stack([center_radius * np.cos(angles),
                        center_radius * np.sin(angles),
                        np.zeros(n_binaries)], axis=1)
    # net inward pull on a binary (mass 2) from the others, for the
    # near-circular collective orbit speed
    ring_accel = sum(
        2.0 * np.sin(np.pi * k / n_binaries)
        / (2.0 * center_radius * np.sin(np.pi * k / n_binaries)) ** 2
        for k in range(1, n_binaries)
    )
    center_speed = np.sqrt(ring_accel * center_radius)
    tangents = np.stack([-np.sin(angles), np.cos(angles), np.zeros(n_binaries)], axis=1)
    # internal circular orbit at separation 2: relative speed sqrt(G(2m)/2) = 1
    positions, velocities = [], []
    for b in range(n_binaries):
        offset = tangents[b]  # unit vector, in-plane
        inward = -centers[b] / np.linalg.norm(centers[b])
        positions.append(centers[b] + offset)
        positions.append(centers[b] - offset)
        velocities.append(center_speed * tangents[b] + 0.5 * inward)
        velocities.append(center_speed * tangents[b] - 0.5 * inward)
    return ParticleState(np.array(positions), np.array(velocities), np.ones(n_particles))
