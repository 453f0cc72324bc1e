"""Core mechanics: particle states, pairwise features, Lagrangian assembly,
Euler-Lagrange accelerations, velocity-Verlet integration, conserved
quantities, rigid transforms, and trajectory persistence.

Coordinates are always 3D; planar systems are embedded at z = 0. State
arithmetic is written with plain array operators so the same code runs on
numpy arrays (data generation, evaluation) and on JAX tracers (inside
training's differentiable rollouts).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import ContractViolationError, NumericalFailureError, SingularityError
from .nn import MlpParams, mlp_forward


def _is_traced(*values) -> bool:
    return any(isinstance(v, jax.core.Tracer) for v in values)


# --- domain types -----------------------------------------------------------


@jax.tree_util.register_pytree_node_class
@dataclass(frozen=True)
class ParticleState:
    """Positions (N,3), velocities (N,3) and masses (N,) at one instant."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if _is_traced(self.positions, self.velocities, self.masses):
            return
        q = np.asarray(self.positions, dtype=np.float64)
        v = np.asarray(self.velocities, dtype=np.float64)
        m = np.asarray(self.masses, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != 3 or q.shape[0] < 1:
            raise ContractViolationError(f"positions must be (N,3) with N>=1, got {q.shape}")
        if v.shape != q.shape:
            raise ContractViolationError(
                f"velocities shape {v.shape} does not match positions {q.shape}"
            )
        if m.shape != (q.shape[0],):
            raise ContractViolationError(f"masses must be ({q.shape[0]},), got {m.shape}")
        if not np.all(m > 0):
            raise ContractViolationError("masses must be strictly positive")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v)) and np.all(np.isfinite(m))):
            raise NumericalFailureError("non-finite entries in particle state",
                                        context="ParticleState")
        object.__setattr__(self, "positions", q)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "masses", m)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    def tree_flatten(self):
        return (self.positions, self.velocities, self.masses), None

    @classmethod
    def tree_unflatten(cls, aux, children):
        obj = object.__new__(cls)
        object.__setattr__(obj, "positions", children[0])
        object.__setattr__(obj, "velocities", children[1])
        object.__setattr__(obj, "masses", children[2])
        return obj


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered recorded states, ``recorded_dt`` apart; the integrator
    took ``substeps`` steps of recorded_dt/substeps between records."""

    states: tuple
    recorded_dt: float
    substeps: int

    def __post_init__(self):
        states = tuple(self.states)
        if len(states) < 1:
            raise ContractViolationError("trajectory needs at least one state")
        n = states[0].n_particles
        if any(s.n_particles != n for s in states):
            raise ContractViolationError("particle count must be constant along a trajectory")
        if not self.recorded_dt > 0:
            raise ContractViolationError(f"recorded_dt must be > 0, got {self.recorded_dt}")
        if int(self.substeps) < 1:
            raise ContractViolationError(f"substeps must be >= 1, got {self.substeps}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "substeps", int(self.substeps))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_particles(self) -> int:
        return self.states[0].n_particles

    @property
    def dt(self) -> float:
        """Integrator step underlying each recorded interval."""
        return self.recorded_dt / self.substeps

    def positions_array(self) -> np.ndarray:
        """(records, N, 3) stack of recorded positions."""
        return np.stack([s.positions for s in self.states])


@dataclass(frozen=True, order=True)
class PairIndex:
    i: int
    j: int

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ContractViolationError(f"need 0 <= i < j, got ({self.i}, {self.j})")


def pair_indices(n: int):
    """Upper-triangle index arrays (lexicographic by (i, j)) for n particles."""
    return np.triu_indices(n, k=1)


def pair_distance_array(positions):
    """Distances ||q_i - q_j|| for all i<j, in lexicographic pair order."""
    iu, ju = pair_indices(positions.shape[0])
    d = positions[iu] - positions[ju]
    return (d * d).sum(axis=-1) ** 0.5


# --- Lagrangian assembly ----------------------------------------------------


def _as_float(x):
    return x if _is_traced(x) else float(x)


def pairwise_distances(state: ParticleState):
    """All pair distances as ``[(PairIndex(i, j), r_ij), ...]``, i<j order."""
    iu, ju = pair_indices(state.n_particles)
    r = pair_distance_array(state.positions)
    return [(PairIndex(int(i), int(j)), float(v)) for i, j, v in zip(iu, ju, r)]


def kinetic_energy(state: ParticleState):
    """Sum of (1/2) m_i |v_i|^2."""
    v = state.velocities
    return _as_float((0.5 * state.masses * (v * v).sum(axis=-1)).sum())


def mclnn_potential_from_positions(params: MlpParams, positions):
    """Sum of the pair network over all pair distances (JAX-differentiable)."""
    r = pair_distance_array(positions)
    return jnp.sum(mlp_forward(params, r[:, None]))


def mclnn_potential(params: MlpParams, state: ParticleState):
    """Total learned potential: pairwise network summed over all i<j."""
    if params.layer_sizes[0] != 1:
        raise ContractViolationError(
            f"pair network must take a single distance, got input size {params.layer_sizes[0]}"
        )
    return _as_float(mclnn_potential_from_positions(params, state.positions))


def mclnn_lagrangian(params: MlpParams, state: ParticleState):
    """Kinetic energy minus the summed pairwise potential."""
    return _as_float(kinetic_energy(state) - mclnn_potential(params, state))


def hamiltonian(state: ParticleState, potential: Callable):
    """Total energy T + V; ``potential`` maps positions (N,3) to a scalar."""
    return _as_float(kinetic_energy(state) + potential(state.positions))


def linear_momentum(state: ParticleState) -> np.ndarray:
    return np.asarray((state.masses[:, None] * state.velocities).sum(axis=0))


def angular_momentum(state: ParticleState) -> np.ndarray:
    """Total q x (m v) about the coordinate origin."""
    p = np.asarray(state.masses)[:, None] * np.asarray(state.velocities)
    return np.cross(np.asarray(state.positions), p).sum(axis=0)


# --- Euler-Lagrange accelerations --------------------------------------------

CONDITION_LIMIT = 1e12


def el_acceleration_general(lagrangian_fn: Callable, positions, velocities) -> np.ndarray:
    """Accelerations from an arbitrary Lagrangian L(q, qdot).

    Solves (d2L/dqdot dqdot) a = grad_q L - (d2L/dqdot dq) qdot as a linear
    system with partial pivoting; the velocity Hessian is never inverted
    explicitly. ``lagrangian_fn`` must be JAX-traceable.
    """
    q = np.asarray(positions, dtype=np.float64)
    v = np.asarray(velocities, dtype=np.float64)
    n, dim = q.shape
    dof = n * dim
    grad_q = jax.grad(lagrangian_fn, argnums=0)(q, v)
    hess_vv = jax.jacfwd(jax.grad(lagrangian_fn, argnums=1), argnums=1)(q, v)
    hess_vq = jax.jacfwd(jax.grad(lagrangian_fn, argnums=1), argnums=0)(q, v)
    mass_matrix = np.asarray(hess_vv).reshape(dof, dof)
    coriolis = np.asarray(hess_vq).reshape(dof, dof)
    rhs = np.asarray(grad_q).reshape(dof) - coriolis @ v.reshape(dof)
    if not np.all(np.isfinite(mass_matrix)) or not np.all(np.isfinite(rhs)):
        raise NumericalFailureError("non-finite Euler-Lagrange derivatives",
                                    context="el_acceleration_general")
    cond = np.linalg.cond(mass_matrix)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularityError(
            f"velocity Hessian is ill-conditioned (cond ~ {cond:.2e})",
            context="el_acceleration_general",
        )
    accel = np.linalg.solve(mass_matrix, rhs).reshape(n, dim)
    if not np.all(np.isfinite(accel)):
        raise NumericalFailureError("non-finite acceleration",
                                    context="el_acceleration_general")
    return accel


def fixedke_acceleration_from_arrays(params: MlpParams, positions, masses):
    """-grad_q V / m for the pairwise potential; traceable form."""
    g = jax.grad(mclnn_potential_from_positions, argnums=1)(params, positions)
    return -g / masses[:, None]


_fixedke_accel_jit = jax.jit(fixedke_acceleration_from_arrays)


def el_acceleration_fixedke(params: MlpParams, state: ParticleState) -> np.ndarray:
    """Accelerations under the standard kinetic energy: the velocity Hessian
    is diag(m) and the mixed term vanishes, so a_i = -(1/m_i) grad_{q_i} V."""
    a = np.asarray(_fixedke_accel_jit(params, state.positions, state.masses))
    if not np.all(np.isfinite(a)):
        raise NumericalFailureError("non-finite acceleration",
                                    context="el_acceleration_fixedke")
    return a


def mclnn_acceleration_fn(params: MlpParams) -> Callable:
    """Acceleration callback for rollouts, closed over fixed parameters."""
    def accel(state: ParticleState):
        return el_acceleration_fixedke(params, state)
    return accel


# --- integration --------------------------------------------------------------


def velocity_verlet_step(accel: Callable, state: ParticleState, dt: float) -> ParticleState:
    """One kick-drift-kick step.

    v_half = v + (dt/2) a(q); q' = q + dt v_half; v' = v_half + (dt/2) a(q').
    Differentiable end-to-end when ``accel`` and the state are traceable.
    """
    if not dt > 0:
        raise ContractViolationError(f"dt must be > 0, got {dt}")
    a0 = accel(state)
    v_half = state.velocities + (0.5 * dt) * a0
    q_new = state.positions + dt * v_half
    mid = ParticleState(q_new, v_half, state.masses)
    a1 = accel(mid)
    v_new = v_half + (0.5 * dt) * a1
    return ParticleState(q_new, v_new, state.masses)


def rollout(accel: Callable, state0: ParticleState, dt: float, substeps: int,
            n_records: int) -> Trajectory:
    """Integrate at step ``dt``, recording every ``substeps`` steps.

    The first recorded state is ``state0``; (n_records-1)*substeps steps are
    taken in total. On numerical failure the raised NumericalFailureError
    carries the records completed so far as ``partial_trajectory``.
    """
    if n_records < 1:
        raise ContractViolationError(f"n_records must be >= 1, got {n_records}")
    if substeps < 1:
        raise ContractViolationError(f"substeps must be >= 1, got {substeps}")
    states = [state0]
    current = state0
    recorded_dt = dt * substeps
    for _ in range(n_records - 1):
        try:
            for _ in range(substeps):
                current = velocity_verlet_step(accel, current, dt)
        except NumericalFailureError as err:
            err.partial_trajectory = Trajectory(tuple(states), recorded_dt, substeps)
            raise
        states.append(current)
    return Trajectory(tuple(states), recorded_dt, substeps)


def discrete_action(traj: Trajectory, lagrangian_of_state: Callable) -> float:
    """Trapezoidal quadrature of L over the recorded states."""
    if len(traj) < 2:
        return 0.0
    values = [float(lagrangian_of_state(s)) for s in traj.states]
    total = 0.0
    for a, b in zip(values[:-1], values[1:]):
        total += 0.5 * (a + b) * traj.recorded_dt
    return total


# --- rigid transforms ---------------------------------------------------------

ORTHOGONALITY_TOL = 1e-10


def translate(state: ParticleState, offset) -> ParticleState:
    """Shift all positions by ``offset``; velocities are untouched."""
    eps = np.asarray(offset, dtype=np.float64).reshape(3)
    return ParticleState(state.positions + eps, state.velocities, state.masses)


def rotate(state: ParticleState, rotation) -> ParticleState:
    """Rigidly rotate the state: both positions and velocities map through Q."""
    q_mat = np.asarray(rotation, dtype=np.float64)
    if q_mat.shape != (3, 3):
        raise ContractViolationError(f"rotation must be 3x3, got {q_mat.shape}")
    defect = np.abs(q_mat.T @ q_mat - np.eye(3)).max()
    if defect > ORTHOGONALITY_TOL:
        raise ContractViolationError(
            f"rotation is not orthogonal (max |Q^T Q - I| = {defect:.2e})"
        )
    return ParticleState(state.positions @ q_mat.T, state.velocities @ q_mat.T,
                         state.masses)


def rotate_positions_only(state: ParticleState, rotation) -> ParticleState:
    """Map positions through Q, leaving velocities as-is (the L(Qq, qdot)
    form whose invariance the symmetry tests exercise)."""
    rotated = rotate(state, rotation)
    return ParticleState(rotated.positions, state.velocities, state.masses)


def random_rotation(seed: int) -> np.ndarray:
    """Seeded proper rotation via QR orthonormalization (det +1)."""
    rng = np.random.default_rng(seed)
    q_mat, r_mat = np.linalg.qr(rng.normal(size=(3, 3)))
    q_mat = q_mat * np.sign(np.diag(r_mat))
    if np.linalg.det(q_mat) < 0:
        q_mat[:, 0] = -q_mat[:, 0]
    return q_mat


# --- trajectory persistence ----------------------------------------------------

TRAJECTORY_HEADER = ["record", "particle", "qx", "qy", "qz", "vx", "vy", "vz"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def sidecar_path(csv_path) -> str:
    return f"{csv_path}.meta.json"


def write_trajectory_csv(path, traj: Trajectory, metadata: dict | None = None) -> None:
    """Write one row per particle per record; floats carry 17 significant
    digits. ``metadata`` (task, dt, substeps, seed, masses...) goes to a
    JSON sidecar next to the CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for rec, state in enumerate(traj.states):
            for i in range(state.n_particles):
                writer.writerow(
                    [rec, i]
                    + [_fmt(x) for x in state.positions[i]]
                    + [_fmt(x) for x in state.velocities[i]]
                )
    if metadata is not None:
        meta = dict(metadata)
        meta.setdefault("recorded_dt", traj.recorded_dt)
        meta.setdefault("substeps", traj.substeps)
        meta.setdefault("masses", [float(m) for m in traj.states[0].masses])
        tmp = sidecar_path(path) + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(meta, fh, indent=1)
        os.replace(tmp, sidecar_path(path))


def read_trajectory_csv(path, recorded_dt: float | None = None,
                        substeps: int | None = None,
                        masses: Sequence[float] | None = None) -> Trajectory:
    """Read a trajectory CSV; step metadata and masses come from arguments
    or, when omitted, from the JSON sidecar written alongside."""
    if recorded_dt is None or substeps is None or masses is None:
        meta_file = sidecar_path(path)
        if not os.path.exists(meta_file):
            raise ContractViolationError(
                f"{path}: recorded_dt/substeps/masses not given and no sidecar found"
            )
        with open(meta_file) as fh:
            meta = json.load(fh)
        recorded_dt = meta["recorded_dt"] if recorded_dt is None else recorded_dt
        substeps = meta["substeps"] if substeps is None else substeps
        masses = meta["masses"] if masses is None else masses
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRAJECTORY_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ContractViolationError(f"{path}: missing columns {missing}")
        for row in reader:
            rows.setdefault(int(row["record"]), {})[int(row["particle"])] = (
                [float(row[c]) for c in ("qx", "qy", "qz")],
                [float(row[c]) for c in ("vx", "vy", "vz")],
            )
    masses_arr = np.asarray(masses, dtype=np.float64)
    states = []
    for rec in sorted(rows):
        by_particle = rows[rec]
        n = len(by_particle)
        q = np.array([by_particle[i][0] for i in range(n)])
        v = np.array([by_particle[i][1] for i in range(n)])
        states.append(ParticleState(q, v, masses_arr))
    return Trajectory(tuple(states), float(recorded_dt), int(substeps))
