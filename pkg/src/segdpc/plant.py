"""LTI simulation plants and training-data generation.

Two benchmark plants are provided: a two-mass spring-damper chain with one
force input and one position output, and a multi-zone resistance-capacitance
(RC) thermal network with per-zone radiator inputs and air-temperature
outputs driven by ambient temperature as an unmeasured disturbance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .hankel import TrajectoryLog
from .signals import SignalGen

__all__ = [
    "PlantModel",
    "discretize_zoh",
    "two_mass_continuous",
    "two_mass_factory",
    "simulate_step",
    "generate_training",
    "RcZoneConfig",
    "RcNetworkConfig",
    "rc_network_continuous",
    "rc_zone_factory",
    "default_apartment",
]

# Seed-stream roles used by the benchmark (see signals.stream_seed).
ROLE_EXCITATION = 0
ROLE_DISTURBANCE = 1
ROLE_NOISE = 2
PHASE_TRAINING = 0
PHASE_CLOSED_LOOP = 1


@dataclass(eq=False)
class PlantModel:
    """A discrete-time LTI plant with internal state.

    ``x[k+1] = a_d x[k] + b_d u[k] + e_d d[k]``, ``y[k] = c x[k] + d_mat u[k]``.
    When ``e_d`` is ``None`` the disturbance enters through ``b_d`` (an input
    offset, as in a force disturbance on an actuator).
    """

    a_d: np.ndarray
    b_d: np.ndarray
    c: np.ndarray
    d_mat: np.ndarray
    sample_period: float
    state: np.ndarray = field(default=None)  # type: ignore[assignment]
    e_d: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.a_d = np.atleast_2d(np.asarray(self.a_d, dtype=float))
        self.b_d = np.atleast_2d(np.asarray(self.b_d, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.d_mat = np.atleast_2d(np.asarray(self.d_mat, dtype=float))
        n = self.a_d.shape[0]
        if self.a_d.shape != (n, n):
            raise ValueError(f"a_d must be square, got {self.a_d.shape}")
        if self.b_d.shape[0] != n:
            raise ValueError("b_d row count must match state dimension")
        if self.c.shape[1] != n:
            raise ValueError("c column count must match state dimension")
        if self.d_mat.shape != (self.c.shape[0], self.b_d.shape[1]):
            raise ValueError("d_mat shape must be (n_outputs, n_inputs)")
        if self.e_d is not None:
            self.e_d = np.atleast_2d(np.asarray(self.e_d, dtype=float))
            if self.e_d.shape[0] != n:
                raise ValueError("e_d row count must match state dimension")
        if self.state is None:
            self.state = np.zeros(n)
        self.state = np.asarray(self.state, dtype=float).reshape(n)
        if not (self.sample_period > 0):
            raise ValueError("sample_period must be positive")

    @property
    def n_states(self) -> int:
        return self.a_d.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b_d.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    @property
    def n_disturbances(self) -> int:
        return (self.e_d if self.e_d is not None else self.b_d).shape[1]

    def disturbance_matrix(self) -> np.ndarray:
        return self.e_d if self.e_d is not None else self.b_d

    def reset(self, state: np.ndarray | None = None) -> None:
        self.state = (
            np.zeros(self.n_states)
            if state is None
            else np.asarray(state, dtype=float).reshape(self.n_states)
        )


def discretize_zoh(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of ``dx/dt = a x + b u``.

    Uses the standard augmented-matrix exponential: the top rows of
    ``expm([[a, b], [0, 0]] dt)`` hold ``a_d`` and ``b_d``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("a must be square")
    if b.shape[0] != n:
        raise ValueError("b must have as many rows as a")
    if not (dt > 0):
        raise ValueError("dt must be positive")
    nm = b.shape[1]
    aug = np.zeros((n + nm, n + nm))
    aug[:n, :n] = a
    aug[:n, n:] = b
    M = scipy.linalg.expm(aug * dt)
    return M[:n, :n], M[:n, n:]


def two_mass_continuous() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous-time matrices of the two-mass spring-damper benchmark.

    Masses m1 = 0.5, m2 = 1.5 kg coupled by spring/damper pairs
    (k1 = k2 = 2 N/m, c1 = c2 = 1 Ns/m), force input on the first mass,
    position of the second mass measured.
    """
    m1, m2 = 0.5, 1.5
    k1, k2 = 2.0, 2.0
    c1, c2 = 1.0, 1.0
    a = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-(k1 + k2) / m1, k2 / m1, -(c1 + c2) / m1, c2 / m1],
            [k2 / m2, -k2 / m2, c2 / m2, -c2 / m2],
        ]
    )
    b = np.array([[0.0], [0.0], [1.0 / m1], [0.0]])
    c = np.array([[0.0, 1.0, 0.0, 0.0]])
    d = np.array([[0.0]])
    return a, b, c, d


def two_mass_factory(sample_period: float = 1.0) -> PlantModel:
    """Discretized two-mass benchmark plant, initial state at rest.

    The disturbance enters alongside the input force (same column), matching
    an unmeasured force acting on the actuated mass.
    """
    a, b, c, d = two_mass_continuous()
    a_d, b_d = discretize_zoh(a, b, sample_period)
    return PlantModel(a_d=a_d, b_d=b_d, c=c, d_mat=d, sample_period=sample_period)


def simulate_step(
    plant: PlantModel,
    u: np.ndarray | float,
    disturbance: np.ndarray | float | None = None,
    noise: np.ndarray | float | None = None,
) -> np.ndarray:
    """Advance the plant one sample and return the measured output.

    The output is measured after the state update, i.e. the returned value is
    ``y[k+1] = c x[k+1] + d_mat u[k] + noise`` for the applied input ``u[k]``.
    ``noise`` perturbs only the measurement, never the state.
    """
    u_vec = np.asarray(u, dtype=float).reshape(plant.n_inputs)
    if not np.all(np.isfinite(u_vec)):
        raise ValueError("input contains non-finite entries")
    x_next = plant.a_d @ plant.state + plant.b_d @ u_vec
    if disturbance is not None:
        d_vec = np.asarray(disturbance, dtype=float).reshape(plant.n_disturbances)
        x_next = x_next + plant.disturbance_matrix() @ d_vec
    plant.state = x_next
    y = plant.c @ x_next + plant.d_mat @ u_vec
    if noise is not None:
        y = y + np.asarray(noise, dtype=float).reshape(plant.n_outputs)
    return y


def _per_channel(gen, count: int, kind: str) -> list[SignalGen | None]:
    if gen is None:
        return [None] * count
    if isinstance(gen, SignalGen):
        if count != 1:
            raise ValueError(
                f"{kind} generator is scalar but the plant has {count} channels; "
                "pass one generator per channel"
            )
        return [gen]
    gens = list(gen)
    if len(gens) != count:
        raise ValueError(f"expected {count} {kind} generators, got {len(gens)}")
    return gens


def generate_training(
    plant: PlantModel,
    n_samples: int,
    excitation: SignalGen | Sequence[SignalGen],
    disturbance: SignalGen | Sequence[SignalGen] | None = None,
    noise: SignalGen | Sequence[SignalGen] | None = None,
    excitation_seed=None,
    disturbance_seed=None,
    noise_seed=None,
) -> TrajectoryLog:
    """Run an open-loop experiment and record the input/output trajectory.

    The plant is simulated from its current state for ``n_samples`` steps.
    ``excitation`` drives the inputs, ``disturbance`` (if any) the disturbance
    channels, and ``noise`` (if any) is added to the *recorded* outputs —
    the plant state itself stays noise-free.  Multi-channel plants take one
    generator per channel.

    Seed arguments override the generators' own seeds so sweep harnesses can
    inject per-realization streams.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    dt = plant.sample_period
    exc = _per_channel(excitation, plant.n_inputs, "excitation")
    dist = _per_channel(disturbance, plant.n_disturbances, "disturbance") if disturbance is not None else None
    noi = _per_channel(noise, plant.n_outputs, "noise") if noise is not None else None

    def draw(gens, seed, count):
        if gens is None:
            return None
        cols = []
        for i, g in enumerate(gens):
            s = seed if count == 1 else (None if seed is None else [*np.atleast_1d(seed).tolist(), i])
            cols.append(g.samples(n_samples, dt, seed=s))
        return np.vstack(cols)

    u_stream = draw(exc, excitation_seed, plant.n_inputs)
    d_stream = draw(dist, disturbance_seed, plant.n_disturbances) if dist is not None else None
    e_stream = draw(noi, noise_seed, plant.n_outputs) if noi is not None else None

    ys = np.empty((plant.n_outputs, n_samples))
    for k in range(n_samples):
        y = simulate_step(
            plant,
            u_stream[:, k],
            disturbance=None if d_stream is None else d_stream[:, k],
        )
        ys[:, k] = y
    if e_stream is not None:
        ys = ys + e_stream
    return TrajectoryLog(inputs=u_stream, outputs=ys, sample_period=dt)


# ---------------------------------------------------------------------------
# RC thermal network


@dataclass(frozen=True)
class RcZoneConfig:
    """One thermal zone: an air node, optionally buffered by a wall node.

    Resistances are in K/W, capacitances in J/K, radiator limit in W.  A zone
    without a wall node couples its air node directly to ambient through
    ``wall_ambient_resistance``.
    """

    air_capacitance: float
    wall_ambient_resistance: float
    radiator_limit: float
    wall_capacitance: float | None = None
    air_wall_resistance: float | None = None

    def __post_init__(self) -> None:
        if self.air_capacitance <= 0 or self.wall_ambient_resistance <= 0:
            raise ValueError("capacitances and resistances must be positive")
        if self.radiator_limit <= 0:
            raise ValueError("radiator_limit must be positive")
        if (self.wall_capacitance is None) != (self.air_wall_resistance is None):
            raise ValueError("wall_capacitance and air_wall_resistance go together")
        if self.wall_capacitance is not None and (
            self.wall_capacitance <= 0 or self.air_wall_resistance <= 0
        ):
            raise ValueError("capacitances and resistances must be positive")


@dataclass(frozen=True)
class RcNetworkConfig:
    """A set of zones plus inter-zone couplings.

    ``adjacency`` entries are ``(zone_i, zone_j, resistance)`` couplings
    between air nodes.  Every zone must be connected to ambient, directly or
    through neighbours.
    """

    zones: tuple[RcZoneConfig, ...]
    adjacency: tuple[tuple[int, int, float], ...] = ()
    sample_period: float = 900.0

    def __post_init__(self) -> None:
        z = len(self.zones)
        if z == 0:
            raise ValueError("at least one zone required")
        for i, j, r in self.adjacency:
            if not (0 <= i < z and 0 <= j < z and i != j):
                raise ValueError(f"adjacency ({i},{j}) references invalid zones")
            if r <= 0:
                raise ValueError("adjacency resistances must be positive")

    def radiator_limits(self) -> np.ndarray:
        return np.array([zone.radiator_limit for zone in self.zones])


def rc_network_continuous(cfg: RcNetworkConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous matrices (a, b, e, c) of the RC network.

    State order: all air temperatures first, then wall temperatures of the
    zones that have one.  Inputs are radiator heat flows (W) into the air
    nodes; the single disturbance channel is ambient temperature (column e).
    Outputs are the air temperatures.
    """
    z = len(cfg.zones)
    walled = [i for i, zone in enumerate(cfg.zones) if zone.wall_capacitance is not None]
    wall_index = {zone_i: z + k for k, zone_i in enumerate(walled)}
    n = z + len(walled)

    a = np.zeros((n, n))
    b = np.zeros((n, z))
    e = np.zeros((n, 1))

    def couple(row: int, col: int, conductance: float, capacitance: float) -> None:
        a[row, row] -= conductance / capacitance
        a[row, col] += conductance / capacitance

    for i, zone in enumerate(cfg.zones):
        b[i, i] = 1.0 / zone.air_capacitance
        if zone.wall_capacitance is not None:
            w = wall_index[i]
            g_aw = 1.0 / zone.air_wall_resistance
            g_wa = 1.0 / zone.wall_ambient_resistance
            couple(i, w, g_aw, zone.air_capacitance)
            couple(w, i, g_aw, zone.wall_capacitance)
            a[w, w] -= g_wa / zone.wall_capacitance
            e[w, 0] += g_wa / zone.wall_capacitance
        else:
            g = 1.0 / zone.wall_ambient_resistance
            a[i, i] -= g / zone.air_capacitance
            e[i, 0] += g / zone.air_capacitance

    for i, j, r in cfg.adjacency:
        g = 1.0 / r
        couple(i, j, g, cfg.zones[i].air_capacitance)
        couple(j, i, g, cfg.zones[j].air_capacitance)

    c = np.hstack([np.eye(z), np.zeros((z, n - z))])
    _check_connected(cfg)
    return a, b, e, c


def _check_connected(cfg: RcNetworkConfig) -> None:
    """Every zone must reach ambient through the resistance graph."""
    z = len(cfg.zones)
    ambient = z
    neighbours: dict[int, set[int]] = {k: set() for k in range(z + 1)}
    for i in range(z):
        # every zone's envelope path ends at ambient
        neighbours[i].add(ambient)
        neighbours[ambient].add(i)
    for i, j, _ in cfg.adjacency:
        neighbours[i].add(j)
        neighbours[j].add(i)
    seen = {ambient}
    stack = [ambient]
    while stack:
        for nb in neighbours[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    missing = set(range(z)) - seen
    if missing:
        raise ValueError(f"zones {sorted(missing)} are not connected to ambient")


def rc_zone_factory(cfg: RcNetworkConfig) -> PlantModel:
    """Discretized RC-network plant with ambient as its disturbance channel."""
    a, b, e, c = rc_network_continuous(cfg)
    be = np.hstack([b, e])
    a_d, be_d = discretize_zoh(a, be, cfg.sample_period)
    z = b.shape[1]
    return PlantModel(
        a_d=a_d,
        b_d=be_d[:, :z],
        c=c,
        d_mat=np.zeros((z, z)),
        sample_period=cfg.sample_period,
        e_d=be_d[:, z:],
    )


def default_apartment(sample_period: float = 900.0) -> RcNetworkConfig:
    """Six-zone apartment surrogate used by the economic benchmark.

    Zones are sized from floor areas (m^2): radiators at 100 W/m^2, air
    capacitance ~6 kJ/K per m^2 (air plus light furnishing), wall storage
    ~150 kJ/K per m^2.  Inner/outer envelope conductances give air time
    constants of tens of minutes and wall time constants of about half a
    day.  A chain of doorways plus two extra openings couples the zones.
    """
    areas = [20.0, 14.0, 12.0, 10.0, 8.0, 16.0]
    zones = tuple(
        RcZoneConfig(
            air_capacitance=6_000.0 * area,
            wall_capacitance=150_000.0 * area,
            air_wall_resistance=1.0 / (12.0 * area),
            wall_ambient_resistance=1.0 / (3.0 * area),
            radiator_limit=100.0 * area,
        )
        for area in areas
    )
    adjacency = (
        (0, 1, 0.02),
        (1, 2, 0.02),
        (2, 3, 0.02),
        (3, 4, 0.02),
        (4, 5, 0.02),
        (0, 5, 0.025),
        (1, 4, 0.025),
    )
    return RcNetworkConfig(zones=zones, adjacency=adjacency, sample_period=sample_period)
