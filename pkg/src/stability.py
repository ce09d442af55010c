"""Floquet analysis of lifted periodic orbits.

The central check: the Floquet multipliers of a feedforward lift are those of
the CPG orbit together with, for every added node, the multipliers of its
internal dynamics along the orbit of its colour.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import networkx as nx
import numpy as np
from scipy import linalg
from scipy.integrate import quad
from scipy.optimize import linear_sum_assignment

from src.dynamics import (
    AdmissibleSystem,
    IntegrationError,
    IntegratorConfig,
    PeriodicOrbit,
    assemble,
    declared_orbit,
    integrate,
    solve_piecewise,
)
from src.lift import PhaseAssignment
from src.models import SWITCH_A, SWITCH_B, SWITCH_PERIOD, my_linear, my_matrix, switch_linear
from src.network import Colouring, NetlabError, Network, Node

logger = logging.getLogger("netlab.stability")

TOL_MATCH = 1e-5
MARGIN = 1e-6
POINTWISE_MARGIN = 1e-8
CLUSTER_TOL = 1e-3
LIOUVILLE_WARN = 1e-5


class FloquetError(NetlabError):
    """Raised when multipliers cannot be computed from a monodromy matrix."""
    pass


class DecompositionError(NetlabError):
    """Raised when lifted multipliers do not match the predicted multiset."""

    def __init__(self, message: str, report: Optional["FloquetReport"] = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Monodromy:
    matrix: np.ndarray
    period: float
    t0: float
    steps: int
    trace_integral: float
    liouville_residual: float


def sort_multipliers(values: Iterable[complex]) -> list[complex]:
    """Descending magnitude, ties broken by ascending angle."""
    return sorted(
        (complex(v) for v in values),
        key=lambda z: (-round(abs(z), 12), round(float(np.angle(z)), 12)),
    )


def _fundamental_matrix(
    coefficient: Callable[[float], np.ndarray],
    n: int,
    t0: float,
    period: float,
    config: IntegratorConfig,
    breakpoints: Sequence[float],
) -> tuple[np.ndarray, int]:
    """Propagate the identity column by column through y' = A(t) y."""
    columns = []
    steps = 0
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        _, states, k = solve_piecewise(
            lambda t, y: coefficient(t) @ y, e, t0, t0 + period, config, breakpoints, dense=False
        )
        columns.append(states[-1])
        steps += k
    return np.column_stack(columns), steps


def _breakpoints(system: AdmissibleSystem, orbit: PeriodicOrbit) -> list[float]:
    return system.breakpoints(orbit.t0, orbit.t0 + orbit.period)


def monodromy(
    system: AdmissibleSystem, orbit: PeriodicOrbit, config: Optional[IntegratorConfig] = None
) -> Monodromy:
    """Variational flow over one period, with a Liouville determinant diagnostic."""
    config = config or IntegratorConfig()
    marks = _breakpoints(system, orbit)

    def coefficient(t: float) -> np.ndarray:
        return system.jacobian(t, orbit(t))

    matrix, steps = _fundamental_matrix(coefficient, system.dimension, orbit.t0, orbit.period, config, marks)
    if not np.all(np.isfinite(matrix)):
        raise FloquetError("monodromy matrix has non-finite entries")

    trace_integral, _ = quad(
        lambda t: float(np.trace(coefficient(t))), orbit.t0, orbit.t0 + orbit.period,
        points=marks or None, limit=400,
    )
    expected = np.exp(trace_integral)
    det = float(np.real(linalg.det(matrix)))
    residual = abs(det - expected) / max(abs(expected), np.finfo(float).tiny)
    logger.debug("Monodromy (%d x %d) in %d steps, Liouville residual %.3g",
                 system.dimension, system.dimension, steps, residual)
    if residual > LIOUVILLE_WARN:
        logger.warning("Liouville check residual %.3g exceeds %.0e", residual, LIOUVILLE_WARN)
    return Monodromy(matrix, orbit.period, orbit.t0, steps, float(trace_integral), float(residual))


def floquet_multipliers(m: Monodromy | np.ndarray) -> list[complex]:
    matrix = m.matrix if isinstance(m, Monodromy) else np.asarray(m)
    try:
        values = linalg.eigvals(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise FloquetError(f"eigenvalue computation failed: {e}") from None
    if not np.all(np.isfinite(values)):
        raise FloquetError("monodromy matrix has non-finite eigenvalues")
    return sort_multipliers(values)


def transverse_node_matrix(
    system: AdmissibleSystem, orbit: PeriodicOrbit, node: int, config: Optional[IntegratorConfig] = None
) -> np.ndarray:
    """Period map of y' = D_c f_c(t) y, the internal dynamics of one node along the orbit."""
    config = config or IntegratorConfig()
    n = system.net.node(node).state_dim
    matrix, _ = _fundamental_matrix(
        lambda t: system.own_jacobian(node, t, orbit(t)),
        n, orbit.t0, orbit.period, config, _breakpoints(system, orbit),
    )
    return matrix


def transverse_floquet_node(
    system: AdmissibleSystem, orbit: PeriodicOrbit, node: int, config: Optional[IntegratorConfig] = None
) -> list[complex]:
    return floquet_multipliers(transverse_node_matrix(system, orbit, node, config))


def transverse_floquet(
    cpg_system: AdmissibleSystem,
    orbit: PeriodicOrbit,
    colour: str,
    kappa: Colouring,
    config: Optional[IntegratorConfig] = None,
) -> list[complex]:
    """Transverse multipliers of a colour, computed on its CPG representative."""
    node = kappa.restrict(cpg_system.net.node_ids).representative(colour)
    return transverse_floquet_node(cpg_system, orbit, node, config)


# --- multiset matching --------------------------------------------------------


@dataclass(frozen=True)
class MultiplierMatch:
    pairs: tuple[tuple[int, int], ...]
    residuals: tuple[float, ...]
    cluster_residuals: tuple[float, ...]
    max_residual: float
    method: str
    matched: bool


def _relative(a: complex, b: complex) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _clusters(values: Sequence[complex], tol: float) -> list[list[int]]:
    """Indices of `values` grouped transitively by relative distance below `tol`."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(values)))
    graph.add_edges_from(
        (i, j)
        for i in range(len(values))
        for j in range(i + 1, len(values))
        if _relative(values[i], values[j]) < tol
    )
    return sorted((sorted(group) for group in nx.connected_components(graph)), key=min)


def match_multisets(
    observed: Sequence[complex],
    predicted: Sequence[complex],
    tol: float = TOL_MATCH,
    cluster_tol: float = CLUSTER_TOL,
) -> MultiplierMatch:
    """Pair two multiplier multisets and compare them cluster by cluster.

    Nearly equal predicted values form a cluster; the cluster's mean is compared
    with the mean of the observed values paired to it.
    """
    if len(observed) != len(predicted):
        raise DecompositionError(f"multiset sizes differ: {len(observed)} observed, {len(predicted)} predicted")
    n = len(observed)
    cost = np.array([[_relative(o, p) for p in predicted] for o in observed]).reshape(n, n)
    try:
        rows, cols = linear_sum_assignment(cost)
        method = "optimal"
    except ValueError:
        logger.warning("Optimal pairing failed, falling back to greedy nearest pairing")
        method = "greedy"
        free = set(range(n))
        rows, cols = [], []
        for i in range(n):
            j = min(free, key=lambda k: cost[i, k])
            free.remove(j)
            rows.append(i)
            cols.append(j)
    pairs = tuple((int(i), int(j)) for i, j in zip(rows, cols))
    partner = {j: i for i, j in pairs}
    residuals = tuple(float(cost[i, j]) for i, j in pairs)

    cluster_residuals = []
    for group in _clusters(predicted, cluster_tol):
        p_mean = np.mean([predicted[j] for j in group])
        o_mean = np.mean([observed[partner[j]] for j in group])
        cluster_residuals.append(abs(o_mean - p_mean) / max(1.0, abs(p_mean)))
    worst = max(cluster_residuals, default=0.0)
    return MultiplierMatch(
        pairs, residuals, tuple(cluster_residuals), float(worst), method, bool(worst < tol)
    )


# --- decomposition ------------------------------------------------------------


def _trivial_index(values: Sequence[complex], orbit: PeriodicOrbit) -> Optional[int]:
    if orbit.stationary or not values:
        return None
    return int(np.argmin([abs(v - 1.0) for v in values]))


def _stable(values: Sequence[complex], skip: Optional[int], margin: float) -> bool:
    return all(abs(v) < 1.0 - margin for i, v in enumerate(values) if i != skip)


@dataclass(frozen=True)
class FloquetReport:
    period: float
    full: tuple[complex, ...]
    cpg: tuple[complex, ...]
    transverse: Mapping[int, tuple[complex, ...]]
    transverse_by_colour: Mapping[str, tuple[complex, ...]]
    predicted: tuple[complex, ...]
    match: MultiplierMatch
    trivial_index: Optional[int]
    cpg_trivial_index: Optional[int]
    cpg_stable: bool
    transverse_stable: Mapping[int, bool]
    lift_stable: bool
    exponents: tuple[float, ...]
    liouville_residual: float

    @property
    def verdict(self) -> str:
        return "LIFT_STABLE" if self.lift_stable else "LIFT_UNSTABLE"

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "full": [_pair(z) for z in self.full],
            "cpg": [_pair(z) for z in self.cpg],
            "predicted": [_pair(z) for z in self.predicted],
            "transverse": {str(c): [_pair(z) for z in v] for c, v in self.transverse.items()},
            "transverse_by_colour": {k: [_pair(z) for z in v] for k, v in self.transverse_by_colour.items()},
            "pairs": [list(p) for p in self.match.pairs],
            "pair_residuals": list(self.match.residuals),
            "cluster_residuals": list(self.match.cluster_residuals),
            "max_residual": self.match.max_residual,
            "pairing": self.match.method,
            "trivial_index": self.trivial_index,
            "cpg_trivial_index": self.cpg_trivial_index,
            "cpg_stable": self.cpg_stable,
            "transverse_stable": {str(c): v for c, v in self.transverse_stable.items()},
            "lift_stable": self.lift_stable,
            "verdict": self.verdict,
            "exponents": list(self.exponents),
            "liouville_residual": self.liouville_residual,
        }


def _pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def decomposition_check(
    lift_system: AdmissibleSystem,
    lifted_orbit: PeriodicOrbit,
    cpg_system: AdmissibleSystem,
    cpg_orbit: PeriodicOrbit,
    kappa: Colouring,
    config: Optional[IntegratorConfig] = None,
    tol_match: float = TOL_MATCH,
    margin: float = MARGIN,
    cluster_tol: float = CLUSTER_TOL,
) -> FloquetReport:
    """Compare the lifted multipliers with CPG multipliers plus per-node transverse ones."""
    config = config or IntegratorConfig()
    lifted_mono = monodromy(lift_system, lifted_orbit, config)
    full = floquet_multipliers(lifted_mono)
    cpg = floquet_multipliers(monodromy(cpg_system, cpg_orbit, config))

    cpg_ids = set(cpg_system.net.node_ids)
    chain = [c for c in lift_system.net.node_ids if c not in cpg_ids]
    by_colour: dict[str, tuple[complex, ...]] = {}
    transverse: dict[int, tuple[complex, ...]] = {}
    for c in chain:
        colour = kappa[c]
        if colour not in by_colour:
            by_colour[colour] = tuple(transverse_floquet(cpg_system, cpg_orbit, colour, kappa, config))
        transverse[c] = by_colour[colour]

    predicted = sort_multipliers([*cpg, *(z for c in chain for z in transverse[c])])
    match = match_multisets(full, predicted, tol_match, cluster_tol)

    cpg_trivial = _trivial_index(cpg, cpg_orbit)
    cpg_stable = _stable(cpg, cpg_trivial, margin)
    transverse_stable = {c: _stable(v, None, margin) for c, v in transverse.items()}
    lift_stable = cpg_stable and all(transverse_stable.values())
    exponents = tuple(float(np.log(max(abs(z), np.finfo(float).tiny)) / lifted_orbit.period) for z in full)

    report = FloquetReport(
        period=lifted_orbit.period,
        full=tuple(full),
        cpg=tuple(cpg),
        transverse=transverse,
        transverse_by_colour=by_colour,
        predicted=tuple(predicted),
        match=match,
        trivial_index=_trivial_index(full, lifted_orbit),
        cpg_trivial_index=cpg_trivial,
        cpg_stable=cpg_stable,
        transverse_stable=transverse_stable,
        lift_stable=lift_stable,
        exponents=exponents,
        liouville_residual=lifted_mono.liouville_residual,
    )
    if not match.matched:
        raise DecompositionError(
            f"lifted multipliers differ from the prediction: worst cluster residual "
            f"{match.max_residual:.3g} (tolerance {tol_match:g})",
            report,
        )
    logger.info("Decomposition matched (worst residual %.3g): %s", match.max_residual, report.verdict)
    return report


# --- pointwise eigenvalues ----------------------------------------------------


@dataclass(frozen=True)
class TransverseSubspaceReport:
    """Pointwise eigenvalues of each node's internal Jacobian along one period."""

    times: tuple[float, ...]
    eigenvalues: Mapping[int, tuple[tuple[complex, ...], ...]]
    max_real: Mapping[int, float]
    eigvec_rotation: Mapping[int, float]
    trace_integral: Mapping[int, float]
    transversely_stable: bool

    def to_dict(self) -> dict:
        return {
            "times": list(self.times),
            "max_real": {str(c): v for c, v in self.max_real.items()},
            "eigvec_rotation": {str(c): v for c, v in self.eigvec_rotation.items()},
            "trace_integral": {str(c): v for c, v in self.trace_integral.items()},
            "transversely_stable": self.transversely_stable,
            "eigenvalues": {
                str(c): [[_pair(z) for z in row] for row in rows]
                for c, rows in self.eigenvalues.items()
            },
        }


def _principal_angle(u: np.ndarray, v: np.ndarray) -> float:
    cosine = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, cosine)))


def transverse_subspace_report(
    cpg_system: AdmissibleSystem,
    orbit: PeriodicOrbit,
    grid: int = 200,
    nodes: Optional[Iterable[int]] = None,
    pointwise_margin: float = POINTWISE_MARGIN,
) -> TransverseSubspaceReport:
    times = orbit.grid(grid)
    nodes = tuple(nodes) if nodes is not None else cpg_system.net.node_ids
    eigenvalues, max_real, rotation, traces = {}, {}, {}, {}
    for c in nodes:
        rows = []
        worst = -np.inf
        turn = 0.0
        previous = None
        trace_sum = 0.0
        for t in times:
            block = cpg_system.own_jacobian(c, t, orbit(t))
            values, vectors = linalg.eig(block)
            rows.append(tuple(sort_multipliers(values)))
            worst = max(worst, float(np.max(values.real)))
            trace_sum += float(np.trace(block))
            dominant = vectors[:, int(np.argmax(values.real))]
            if previous is not None:
                turn = max(turn, _principal_angle(previous, dominant))
            previous = dominant
        eigenvalues[c] = tuple(rows)
        max_real[c] = worst
        rotation[c] = turn
        traces[c] = trace_sum * orbit.period / grid
    stable = all(v < -pointwise_margin for v in max_real.values())
    return TransverseSubspaceReport(
        tuple(float(t) for t in times), eigenvalues, max_real, rotation, traces, stable
    )


# --- Liapunov probes ----------------------------------------------------------


@dataclass(frozen=True)
class ProbeEntry:
    delta: float
    node_set: str
    probe: int
    sup_deviation: Optional[float]
    final_deviation: Optional[float]
    amplification: Optional[float]
    cpg_sup: Optional[float]
    chain_sup: Mapping[int, float] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass(frozen=True)
class LiapunovProbeReport:
    seed: int
    horizon: float
    entries: tuple[ProbeEntry, ...]

    def worst(self, delta: float, node_set: Optional[str] = None) -> float:
        values = [
            e.sup_deviation for e in self.entries
            if e.delta == delta and e.sup_deviation is not None
            and (node_set is None or e.node_set == node_set)
        ]
        return max(values, default=float("nan"))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "entries": [
                {
                    "delta": e.delta, "node_set": e.node_set, "probe": e.probe,
                    "sup_deviation": e.sup_deviation, "final_deviation": e.final_deviation,
                    "amplification": e.amplification, "cpg_sup": e.cpg_sup,
                    "chain_sup": {str(c): v for c, v in e.chain_sup.items()}, "error": e.error,
                }
                for e in self.entries
            ],
        }


def liapunov_probe(
    lift_system: AdmissibleSystem,
    lifted_orbit: PeriodicOrbit,
    cpg_nodes: Iterable[int],
    deltas: Sequence[float] = (1e-6, 1e-4, 1e-2),
    horizon_periods: float = 10.0,
    probes: int = 8,
    seed: int = 0,
    config: Optional[IntegratorConfig] = None,
) -> LiapunovProbeReport:
    """Integrate seeded random perturbations of size delta and record the worst deviation.

    Perturbations are drawn on the CPG nodes, on each added node alone, and on
    all nodes jointly; directions are fixed per probe so deltas are comparable.
    """
    config = config or IntegratorConfig()
    rng = np.random.default_rng(seed)
    net = lift_system.net
    offsets = net.offsets
    cpg_nodes = tuple(sorted(cpg_nodes))
    chain = [c for c in net.node_ids if c not in set(cpg_nodes)]
    node_sets = {"cpg": cpg_nodes, **{f"node:{c}": (c,) for c in chain}, "joint": net.node_ids}

    directions = {}
    for name, members in node_sets.items():
        dirs = []
        for _ in range(probes):
            d = np.zeros(net.dimension)
            for c in members:
                d[offsets[c]] = rng.standard_normal(offsets[c].stop - offsets[c].start)
            dirs.append(d / net.block_norm(d))
        directions[name] = dirs

    t0 = lifted_orbit.t0
    t1 = t0 + horizon_periods * lifted_orbit.period
    entries = []
    for delta in deltas:
        for name, dirs in directions.items():
            for k, d in enumerate(dirs):
                x0 = lifted_orbit(t0) + delta * d
                try:
                    traj = integrate(lift_system, x0, t0, t1, config)
                except IntegrationError as e:
                    logger.warning("Probe %s #%d at delta %g failed: %s", name, k, delta, e)
                    entries.append(ProbeEntry(delta, name, k, None, None, None, None, error=str(e)))
                    continue
                gaps = traj.states - lifted_orbit(traj.times)
                total = np.array([net.block_norm(g) for g in gaps])
                cpg_dev = np.array([sum(np.linalg.norm(g[offsets[c]]) for c in cpg_nodes) for g in gaps])
                chain_sup = {c: float(np.max(np.linalg.norm(gaps[:, offsets[c]], axis=1))) for c in chain}
                sup = float(total.max())
                entries.append(ProbeEntry(
                    delta, name, k, sup, float(total[-1]),
                    sup / delta if delta > 0 else None, float(cpg_dev.max()), chain_sup,
                ))
    logger.info("Ran %d Liapunov probes over %g time units", len(entries), t1 - t0)
    return LiapunovProbeReport(seed, t1 - t0, tuple(entries))


# --- travelling waves ---------------------------------------------------------


@dataclass(frozen=True)
class TravellingWaveReport:
    residuals: Mapping[int, float]
    max_residual: float
    consistent: bool
    transverse: Mapping[int, tuple[complex, ...]]
    transverse_spread: float

    def to_dict(self) -> dict:
        return {
            "residuals": {str(c): v for c, v in self.residuals.items()},
            "max_residual": self.max_residual,
            "consistent": self.consistent,
            "transverse": {str(c): [_pair(z) for z in v] for c, v in self.transverse.items()},
            "transverse_spread": self.transverse_spread,
        }


def travelling_wave_check(
    lift_system: AdmissibleSystem,
    lifted_orbit: PeriodicOrbit,
    phases: PhaseAssignment,
    cpg_nodes: Iterable[int],
    grid: int = 200,
    tol: float = 1e-5,
    config: Optional[IntegratorConfig] = None,
) -> TravellingWaveReport:
    """Check that each node carries its module node's waveform shifted by phase * T."""
    offsets = lift_system.net.offsets
    times = lifted_orbit.grid(grid)
    states = lifted_orbit(times)
    residuals = {}
    for c in lift_system.net.node_ids:
        if c not in phases.representatives:
            continue
        rep = phases.representatives[c]
        shifted = lifted_orbit(times + phases.as_float(c) * lifted_orbit.period)
        residuals[c] = float(np.max(np.linalg.norm(states[:, offsets[c]] - shifted[:, offsets[rep]], axis=1)))
    worst = max(residuals.values(), default=0.0)

    cpg_ids = set(cpg_nodes)
    chain = [c for c in lift_system.net.node_ids if c not in cpg_ids]
    transverse = {c: tuple(transverse_floquet_node(lift_system, lifted_orbit, c, config)) for c in chain}
    spread = 0.0
    by_rep: dict[int, tuple[complex, ...]] = {}
    for c in chain:
        reference = by_rep.setdefault(phases.representatives.get(c, c), transverse[c])
        if len(reference) == len(transverse[c]):
            spread = max(spread, match_multisets(transverse[c], reference).max_residual)
    logger.debug("Travelling-wave residual %.3g, transverse spread %.3g", worst, spread)
    return TravellingWaveReport(residuals, float(worst), bool(worst < tol), transverse, float(spread))


# --- counterexamples ----------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleReport:
    name: str
    period: float
    multipliers: tuple[complex, ...]
    pointwise_max_real: float
    pointwise_stable: bool
    floquet_unstable: bool
    extras: Mapping[str, object] = field(default_factory=dict)

    @property
    def paradox(self) -> bool:
        return self.pointwise_stable and self.floquet_unstable

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "period": self.period,
            "multipliers": [_pair(z) for z in self.multipliers],
            "pointwise_max_real": self.pointwise_max_real,
            "pointwise_stable": self.pointwise_stable,
            "floquet_unstable": self.floquet_unstable,
            "paradox": self.paradox,
            "extras": dict(self.extras),
        }


def _single_cell(model) -> AdmissibleSystem:
    net = Network((Node(1, "cell", "plane", 2),))
    return assemble(net, {"cell": model}, {})


def markus_yamabe_demo(
    config: Optional[IntegratorConfig] = None, samples: int = 100, seed: int = 0
) -> CounterexampleReport:
    """Periodic linear system whose matrix is stable at every instant but whose flow grows."""
    config = config or IntegratorConfig()
    system = _single_cell(my_linear())
    orbit = declared_orbit(system, np.zeros(2), np.pi)

    rng = np.random.default_rng(seed)
    worst_trace = worst_det = 0.0
    worst_real = -np.inf
    for t in rng.uniform(0.0, np.pi, samples):
        matrix = my_matrix(t)
        worst_trace = max(worst_trace, abs(np.trace(matrix) + 0.5))
        worst_det = max(worst_det, abs(np.linalg.det(matrix) - 0.5))
        worst_real = max(worst_real, float(np.max(linalg.eigvals(matrix).real)))

    multipliers = floquet_multipliers(monodromy(system, orbit, config))
    traj = integrate(system, np.array([-1.0, 0.0]), 0.0, np.pi, config)
    exact = np.exp(np.pi / 2.0) * np.array([1.0, 0.0])
    growth_error = float(np.linalg.norm(traj.final - exact) / np.linalg.norm(exact))

    return CounterexampleReport(
        name="markus_yamabe",
        period=float(np.pi),
        multipliers=tuple(multipliers),
        pointwise_max_real=worst_real,
        pointwise_stable=worst_real < -POINTWISE_MARGIN,
        floquet_unstable=max(abs(z) for z in multipliers) > 1.0 + MARGIN,
        extras={
            "trace_deviation": float(worst_trace),
            "det_deviation": float(worst_det),
            "growth_error": growth_error,
            "expected_multipliers": [-float(np.exp(np.pi / 2.0)), -float(np.exp(-np.pi))],
        },
    )


def switching_product(a: np.ndarray = SWITCH_A, b: np.ndarray = SWITCH_B) -> tuple[np.ndarray, list[complex]]:
    """Period map e^A e^B of the hard switch and its eigenvalues."""
    product = linalg.expm(a) @ linalg.expm(b)
    return product, floquet_multipliers(product)


def switching_demo(
    sigma: float = 1e-4, config: Optional[IntegratorConfig] = None, grid: int = 400
) -> CounterexampleReport:
    """Two stable triangular matrices alternated with smoothed switching."""
    config = config or IntegratorConfig()
    system = _single_cell(switch_linear(sigma=sigma))
    orbit = declared_orbit(system, np.zeros(2), SWITCH_PERIOD)
    multipliers = floquet_multipliers(monodromy(system, orbit, config))
    pointwise = transverse_subspace_report(system, orbit, grid=grid)
    product, exact = switching_product()
    return CounterexampleReport(
        name="switching",
        period=SWITCH_PERIOD,
        multipliers=tuple(multipliers),
        pointwise_max_real=pointwise.max_real[1],
        pointwise_stable=pointwise.transversely_stable,
        floquet_unstable=max(abs(z) for z in multipliers) > 1.0 + MARGIN,
        extras={
            "sigma": sigma,
            "exact_product": product.tolist(),
            "exact_multipliers": [_pair(z) for z in exact],
        },
    )
