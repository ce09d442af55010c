"""Admissible vector fields, integration and periodic-orbit search."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional

import numpy as np
from dotenv import load_dotenv
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from src.lift import PhaseAssignment
from src.models import ArityError, ModelError, NodeModel
from src.network import (
    Colouring,
    NetlabError,
    Network,
    NetworkError,
    colour_order,
    validate_network,
)

logger = logging.getLogger("netlab.dynamics")


class IntegrationError(NetlabError):
    """Raised when the integrator fails or the vector field misbehaves."""
    pass


class NonFiniteError(IntegrationError):
    """Raised when a node model returns NaN or infinity."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message)
        self.node = node


class NoReturnError(IntegrationError):
    """Raised when the trajectory never comes back to its section."""
    pass


class ClosureError(IntegrationError):
    """Raised when successive returns do not settle within max_returns."""
    pass


class SynchronyError(NetlabError):
    """Raised when a state is not synchronous for the given colouring."""
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-11
    transient: float = 200.0
    max_time: float = 2000.0
    max_returns: int = 200
    tol_closure: float = 1e-8
    sync_tol: float = 1e-7
    samples_per_period: int = 2000
    chunk_time: float = 25.0
    min_return_fraction: float = 0.5
    refine: int = 3
    max_step: float = np.inf

    @classmethod
    def from_env(cls, **overrides) -> "IntegratorConfig":
        """Defaults, then NETLAB_* environment variables (a .env file is honoured), then overrides."""
        load_dotenv()
        values = {}
        for name, kind in (("rtol", float), ("atol", float), ("transient", float),
                           ("max_time", float), ("max_returns", int), ("tol_closure", float)):
            raw = os.getenv(f"NETLAB_{name.upper()}")
            if raw:
                values[name] = kind(raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def but(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class NodeWiring:
    node: int
    own: slice
    groups: Mapping[str, tuple[tuple[int, slice], ...]]


@dataclass(frozen=True)
class AdmissibleSystem:
    """Network + node models + parameters, compiled to a flat vector field."""

    net: Network
    models: Mapping[str, NodeModel]
    params: Mapping[str, float]
    wiring: tuple[NodeWiring, ...]

    @property
    def dimension(self) -> int:
        return self.net.dimension

    @cached_property
    def _by_node(self) -> dict[int, NodeWiring]:
        return {w.node: w for w in self.wiring}

    def model_of(self, c: int) -> NodeModel:
        return self.models[self.net.node(c).node_type]

    @cached_property
    def forcing_period(self) -> Optional[float]:
        periods = {m.forcing_period for m in self.models.values() if m.forcing_period is not None}
        if len(periods) > 1:
            raise ModelError(f"models disagree on the forcing period: {sorted(periods)}")
        return periods.pop() if periods else None

    @property
    def nonautonomous(self) -> bool:
        return self.forcing_period is not None

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        marks: set[float] = set()
        used = {self.net.node(c).node_type for c in self.net.node_ids}
        for node_type in used:
            model = self.models[node_type]
            if model.breakpoints is not None:
                marks.update(model.breakpoints(t0, t1, self.params))
        return sorted(b for b in marks if t0 < b < t1)

    def node_inputs(self, wiring: NodeWiring, x: np.ndarray) -> dict[str, list[np.ndarray]]:
        return {t: [x[sl] for _, sl in tails] for t, tails in wiring.groups.items()}

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.dimension)
        for w in self.wiring:
            model = self.model_of(w.node)
            value = model.rhs(t, x[w.own], self.node_inputs(w, x), self.params)
            if not np.all(np.isfinite(value)):
                raise NonFiniteError(f"non-finite derivative at node {w.node}, t={t:g}", node=w.node)
            out[w.own] = value
        return out

    def own_jacobian(self, c: int, t: float, x: np.ndarray) -> np.ndarray:
        """Partial of node c's field with respect to its own state only."""
        w = self._by_node[c]
        model = self.model_of(c)
        own = x[w.own]
        inputs = self.node_inputs(w, x)
        if model.d_own is not None:
            block = np.asarray(model.d_own(t, own, inputs, self.params), dtype=float)
        else:
            block = _central_difference(lambda y: model.rhs(t, y, inputs, self.params), own)
        if not np.all(np.isfinite(block)):
            raise NonFiniteError(f"non-finite Jacobian at node {c}, t={t:g}", node=c)
        return block

    def jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """Full Jacobian; blocks between unconnected nodes are exactly zero."""
        jac = np.zeros((self.dimension, self.dimension))
        for w in self.wiring:
            model = self.model_of(w.node)
            own = x[w.own]
            inputs = self.node_inputs(w, x)
            if model.analytic:
                jac[w.own, w.own] += model.d_own(t, own, inputs, self.params)
                for arrow_type, tails in w.groups.items():
                    for index, (_, sl) in enumerate(tails):
                        jac[w.own, sl] += model.d_input(t, own, inputs, self.params, arrow_type, index)
            else:
                self._difference_rows(jac, w, t, x)
            if not np.all(np.isfinite(jac[w.own])):
                raise NonFiniteError(f"non-finite Jacobian at node {w.node}, t={t:g}", node=w.node)
        return jac

    def _difference_rows(self, jac: np.ndarray, w: NodeWiring, t: float, x: np.ndarray) -> None:
        model = self.model_of(w.node)
        variables = {w.node: w.own}
        for tails in w.groups.values():
            for tail, sl in tails:
                variables[tail] = sl

        def row(y: np.ndarray) -> np.ndarray:
            return model.rhs(t, y[w.own], self.node_inputs(w, y), self.params)

        for sl in variables.values():
            for i in range(sl.start, sl.stop):
                h = max(1e-6, 1e-6 * abs(x[i]))
                up, down = x.copy(), x.copy()
                up[i] += h
                down[i] -= h
                jac[w.own, i] = (row(up) - row(down)) / (2.0 * h)


def _central_difference(fun: Callable[[np.ndarray], np.ndarray], y: np.ndarray) -> np.ndarray:
    cols = []
    for i in range(len(y)):
        h = max(1e-6, 1e-6 * abs(y[i]))
        up, down = y.copy(), y.copy()
        up[i] += h
        down[i] -= h
        cols.append((np.asarray(fun(up)) - np.asarray(fun(down))) / (2.0 * h))
    return np.column_stack(cols)


def assemble(net: Network, models: Mapping[str, NodeModel], params: Mapping[str, float]) -> AdmissibleSystem:
    """Bind a model to every node and freeze the input wiring."""
    violations = validate_network(net)
    if violations:
        raise NetworkError("; ".join(str(v) for v in violations))
    offsets = net.offsets
    wiring = []
    for node in net.nodes:
        if node.node_type not in models:
            raise ModelError(f"no model for node type {node.node_type!r} (node {node.id})")
        model = models[node.node_type]
        if model.state_dim != node.state_dim:
            raise ModelError(
                f"node {node.id}: model {model.name!r} has state_dim {model.state_dim}, "
                f"node has {node.state_dim}"
            )
        groups: dict[str, list[tuple[int, slice]]] = {}
        for arrow in net.inputs(node.id):
            groups.setdefault(arrow.arrow_type, []).append((arrow.tail, offsets[arrow.tail]))
        problem = model.check_arity({t: len(tails) for t, tails in groups.items()})
        if problem:
            raise ArityError(f"node {node.id}: {problem}")
        wiring.append(NodeWiring(
            node=node.id,
            own=offsets[node.id],
            groups=MappingProxyType({t: tuple(tails) for t, tails in groups.items()}),
        ))
    return AdmissibleSystem(net, MappingProxyType(dict(models)), MappingProxyType(dict(params)), tuple(wiring))


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution with a cubic Hermite interpolant through the samples."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    steps: int = 0

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.states, self.derivatives, axis=0)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t):
        return self._spline(t)

    def derivative(self, t):
        return self._spline(t, 1)


def solve_piecewise(
    fun: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    config: IntegratorConfig,
    breakpoints: Iterable[float] = (),
    dense: bool = True,
):
    """RK45 across [t0, t1], restarting at every breakpoint of a nonsmooth forcing.

    Returns (times, states, steps); with dense=False only the end state is kept.
    """
    if not t1 > t0:
        raise IntegrationError(f"empty integration window [{t0}, {t1}]")
    edges = [t0, *[b for b in breakpoints if t0 < b < t1], t1]
    y = np.asarray(y0, dtype=float).copy()
    times = [t0]
    states = [y.copy()]
    steps = 0
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(
            fun, (a, b), y, method="RK45", rtol=config.rtol, atol=config.atol,
            dense_output=dense, max_step=config.max_step,
        )
        if not sol.success:
            raise IntegrationError(f"integration failed on [{a:g}, {b:g}]: {sol.message}")
        steps += len(sol.t) - 1
        y = sol.y[:, -1].copy()
        if dense:
            for left, right in zip(sol.t[:-1], sol.t[1:]):
                for k in range(1, config.refine + 1):
                    t = left + (right - left) * k / (config.refine + 1)
                    times.append(t)
                    states.append(sol.sol(t))
                times.append(right)
                states.append(sol.y[:, np.searchsorted(sol.t, right)])
    if not dense:
        return np.array([t0, t1]), np.vstack([states[0], y]), steps
    return np.array(times), np.vstack(states), steps


def integrate(
    system: AdmissibleSystem,
    x0: np.ndarray,
    t0: float,
    t1: float,
    config: Optional[IntegratorConfig] = None,
) -> Trajectory:
    config = config or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.dimension,):
        raise IntegrationError(f"initial state has shape {x0.shape}, expected ({system.dimension},)")
    times, states, steps = solve_piecewise(
        system.rhs, x0, t0, t1, config, system.breakpoints(t0, t1)
    )
    derivatives = np.vstack([system.rhs(t, x) for t, x in zip(times, states)])
    logger.debug("Integrated [%g, %g] in %d steps", t0, t1, steps)
    return Trajectory(times, states, derivatives, steps)


@dataclass(frozen=True)
class PeriodicOrbit:
    """One period of a closed trajectory, evaluated periodically beyond it."""

    period: float
    trajectory: Trajectory
    closure_residual: float = 0.0
    stationary: bool = False

    @property
    def t0(self) -> float:
        return self.trajectory.t0

    @property
    def anchor(self) -> np.ndarray:
        return self.trajectory.states[0]

    def _wrap(self, t):
        return self.t0 + np.mod(np.asarray(t, dtype=float) - self.t0, self.period)

    def __call__(self, t):
        return self.trajectory(self._wrap(t))

    def derivative(self, t):
        return self.trajectory.derivative(self._wrap(t))

    def grid(self, n: int) -> np.ndarray:
        return self.t0 + self.period * np.arange(n) / n

    @classmethod
    def at_rest(cls, point: np.ndarray, period: float, t0: float = 0.0) -> "PeriodicOrbit":
        """A constant solution read as a periodic orbit of the given (forcing) period."""
        point = np.asarray(point, dtype=float)
        traj = Trajectory(
            np.array([t0, t0 + period]), np.vstack([point, point]), np.zeros((2, len(point)))
        )
        return cls(period, traj, 0.0, stationary=True)


def declared_orbit(
    system: AdmissibleSystem, point: np.ndarray, period: Optional[float] = None, checks: int = 64
) -> PeriodicOrbit:
    """Stationary orbit at `point`, checked to be a rest point of the field over one period."""
    period = period if period is not None else system.forcing_period
    if period is None or period <= 0:
        raise IntegrationError("a stationary orbit needs a positive declared period")
    point = np.asarray(point, dtype=float)
    for t in np.linspace(0.0, period, checks, endpoint=False):
        drift = np.linalg.norm(system.rhs(t, point))
        if drift > 1e-12 * (1.0 + np.linalg.norm(point)):
            raise IntegrationError(f"declared point is not at rest: |f| = {drift:.3g} at t = {t:g}")
    return PeriodicOrbit.at_rest(point, period)


def _crossings(traj: Trajectory, normal: np.ndarray, anchor: np.ndarray) -> list[float]:
    g = (traj.states - anchor) @ normal
    out = []
    for i in range(len(g) - 1):
        if g[i] < 0.0 <= g[i + 1]:
            left, right = traj.times[i], traj.times[i + 1]
            if g[i + 1] == 0.0:
                out.append(float(right))
                continue
            out.append(brentq(lambda s: float((traj(s) - anchor) @ normal), left, right, xtol=1e-13))
    return out


def find_periodic_orbit(
    system: AdmissibleSystem,
    seed: np.ndarray,
    config: Optional[IntegratorConfig] = None,
) -> PeriodicOrbit:
    """Poincare-section search for an attracting periodic orbit of an autonomous system.

    After the transient, the section is the hyperplane through the current point
    normal to the flow there. Upward crossings near that point are returns; the
    orbit is accepted once two successive returns agree within tol_closure.
    """
    config = config or IntegratorConfig()
    if system.nonautonomous:
        raise IntegrationError("orbit search needs an autonomous system; use declared_orbit")
    x = np.asarray(seed, dtype=float)
    if config.transient > 0:
        x = integrate(system, x, 0.0, config.transient, config).final

    flow = system.rhs(0.0, x)
    speed = np.linalg.norm(flow)
    if speed < 1e-10 * (1.0 + np.linalg.norm(x)):
        raise NoReturnError(f"trajectory settled on an equilibrium (|f| = {speed:.3g})")
    normal = flow / speed
    anchor = x.copy()
    net = system.net

    t = 0.0
    waited = 0.0
    carried = 0.0
    last = (0.0, anchor)
    returns = 0
    while True:
        traj = integrate(system, x, t, t + config.chunk_time, config)
        distance = np.array([net.block_norm(s - anchor) for s in traj.states])
        for tc in _crossings(traj, normal, anchor):
            since = (traj.times > last[0]) & (traj.times <= tc)
            reach = max(carried, float(distance[since].max(initial=0.0)))
            point = traj(tc)
            if net.block_norm(point - anchor) > config.min_return_fraction * reach:
                continue
            returns += 1
            waited = 0.0
            carried = 0.0
            period = tc - last[0]
            gap = net.block_norm(point - last[1])
            logger.debug("Return %d after %.6g: successive gap %.3g", returns, period, gap)
            if gap < config.tol_closure:
                traj_period = integrate(system, point, tc, tc + period, config)
                logger.info("Periodic orbit found: T = %.10g after %d returns", period, returns)
                logger.debug(
                    "Re-integrated closure residual %.3g",
                    net.block_norm(traj_period.final - traj_period.states[0]),
                )
                return PeriodicOrbit(period, traj_period, gap)
            last = (tc, point)
            if returns >= config.max_returns:
                raise ClosureError(
                    f"returns did not settle after {returns} crossings "
                    f"(last gap {gap:.3g} above tol_closure={config.tol_closure:g})"
                )
        carried = max(carried, float(distance[traj.times > last[0]].max(initial=0.0)))
        t += config.chunk_time
        waited += config.chunk_time
        x = traj.final
        if waited > config.max_time:
            raise NoReturnError(f"no return to the section within {config.max_time:g} time units")


# --- synchronous lifting ------------------------------------------------------


def _block_sources(kappa: Colouring, lifted_net: Network, source: Optional[Network]) -> dict[int, int]:
    """For each lifted node, the source node whose block it copies."""
    if source is None:
        order = colour_order(kappa, lifted_net.node_ids)
        index = {colour: i for i, colour in enumerate(order, start=1)}
        return {c: index[kappa[c]] for c in lifted_net.node_ids}
    reps: dict[str, int] = {}
    for c in source.node_ids:
        reps.setdefault(kappa[c], c)
    out = {}
    for c in lifted_net.node_ids:
        if kappa[c] not in reps:
            raise SynchronyError(f"colour {kappa[c]!r} of node {c} does not occur on the source network")
        out[c] = c if c in source else reps[kappa[c]]
    return out


def _source_layout(kappa: Colouring, lifted_net: Network, source: Optional[Network]) -> dict[int, slice]:
    if source is not None:
        return source.offsets
    order = colour_order(kappa, lifted_net.node_ids)
    layout = {}
    start = 0
    for i, colour in enumerate(order, start=1):
        dim = lifted_net.node(kappa.representative(colour)).state_dim
        layout[i] = slice(start, start + dim)
        start += dim
    return layout


def lift_state(
    x: np.ndarray, kappa: Colouring, lifted_net: Network, source: Optional[Network] = None
) -> np.ndarray:
    """Copy each colour's block to every node of that colour.

    Without `source`, x is laid out like the quotient (one block per colour, in
    colour order); with it, x is a state of `source`, whose nodes keep their blocks.
    """
    x = np.asarray(x, dtype=float)
    sources = _block_sources(kappa, lifted_net, source)
    layout = _source_layout(kappa, lifted_net, source)
    out = np.empty(lifted_net.dimension)
    for c, sl in lifted_net.offsets.items():
        out[sl] = x[layout[sources[c]]]
    return out


def restrict_state(
    x: np.ndarray, kappa: Colouring, net: Network, tol: float = IntegratorConfig.sync_tol
) -> np.ndarray:
    """Quotient-layout state of a synchronous x; raises SynchronyError otherwise."""
    x = np.asarray(x, dtype=float)
    offsets = net.offsets
    blocks = []
    for colour, members in kappa.restrict(net.node_ids).classes.items():
        rep = x[offsets[members[0]]]
        for c in members[1:]:
            gap = np.linalg.norm(x[offsets[c]] - rep)
            if gap > tol:
                raise SynchronyError(
                    f"nodes {members[0]} and {c} of colour {colour!r} differ by {gap:.3g}"
                )
        blocks.append(rep)
    return np.concatenate(blocks)


def lift_orbit(
    orbit: PeriodicOrbit,
    kappa: Colouring,
    lifted_net: Network,
    source: Optional[Network] = None,
    phases: Optional[PhaseAssignment] = None,
) -> PeriodicOrbit:
    """Lift an orbit sample by sample.

    With `phases`, every node outside `source` carries its module node's waveform
    shifted by phase * T instead of its colour's block.
    """
    traj = orbit.trajectory
    if phases is None:
        states = np.vstack([lift_state(s, kappa, lifted_net, source) for s in traj.states])
        derivs = np.vstack([lift_state(d, kappa, lifted_net, source) for d in traj.derivatives])
    else:
        if source is None:
            raise SynchronyError("a phase lift needs the CPG network as source")
        src = source.offsets
        states = np.empty((len(traj.times), lifted_net.dimension))
        derivs = np.empty_like(states)
        for c, sl in lifted_net.offsets.items():
            if c in source:
                states[:, sl] = traj.states[:, src[c]]
                derivs[:, sl] = traj.derivatives[:, src[c]]
                continue
            shifted = traj.times + phases.as_float(c) * orbit.period
            rep = src[phases.representatives[c]]
            states[:, sl] = orbit(shifted)[:, rep]
            derivs[:, sl] = orbit.derivative(shifted)[:, rep]
    lifted = Trajectory(traj.times.copy(), states, derivs, traj.steps)
    return PeriodicOrbit(orbit.period, lifted, orbit.closure_residual, orbit.stationary)


def initial_state(net: Network, seed: Optional[Mapping[int, Iterable[float]]]) -> np.ndarray:
    """State vector from per-node seed values; unspecified nodes start at zero."""
    x = np.zeros(net.dimension)
    for c, values in (seed or {}).items():
        if c not in net:
            continue
        block = np.asarray(tuple(values), dtype=float)
        sl = net.offsets[c]
        if block.shape != (sl.stop - sl.start,):
            raise IntegrationError(f"seed for node {c} has {block.size} values, expected {sl.stop - sl.start}")
        x[sl] = block
    return x
