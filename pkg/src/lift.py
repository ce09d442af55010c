"""Feedforward lifts and phase lifts of a CPG network."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from pathlib import Path
from typing import Mapping, Optional

import networkx as nx

from src.network import (
    Arrow,
    Colouring,
    NetlabError,
    Network,
    NetworkError,
    Node,
    UnbalancedColouringError,
    Violation,
    is_balanced,
    path_components,
)

logger = logging.getLogger("netlab.lift")

NEAREST_UPSTREAM = "nearest_upstream"
CPG_DIRECT = "cpg_direct"
EXPLICIT_TAILS = "tails"
POLICIES = (NEAREST_UPSTREAM, CPG_DIRECT)


class LiftError(NetlabError):
    """Raised when a lift cannot be built."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Addition:
    """One node to append: its colour and how to choose its input tails."""

    colour: str
    policy: str = NEAREST_UPSTREAM
    tails: Optional[tuple[int, ...]] = None


def _int_list(value, where: str, index: Optional[int] = None) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise LiftError(f"{where}: expected a list of node ids, got {value!r}", index=index)
    return tuple(value)


@dataclass(frozen=True)
class LiftSpec:
    cpg_nodes: Optional[tuple[int, ...]] = None
    additions: tuple[Addition, ...] = ()

    @classmethod
    def from_dict(cls, data: Mapping) -> "LiftSpec":
        """Read `{"cpg": [...], "additions": [...]}`.

        An addition is a colour string or `{"colour": ..., "policy": ...}` where the policy is a
        policy name or `{"tails": [...]}`.
        """
        raw_additions = data.get("additions", [])
        if not isinstance(raw_additions, list):
            raise LiftError(f"additions: expected a list, got {raw_additions!r}")
        additions = []
        for i, raw in enumerate(raw_additions):
            where = f"additions[{i}]"
            if isinstance(raw, str):
                additions.append(Addition(raw))
                continue
            if not isinstance(raw, Mapping):
                raise LiftError(f"{where}: expected a colour or an object, got {raw!r}", index=i)
            if not isinstance(raw.get("colour"), str):
                raise LiftError(f"{where}: missing field 'colour'", index=i)
            policy = raw.get("policy", NEAREST_UPSTREAM)
            if isinstance(policy, Mapping):
                if "tails" not in policy:
                    raise LiftError(f"{where}.policy: expected a 'tails' list", index=i)
                tails = _int_list(policy["tails"], f"{where}.policy.tails", i)
                additions.append(Addition(raw["colour"], policy=EXPLICIT_TAILS, tails=tails))
            elif isinstance(policy, str):
                additions.append(Addition(raw["colour"], policy=policy))
            else:
                raise LiftError(f"{where}.policy: expected a name or an object, got {policy!r}", index=i)
        cpg = data.get("cpg")
        return cls(_int_list(cpg, "cpg") if cpg is not None else None, tuple(additions))


@dataclass(frozen=True)
class Automorphism:
    """Node permutation `perm` together with its declared cyclic order."""

    perm: Mapping[int, int]
    order: int

    def __call__(self, c: int) -> int:
        return self.perm[c]

    def power(self, j: int) -> dict[int, int]:
        j %= max(self.order, 1)
        out = {c: c for c in self.perm}
        for _ in range(j):
            out = {c: self.perm[d] for c, d in out.items()}
        return out

    def cycles(self) -> list[tuple[int, ...]]:
        seen: set[int] = set()
        out = []
        for start in sorted(self.perm):
            if start in seen:
                continue
            cycle = [start]
            seen.add(start)
            nxt = self.perm[start]
            while nxt != start:
                cycle.append(nxt)
                seen.add(nxt)
                nxt = self.perm[nxt]
            out.append(tuple(cycle))
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Automorphism":
        """Read `alpha` (node id to image) and `order` from a phase-lift spec."""
        alpha = data.get("alpha")
        if not isinstance(alpha, Mapping):
            raise LiftError(f"alpha: expected an object mapping node ids to node ids, got {alpha!r}")
        order = data.get("order")
        if not isinstance(order, int) or isinstance(order, bool):
            raise LiftError(f"order: expected an integer, got {order!r}")
        try:
            perm = {int(k): int(v) for k, v in alpha.items()}
        except (TypeError, ValueError):
            raise LiftError(f"alpha: node ids must be integers, got {dict(alpha)!r}") from None
        return cls(perm, order)


@dataclass(frozen=True)
class PhaseLiftSpec:
    """Phase-lift description: the automorphism, one module node per orbit, and the copy count."""

    alpha: Automorphism
    module: tuple[int, ...]
    copies: int = 0
    rewire_internal: bool = False

    @classmethod
    def from_dict(cls, data: Mapping) -> "PhaseLiftSpec":
        copies = data.get("copies", 0)
        if not isinstance(copies, int) or isinstance(copies, bool):
            raise LiftError(f"copies: expected an integer, got {copies!r}")
        rewire = data.get("rewire_internal", False)
        if not isinstance(rewire, bool):
            raise LiftError(f"rewire_internal: expected true or false, got {rewire!r}")
        return cls(
            alpha=Automorphism.from_dict(data),
            module=_int_list(data.get("module"), "module"),
            copies=copies,
            rewire_internal=rewire,
        )


@dataclass(frozen=True)
class PhaseAssignment:
    """Exact phase in [0, 1) per node, and the module node whose waveform each node carries."""

    phases: Mapping[int, Fraction]
    representatives: Mapping[int, int] = field(default_factory=dict)

    def __getitem__(self, c: int) -> Fraction:
        return self.phases[c]

    def as_float(self, c: int) -> float:
        return float(self.phases[c])

    def to_strings(self) -> dict[int, str]:
        return {c: str(p) for c, p in self.phases.items()}

    @classmethod
    def from_strings(cls, phases: Mapping[int, str], representatives: Optional[Mapping[int, int]] = None):
        return cls(
            {c: Fraction(p) % 1 for c, p in phases.items()},
            dict(representatives or {}),
        )


@dataclass(frozen=True)
class LiftVerdict:
    verified: bool
    violations: tuple[Violation, ...] = ()

    def clauses(self) -> set[str]:
        return {v.subject for v in self.violations}


@dataclass(frozen=True)
class AutomorphismVerdict:
    verified: bool
    reason: str = ""


def _latest(net_nodes: dict[int, str], colour: str, before: int) -> Optional[int]:
    candidates = [c for c, k in net_nodes.items() if k == colour and c < before]
    return max(candidates) if candidates else None


def build_feedforward_lift(
    cpg: Network, kappa: Colouring, spec: LiftSpec
) -> tuple[Network, Colouring]:
    """Append spec.additions one by one, each copying its colour's CPG template inputs."""
    verdict = is_balanced(cpg, kappa)
    if not verdict.balanced:
        raise UnbalancedColouringError(
            f"CPG colouring is not balanced: {verdict.reason} (witness {verdict.witness})"
        )
    cpg_nodes = spec.cpg_nodes if spec.cpg_nodes is not None else cpg.node_ids
    for c in cpg_nodes:
        cpg.node(c)
    templates = kappa.restrict(cpg_nodes)

    nodes = list(cpg.nodes)
    arrows = list(cpg.arrows)
    colours = {c: kappa[c] for c in cpg.node_ids}
    next_arrow = max((a.id for a in arrows), default=0) + 1

    for index, addition in enumerate(spec.additions):
        if addition.colour not in templates.classes:
            raise LiftError(
                f"addition {index}: colour {addition.colour!r} has no CPG node", index=index
            )
        if addition.tails is None and addition.policy not in POLICIES:
            raise LiftError(f"addition {index}: unknown policy {addition.policy!r}", index=index)
        template = cpg.node(templates.representative(addition.colour))
        new_id = max(colours) + 1
        template_inputs = cpg.inputs(template.id)
        if addition.tails is not None and len(addition.tails) != len(template_inputs):
            raise LiftError(
                f"addition {index}: {len(addition.tails)} tails given, "
                f"template node {template.id} has {len(template_inputs)} inputs",
                index=index,
            )

        for k, arrow in enumerate(template_inputs):
            required = kappa[arrow.tail]
            if addition.tails is not None:
                tail = addition.tails[k]
                if tail not in colours or tail >= new_id:
                    raise LiftError(
                        f"addition {index}: tail {tail} does not precede node {new_id}", index=index
                    )
                if colours[tail] != required:
                    raise LiftError(
                        f"addition {index}: tail {tail} has colour {colours[tail]!r}, "
                        f"input needs {required!r}",
                        index=index,
                    )
            elif addition.policy == CPG_DIRECT:
                tail = arrow.tail
            else:
                tail = _latest(colours, required, new_id)
                if tail is None:
                    raise LiftError(
                        f"addition {index}: no preceding node of colour {required!r}", index=index
                    )
            arrows.append(Arrow(next_arrow, arrow.arrow_type, new_id, tail))
            next_arrow += 1

        nodes.append(Node(new_id, template.node_type, template.state_type, template.state_dim))
        colours[new_id] = addition.colour
        logger.debug("Added node %d with colour %r from template %d", new_id, addition.colour, template.id)

    return Network(tuple(nodes), tuple(arrows)), Colouring(colours)


def verify_feedforward_lift(
    net: Network, cpg_nodes: tuple[int, ...], kappa_tilde: Colouring
) -> LiftVerdict:
    """Check the four lift clauses; violations are labelled (a) to (d)."""
    violations: list[Violation] = []
    cpg = set(cpg_nodes)

    # (a) the CPG is a subnetwork driven only by itself
    missing = sorted(c for c in cpg if c not in net)
    if missing:
        violations.append(Violation("(a)", f"CPG nodes {missing} are not in the network"))
    for arrow in net.arrows:
        if arrow.head in cpg and arrow.tail not in cpg:
            violations.append(Violation(
                "(a)", f"arrow {arrow.id} feeds CPG node {arrow.head} from node {arrow.tail}"
            ))

    # (b) everything else is downstream of the CPG
    graph = net.digraph()
    reached = set(cpg & set(net.node_ids))
    for c in list(reached):
        reached |= nx.descendants(graph, c)
    unreached = sorted(set(net.node_ids) - reached)
    if unreached:
        violations.append(Violation("(b)", f"nodes {unreached} are not downstream of the CPG"))

    # (c) loops live only inside the CPG
    comps = path_components(net)
    for members, cyclic in zip(comps.components, comps.cyclic):
        if cyclic and not members <= cpg:
            violations.append(Violation(
                "(c)", f"path component {sorted(members)} has a loop outside the CPG"
            ))

    # (d) the colouring is balanced and every colour occurs on the CPG
    untagged = [c for c in net.node_ids if c not in kappa_tilde]
    if untagged:
        violations.append(Violation("(d)", f"nodes {untagged} have no colour"))
    else:
        cpg_colours = {kappa_tilde[c] for c in cpg if c in net}
        extra = sorted({kappa_tilde[c] for c in net.node_ids} - cpg_colours)
        if extra:
            violations.append(Violation("(d)", f"colours {extra} do not occur on the CPG"))
        verdict = is_balanced(net, kappa_tilde)
        if not verdict.balanced:
            violations.append(Violation(
                "(d)", f"colouring is not balanced: {verdict.reason} (witness {verdict.witness})"
            ))
        if not missing:
            sub = net.induced(cpg)
            sub_verdict = is_balanced(sub, kappa_tilde.restrict(cpg))
            if not sub_verdict.balanced:
                violations.append(Violation(
                    "(d)", f"restriction to the CPG is not balanced (witness {sub_verdict.witness})"
                ))

    for v in violations:
        logger.debug("Lift violation %s", v)
    return LiftVerdict(not violations, tuple(violations))


def verify_automorphism(net: Network, alpha: Automorphism) -> AutomorphismVerdict:
    ids = set(net.node_ids)
    if set(alpha.perm) != ids or set(alpha.perm.values()) != ids:
        return AutomorphismVerdict(False, "permutation is not a bijection on the node set")
    for c in net.node_ids:
        a, b = net.node(c), net.node(alpha(c))
        if (a.node_type, a.state_type) != (b.node_type, b.state_type):
            return AutomorphismVerdict(False, f"node {c} and its image {alpha(c)} differ in type")
    original = sorted((a.arrow_type, a.head, a.tail) for a in net.arrows)
    mapped = sorted((a.arrow_type, alpha(a.head), alpha(a.tail)) for a in net.arrows)
    if original != mapped:
        return AutomorphismVerdict(False, "permutation does not preserve the arrows")
    if alpha.order < 1:
        return AutomorphismVerdict(False, f"order must be positive, got {alpha.order}")
    actual = lcm(*(len(cycle) for cycle in alpha.cycles())) if alpha.perm else 1
    if actual != alpha.order:
        return AutomorphismVerdict(False, f"permutation has order {actual}, declared {alpha.order}")
    return AutomorphismVerdict(True)


def build_phase_lift(
    cpg: Network,
    alpha: Automorphism,
    module: tuple[int, ...],
    copies: int,
    rewire_internal: bool = False,
    kappa: Optional[Colouring] = None,
) -> tuple[Network, Colouring, PhaseAssignment]:
    """Chain of module copies whose node phases step by 1/k per copy under a Z_k symmetry."""
    verdict = verify_automorphism(cpg, alpha)
    if not verdict.verified:
        raise LiftError(f"not an automorphism: {verdict.reason}")
    k = alpha.order
    cycles = alpha.cycles()
    if any(len(cycle) != k for cycle in cycles):
        raise LiftError(f"every orbit of the symmetry must have length {k}")
    chosen = set(module)
    if not chosen <= set(cpg.node_ids):
        raise LiftError(f"module nodes {sorted(chosen - set(cpg.node_ids))} are not in the CPG")
    for cycle in cycles:
        hits = chosen & set(cycle)
        if len(hits) != 1:
            raise LiftError(
                f"module must meet every symmetry orbit exactly once; orbit {list(cycle)} "
                f"contains {sorted(hits)}"
            )
    if copies < 0:
        raise LiftError("copies must be non-negative")

    kappa = kappa if kappa is not None else Colouring.trivial(cpg)
    balance = is_balanced(cpg, kappa)
    if not balance.balanced:
        raise UnbalancedColouringError(f"CPG colouring is not balanced (witness {balance.witness})")

    ordered_module = tuple(sorted(chosen))
    phases: dict[int, Fraction] = {}
    reps: dict[int, int] = {}
    for m in ordered_module:
        for j in range(k):
            c = alpha.power(j)[m]
            phases[c] = Fraction(j, k)
            reps[c] = m
    for c in cpg.node_ids:
        if phases[alpha(c)] != (phases[c] + Fraction(1, k)) % 1:
            raise LiftError(f"phases are inconsistent at node {c}")

    nodes = list(cpg.nodes)
    arrows = list(cpg.arrows)
    colours = {c: kappa[c] for c in cpg.node_ids}
    next_arrow = max((a.id for a in arrows), default=0) + 1

    for j in range(copies):
        shift = alpha.power(j)
        inverse = {v: u for u, v in shift.items()}
        start = max(colours) + 1
        created: dict[int, int] = {}
        for offset, m in enumerate(ordered_module):
            template = cpg.node(shift[m])
            new_id = start + offset
            created[template.id] = new_id
            nodes.append(Node(new_id, template.node_type, template.state_type, template.state_dim))
            colours[new_id] = kappa[template.id]
            phases[new_id] = Fraction(j, k) % 1
            reps[new_id] = m

        for template_id, new_id in created.items():
            for arrow in cpg.inputs(template_id):
                source = arrow.tail
                internal = inverse[source] in chosen and source != template_id
                if internal and not rewire_internal:
                    tail = created[source]
                else:
                    want = (kappa[source], phases[source])
                    matches = [c for c in colours if c < start and (colours[c], phases[c]) == want]
                    if not matches:
                        raise LiftError(
                            f"copy {j}: no preceding node with colour {want[0]!r} and phase {want[1]}",
                            index=j,
                        )
                    tail = max(matches)
                arrows.append(Arrow(next_arrow, arrow.arrow_type, new_id, tail))
                next_arrow += 1

    lifted = Network(tuple(nodes), tuple(arrows))
    colouring = Colouring(colours)
    check = verify_feedforward_lift(lifted, cpg.node_ids, colouring)
    if not check.verified:
        raise LiftError(
            "phase lift is not feedforward: " + "; ".join(str(v) for v in check.violations)
        )
    logger.info("Built phase lift with %d copies of a %d-node module", copies, len(ordered_module))
    return lifted, colouring, PhaseAssignment(phases, reps)


def read_lift_file(path: str | Path) -> Mapping:
    """Load a lift or phase-lift description; JSON errors keep their line and column."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, Mapping):
        raise NetworkError(f"{path}: expected a JSON object")
    return data
