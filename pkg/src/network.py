"""Typed coloured networks: validation, balance, quotients and path components."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

import networkx as nx
import numpy as np

logger = logging.getLogger("netlab.network")


class NetlabError(Exception):
    """Base class for every error raised by netlab."""
    pass


class NetworkError(NetlabError):
    """Raised when a network, colouring or network file is malformed."""
    pass


class UnknownNodeError(NetworkError):
    """Raised when a node id is not part of the network."""
    pass


class UnbalancedColouringError(NetworkError):
    """Raised when an operation needs a balanced colouring and did not get one."""
    pass


@dataclass(frozen=True)
class Node:
    id: int
    node_type: str
    state_type: str
    state_dim: int


@dataclass(frozen=True)
class Arrow:
    id: int
    arrow_type: str
    head: int
    tail: int


@dataclass(frozen=True)
class Violation:
    """A single failed check; `subject` names the node, arrow or clause."""

    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


@dataclass(frozen=True)
class Network:
    """Typed digraph with self-loops and parallel arrows.

    Nodes are kept sorted by id; the state vector layout follows that order.
    """

    nodes: tuple[Node, ...]
    arrows: tuple[Arrow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "arrows", tuple(sorted(self.arrows, key=lambda a: a.id)))

    @cached_property
    def _by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _inputs(self) -> dict[int, tuple[Arrow, ...]]:
        grouped: dict[int, list[Arrow]] = {n.id: [] for n in self.nodes}
        for arrow in self.arrows:
            grouped.setdefault(arrow.head, []).append(arrow)
        return {c: tuple(arrows) for c, arrows in grouped.items()}

    @cached_property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes)

    @cached_property
    def offsets(self) -> dict[int, slice]:
        """Block slice of every node inside a state vector."""
        out = {}
        start = 0
        for node in self.nodes:
            out[node.id] = slice(start, start + node.state_dim)
            start += node.state_dim
        return out

    @cached_property
    def dimension(self) -> int:
        return sum(n.state_dim for n in self.nodes)

    def __contains__(self, c: object) -> bool:
        return c in self._by_id

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, c: int) -> Node:
        try:
            return self._by_id[c]
        except KeyError:
            raise UnknownNodeError(f"node {c} is not in the network") from None

    def inputs(self, c: int) -> tuple[Arrow, ...]:
        """Input arrows I(c), in arrow-id order."""
        self.node(c)
        return self._inputs.get(c, ())

    def induced(self, ids: Iterable[int]) -> "Network":
        """Subnetwork on `ids` with every arrow whose head and tail lie in it."""
        keep = set(ids)
        for c in keep:
            self.node(c)
        return Network(
            nodes=tuple(n for n in self.nodes if n.id in keep),
            arrows=tuple(a for a in self.arrows if a.head in keep and a.tail in keep),
        )

    def digraph(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.node_ids)
        for arrow in self.arrows:
            graph.add_edge(arrow.tail, arrow.head, key=arrow.id, arrow_type=arrow.arrow_type)
        return graph

    def block_norm(self, x: np.ndarray) -> float:
        """Network norm: sum of Euclidean block norms."""
        return float(sum(np.linalg.norm(x[sl]) for sl in self.offsets.values()))


@dataclass(frozen=True)
class Colouring:
    """Map from node ids to opaque colour symbols."""

    assignment: Mapping[int, str]

    def __getitem__(self, c: int) -> str:
        try:
            return self.assignment[c]
        except KeyError:
            raise NetworkError(f"colouring does not assign node {c}") from None

    def __contains__(self, c: object) -> bool:
        return c in self.assignment

    @cached_property
    def classes(self) -> dict[str, tuple[int, ...]]:
        """Colour classes, each sorted by node id, in order of their minimum node."""
        grouped: dict[str, list[int]] = {}
        for c in sorted(self.assignment):
            grouped.setdefault(self.assignment[c], []).append(c)
        return {colour: tuple(ids) for colour, ids in grouped.items()}

    @property
    def colours(self) -> tuple[str, ...]:
        return tuple(self.classes)

    def representative(self, colour: str) -> int:
        try:
            return self.classes[colour][0]
        except KeyError:
            raise NetworkError(f"colour {colour!r} is not used") from None

    def restrict(self, ids: Iterable[int]) -> "Colouring":
        return Colouring({c: self[c] for c in ids})

    def extend(self, extra: Mapping[int, str]) -> "Colouring":
        merged = dict(self.assignment)
        merged.update(extra)
        return Colouring(merged)

    def partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(ids) for ids in self.classes.values())

    def same_partition(self, other: "Colouring") -> bool:
        return self.partition() == other.partition()

    @classmethod
    def trivial(cls, net: Network) -> "Colouring":
        return cls({c: str(c) for c in net.node_ids})

    @classmethod
    def uniform(cls, net: Network, colour: str = "k") -> "Colouring":
        return cls({c: colour for c in net.node_ids})


@dataclass(frozen=True)
class InputMultiset:
    """Multiset of (arrow_type, tail colour) pairs over the inputs of one node."""

    node: int
    entries: tuple[tuple[str, str], ...]

    def counts(self) -> Counter:
        return Counter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class BalanceVerdict:
    balanced: bool
    witness: Optional[tuple[int, int]] = None
    multisets: Optional[tuple[InputMultiset, InputMultiset]] = None
    reason: str = ""


@dataclass(frozen=True)
class ComponentGraph:
    """Path components of a network and their acyclic condensation."""

    components: tuple[frozenset[int], ...]
    dag_edges: tuple[tuple[int, int], ...]
    compatible_order: tuple[int, ...]
    cyclic: tuple[bool, ...] = field(default=())

    def component_of(self, c: int) -> int:
        for index, members in enumerate(self.components):
            if c in members:
                return index
        raise UnknownNodeError(f"node {c} is not in any component")


def validate_network(net: Network) -> list[Violation]:
    """Check the structural invariants; an empty list means the network is valid."""
    violations: list[Violation] = []
    ids = [n.id for n in net.nodes]
    if len(set(ids)) != len(ids):
        dupes = sorted(c for c, k in Counter(ids).items() if k > 1)
        violations.append(Violation("nodes", f"duplicate node ids {dupes}"))
    if ids and sorted(set(ids)) != list(range(1, len(set(ids)) + 1)):
        violations.append(Violation("nodes", f"node ids must be dense in 1..{len(set(ids))}"))

    dim_of_state: dict[str, tuple[int, int]] = {}
    state_of_type: dict[str, tuple[str, int]] = {}
    for node in net.nodes:
        if node.state_dim < 1:
            violations.append(Violation(f"node {node.id}", "state_dim must be positive"))
        seen = dim_of_state.setdefault(node.state_type, (node.state_dim, node.id))
        if seen[0] != node.state_dim:
            violations.append(Violation(
                f"node {node.id}",
                f"state_type {node.state_type!r} has state_dim {node.state_dim}, "
                f"but node {seen[1]} has {seen[0]}",
            ))
        seen_state = state_of_type.setdefault(node.node_type, (node.state_type, node.id))
        if seen_state[0] != node.state_type:
            violations.append(Violation(
                f"node {node.id}",
                f"node_type {node.node_type!r} has state_type {node.state_type!r}, "
                f"but node {seen_state[1]} has {seen_state[0]!r}",
            ))

    arrow_ids = [a.id for a in net.arrows]
    if len(set(arrow_ids)) != len(arrow_ids):
        dupes = sorted(a for a, k in Counter(arrow_ids).items() if k > 1)
        violations.append(Violation("arrows", f"duplicate arrow ids {dupes}"))
    known = set(ids)
    for arrow in net.arrows:
        for end in ("head", "tail"):
            if getattr(arrow, end) not in known:
                violations.append(Violation(
                    f"arrow {arrow.id}", f"{end} {getattr(arrow, end)} is not a node"
                ))
    return violations


def _require_total(net: Network, kappa: Colouring) -> None:
    missing = [c for c in net.node_ids if c not in kappa]
    if missing:
        raise NetworkError(f"colouring is not total: nodes {missing} have no colour")


def input_multiset(net: Network, kappa: Colouring, c: int) -> InputMultiset:
    """The multiset {(type(e), kappa(T(e))) : e in I(c)}."""
    entries = sorted((a.arrow_type, kappa[a.tail]) for a in net.inputs(c))
    return InputMultiset(node=c, entries=tuple(entries))


def is_balanced(net: Network, kappa: Colouring) -> BalanceVerdict:
    """Balance test by multiset equality inside every colour class."""
    _require_total(net, kappa)
    for colour, members in kappa.restrict(net.node_ids).classes.items():
        first = members[0]
        first_inputs = input_multiset(net, kappa, first)
        for other in members[1:]:
            other_inputs = input_multiset(net, kappa, other)
            if net.node(first).node_type != net.node(other).node_type:
                return BalanceVerdict(
                    False, (first, other), (first_inputs, other_inputs),
                    f"colour {colour!r} mixes node types",
                )
            if first_inputs.entries != other_inputs.entries:
                return BalanceVerdict(
                    False, (first, other), (first_inputs, other_inputs),
                    f"colour {colour!r} has differing input multisets",
                )
    return BalanceVerdict(True)


def _canonical(signatures: Mapping[int, object]) -> dict[int, int]:
    labels: dict[object, int] = {}
    return {c: labels.setdefault(signatures[c], len(labels)) for c in sorted(signatures)}


def coarsest_balanced(net: Network, seed: Colouring) -> Colouring:
    """Coarsest balanced colouring that refines both `seed` and the node types.

    Iterated refinement by input multisets until the number of classes is stable.
    """
    _require_total(net, seed)
    part = _canonical({c: (seed[c], net.node(c).node_type) for c in net.node_ids})
    rounds = 0
    while True:
        rounds += 1
        signatures = {
            c: (part[c], tuple(sorted(Counter(
                (a.arrow_type, part[a.tail]) for a in net.inputs(c)
            ).items())))
            for c in net.node_ids
        }
        refined = _canonical(signatures)
        if len(set(refined.values())) == len(set(part.values())):
            break
        part = refined
    logger.debug("Partition refinement stabilised after %d rounds", rounds)

    # Keep seed names for unsplit classes.
    assignment: dict[int, str] = {}
    for colour, members in seed.restrict(net.node_ids).classes.items():
        blocks: dict[int, list[int]] = {}
        for c in members:
            blocks.setdefault(part[c], []).append(c)
        if len(blocks) == 1:
            for c in members:
                assignment[c] = colour
        else:
            for i, block in enumerate(sorted(blocks.values(), key=min), start=1):
                for c in block:
                    assignment[c] = f"{colour}.{i}"
    return Colouring(assignment)


def colour_order(kappa: Colouring, ids: Iterable[int]) -> tuple[str, ...]:
    """Colours used on `ids`, ordered by their minimum node; quotient node i is entry i-1."""
    return kappa.restrict(ids).colours


def quotient(net: Network, kappa: Colouring) -> tuple[Network, dict[int, int]]:
    """Quotient network with one node per colour, plus the node map."""
    verdict = is_balanced(net, kappa)
    if not verdict.balanced:
        raise UnbalancedColouringError(
            f"cannot form a quotient: {verdict.reason} (witness {verdict.witness})"
        )
    order = colour_order(kappa, net.node_ids)
    index = {colour: i for i, colour in enumerate(order, start=1)}
    node_map = {c: index[kappa[c]] for c in net.node_ids}

    nodes = []
    arrows = []
    for colour in order:
        rep = net.node(kappa.representative(colour))
        q = index[colour]
        nodes.append(Node(q, rep.node_type, rep.state_type, rep.state_dim))
        for arrow in net.inputs(rep.id):
            arrows.append(Arrow(len(arrows) + 1, arrow.arrow_type, q, node_map[arrow.tail]))
    return Network(tuple(nodes), tuple(arrows)), node_map


def _is_cyclic(net: Network, members: frozenset[int]) -> bool:
    if len(members) > 1:
        return True
    (c,) = tuple(members)
    return any(a.tail == c for a in net.inputs(c))


def path_components(net: Network) -> ComponentGraph:
    """Strongly connected components, their condensation and a compatible total order."""
    graph = nx.DiGraph()
    graph.add_nodes_from(net.node_ids)
    graph.add_edges_from((a.tail, a.head) for a in net.arrows)
    condensed = nx.condensation(graph)
    members = nx.get_node_attributes(condensed, "members")
    topo = list(nx.lexicographical_topological_sort(condensed, key=lambda k: min(members[k])))
    renumber = {k: i for i, k in enumerate(topo)}

    components = tuple(frozenset(members[k]) for k in topo)
    dag_edges = tuple(sorted((renumber[u], renumber[v]) for u, v in condensed.edges()))
    order = tuple(c for comp in components for c in sorted(comp))
    return ComponentGraph(
        components=components,
        dag_edges=dag_edges,
        compatible_order=order,
        cyclic=tuple(_is_cyclic(net, comp) for comp in components),
    )


def upstream_core(net: Network) -> tuple[int, ...]:
    """Nodes on a directed loop, together with everything upstream of them."""
    comps = path_components(net)
    looped = {c for comp, cyc in zip(comps.components, comps.cyclic) if cyc for c in comp}
    graph = net.digraph()
    core = set(looped)
    for c in looped:
        core |= nx.ancestors(graph, c)
    return tuple(sorted(core))


# --- JSON network files -------------------------------------------------------


@dataclass(frozen=True)
class NetworkDocument:
    """Parsed network file: the network plus its optional annotations."""

    network: Network
    colouring: Optional[Colouring] = None
    cpg: Optional[tuple[int, ...]] = None
    phases: Optional[Mapping[int, str]] = None
    representatives: Optional[Mapping[int, int]] = None


def _field(obj: Mapping, key: str, where: str, kind: type):
    if not isinstance(obj, Mapping) or key not in obj:
        raise NetworkError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise NetworkError(f"{where}.{key}: expected an integer, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise NetworkError(f"{where}.{key}: expected a string, got {value!r}")
    return value


def _list(data: Mapping, key: str) -> list:
    value = data.get(key, [])
    if not isinstance(value, list):
        raise NetworkError(f"{key}: expected a list, got {value!r}")
    return value


def _id_map(data: Mapping, key: str, convert: Callable[[object], object]) -> Optional[dict]:
    if key not in data:
        return None
    value = data[key]
    if not isinstance(value, Mapping):
        raise NetworkError(f"{key}: expected an object keyed by node id, got {value!r}")
    try:
        return {int(k): convert(v) for k, v in value.items()}
    except (TypeError, ValueError) as e:
        raise NetworkError(f"{key}: {e}") from None


def network_from_dict(data: Mapping) -> NetworkDocument:
    if not isinstance(data, Mapping):
        raise NetworkError("top level: expected a JSON object")
    nodes = []
    for i, raw in enumerate(_list(data, "nodes")):
        where = f"nodes[{i}]"
        nodes.append(Node(
            id=_field(raw, "id", where, int),
            node_type=_field(raw, "node_type", where, str),
            state_type=_field(raw, "state_type", where, str),
            state_dim=_field(raw, "state_dim", where, int),
        ))
    arrows = []
    for i, raw in enumerate(_list(data, "arrows")):
        where = f"arrows[{i}]"
        arrows.append(Arrow(
            id=_field(raw, "id", where, int),
            arrow_type=_field(raw, "arrow_type", where, str),
            head=_field(raw, "head", where, int),
            tail=_field(raw, "tail", where, int),
        ))
    net = Network(tuple(nodes), tuple(arrows))

    assignment = _id_map(data, "colouring", str)
    colouring = Colouring(assignment) if assignment is not None else None
    cpg = None
    if "cpg" in data:
        cpg_ids = _list(data, "cpg")
        if not all(isinstance(c, int) and not isinstance(c, bool) for c in cpg_ids):
            raise NetworkError(f"cpg: expected node ids, got {cpg_ids!r}")
        cpg = tuple(cpg_ids)
    phases = _id_map(data, "phases", str)
    reps = _id_map(data, "representatives", int)
    return NetworkDocument(net, colouring, cpg, phases, reps)


def network_to_dict(
    net: Network,
    colouring: Optional[Colouring] = None,
    cpg: Optional[Iterable[int]] = None,
    phases: Optional[Mapping[int, str]] = None,
    representatives: Optional[Mapping[int, int]] = None,
) -> dict:
    data: dict = {
        "nodes": [
            {"id": n.id, "node_type": n.node_type, "state_type": n.state_type,
             "state_dim": n.state_dim}
            for n in net.nodes
        ],
        "arrows": [
            {"id": a.id, "arrow_type": a.arrow_type, "head": a.head, "tail": a.tail}
            for a in net.arrows
        ],
    }
    if colouring is not None:
        data["colouring"] = {str(c): colouring[c] for c in net.node_ids}
    if cpg is not None:
        data["cpg"] = sorted(cpg)
    if phases is not None:
        data["phases"] = {str(c): phases[c] for c in sorted(phases)}
    if representatives is not None:
        data["representatives"] = {str(c): representatives[c] for c in sorted(representatives)}
    return data


def read_network(path: str | Path) -> NetworkDocument:
    """Load a network file. JSON syntax errors propagate with their line and column."""
    text = Path(path).read_text(encoding="utf-8")
    return network_from_dict(json.loads(text))
