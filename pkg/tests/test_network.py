"""Tests for networks, balance, quotients and path components."""

import json
import os
import tempfile

import pytest

from src.network import (
    Arrow,
    Colouring,
    Network,
    NetworkError,
    Node,
    UnbalancedColouringError,
    UnknownNodeError,
    coarsest_balanced,
    input_multiset,
    is_balanced,
    network_from_dict,
    network_to_dict,
    path_components,
    quotient,
    read_network,
    upstream_core,
    validate_network,
)
from tests.conftest import FIXTURES, chain_network, ring_network


class TestValidateNetwork:
    """Tests for structural validation."""

    def test_chain7_is_valid(self, chain7):
        """The seven-node chain should have no violations."""
        assert validate_network(chain7) == []

    def test_sparse_ids_rejected(self):
        """Node ids must be 1..n."""
        net = Network((Node(1, "cell", "plane", 2), Node(3, "cell", "plane", 2)))
        assert any("dense" in v.message for v in validate_network(net))

    def test_state_dim_mismatch_rejected(self):
        """Nodes sharing a state type must share its dimension."""
        net = Network((Node(1, "cell", "plane", 2), Node(2, "other", "plane", 3)))
        assert any("state_dim" in v.message for v in validate_network(net))

    def test_dangling_arrow_rejected(self):
        """Arrow endpoints must be nodes."""
        net = Network((Node(1, "cell", "plane", 2),), (Arrow(1, "edge", 1, 5),))
        violations = validate_network(net)
        assert violations[0].subject == "arrow 1"

    def test_empty_network_is_valid(self):
        """A network with no nodes passes validation."""
        assert validate_network(Network(())) == []

    def test_node_type_must_fix_state_type(self):
        """Nodes of one node type share a state type."""
        net = Network((Node(1, "cell", "plane", 2), Node(2, "cell", "disc", 2)))
        assert any("node_type" in v.message for v in validate_network(net))

    def test_unknown_node_lookup(self, chain7):
        """Looking up a missing node raises UnknownNodeError."""
        with pytest.raises(UnknownNodeError):
            chain7.node(42)


class TestBalance:
    """Tests for the balance check."""

    def test_chain7_wgb_balanced(self, chain7, wgb):
        """W/G/B on the chain is balanced."""
        assert is_balanced(chain7, wgb).balanced

    def test_trivial_colouring_balanced(self, chain7):
        """Every network is balanced for the trivial colouring."""
        assert is_balanced(chain7, Colouring.trivial(chain7)).balanced

    def test_uniform_colouring_balanced_for_regular_network(self, chain7):
        """All nodes have one input, so a single colour is balanced."""
        assert is_balanced(chain7, Colouring.uniform(chain7)).balanced

    def test_merged_colours_give_witness(self):
        """Merging colours of nodes 1 and 2 breaks balance with witness (1, 2)."""
        doc = read_network(FIXTURES / "merged12.json")
        verdict = is_balanced(doc.network, doc.colouring)
        assert not verdict.balanced
        assert verdict.witness == (1, 2)
        first, second = verdict.multisets
        assert first.entries == (("edge", "B"),)
        assert second.entries == (("edge", "W"),)

    def test_parallel_arrows_counted(self):
        """A double arrow and a single arrow are different multisets."""
        nodes = tuple(Node(c, "cell", "plane", 2) for c in (1, 2, 3))
        arrows = (
            Arrow(1, "edge", 2, 1),
            Arrow(2, "edge", 2, 1),
            Arrow(3, "edge", 3, 1),
        )
        net = Network(nodes, arrows)
        kappa = Colouring({1: "a", 2: "b", 3: "b"})
        verdict = is_balanced(net, kappa)
        assert not verdict.balanced
        assert len(input_multiset(net, kappa, 2)) == 2

    def test_arrow_types_distinguished(self):
        """Inputs of different arrow types are not interchangeable."""
        nodes = tuple(Node(c, "cell", "plane", 2) for c in (1, 2, 3))
        arrows = (Arrow(1, "fast", 2, 1), Arrow(2, "slow", 3, 1))
        net = Network(nodes, arrows)
        assert not is_balanced(net, Colouring({1: "a", 2: "b", 3: "b"})).balanced

    def test_chain_node_multiset(self, chain7, wgb):
        """Node 4 has a single input from a B node."""
        assert input_multiset(chain7, wgb, 4).entries == (("edge", "B"),)

    def test_node_without_inputs(self):
        """A node with no inputs has an empty multiset."""
        net = Network((Node(1, "cell", "plane", 2),))
        assert len(input_multiset(net, Colouring({1: "a"}), 1)) == 0

    def test_multiset_of_unknown_node(self, chain7, wgb):
        """Asking for a node outside the network fails."""
        with pytest.raises(UnknownNodeError):
            input_multiset(chain7, wgb, 8)

    def test_partial_colouring_rejected(self, chain7):
        """A colouring must cover every node."""
        with pytest.raises(NetworkError):
            is_balanced(chain7, Colouring({1: "W"}))


class TestCoarsestBalanced:
    """Tests for partition refinement."""

    def test_uniform_seed_stays_uniform(self, chain7):
        """Every node has one input from the single colour, so nothing splits."""
        result = coarsest_balanced(chain7, Colouring.uniform(chain7, "one"))
        assert set(result.assignment.values()) == {"one"}

    def test_wgb_seed_is_fixed_point(self, chain7, wgb):
        """A balanced seed comes back unchanged, names included."""
        assert coarsest_balanced(chain7, wgb).assignment == wgb.assignment

    def test_refines_unbalanced_seed(self, chain7):
        """Splitting CPG from chain forces every chain node apart."""
        seed = Colouring({c: "a" if c <= 3 else "b" for c in range(1, 8)})
        result = coarsest_balanced(chain7, seed)
        assert is_balanced(chain7, result).balanced
        assert result.assignment == {1: "a", 2: "a", 3: "a", 4: "b.1", 5: "b.2", 6: "b.3", 7: "b.4"}

    def test_idempotent(self, chain7):
        """Refining a refined colouring changes nothing."""
        seed = Colouring({c: "a" if c in (1, 4) else "b" for c in range(1, 8)})
        once = coarsest_balanced(chain7, seed)
        assert coarsest_balanced(chain7, once).assignment == once.assignment

    def test_trivial_seed_stays_trivial(self, chain7):
        """The one-colour seed is already balanced."""
        result = coarsest_balanced(chain7, Colouring.trivial(chain7))
        assert result.assignment == Colouring.trivial(chain7).assignment

    def test_node_types_split(self):
        """Nodes of different types never share a colour."""
        net = Network((Node(1, "cell", "plane", 2), Node(2, "pump", "plane", 2)))
        result = coarsest_balanced(net, Colouring.uniform(net))
        assert result[1] != result[2]


class TestQuotient:
    """Tests for quotient networks."""

    def test_chain7_quotient_is_ring(self, chain7, wgb):
        """The W/G/B quotient of the chain is the three-node ring."""
        q, node_map = quotient(chain7, wgb)
        assert len(q) == 3
        assert node_map == {1: 1, 2: 2, 3: 3, 4: 1, 5: 2, 6: 3, 7: 1}
        assert sorted((a.head, a.tail) for a in q.arrows) == [(1, 3), (2, 1), (3, 2)]

    def test_uniform_quotient_is_self_loop(self, chain7):
        """One colour collapses the chain to a single node with a self-loop."""
        q, _ = quotient(chain7, Colouring.uniform(chain7))
        assert len(q) == 1
        assert [(a.head, a.tail) for a in q.arrows] == [(1, 1)]

    def test_trivial_quotient_is_isomorphic(self, chain7):
        """The trivial colouring gives the network back up to relabelling."""
        q, node_map = quotient(chain7, Colouring.trivial(chain7))
        assert len(q) == len(chain7)
        original = sorted((node_map[a.head], node_map[a.tail]) for a in chain7.arrows)
        assert sorted((a.head, a.tail) for a in q.arrows) == original

    def test_unbalanced_rejected(self):
        """An unbalanced colouring has no quotient."""
        doc = read_network(FIXTURES / "merged12.json")
        with pytest.raises(UnbalancedColouringError):
            quotient(doc.network, doc.colouring)


class TestPathComponents:
    """Tests for SCCs and compatible orders."""

    def test_chain7_components(self, chain7):
        """The ring is one component and each chain node its own."""
        comps = path_components(chain7)
        assert comps.components[0] == frozenset({1, 2, 3})
        assert comps.components[1:] == tuple(frozenset({c}) for c in (4, 5, 6, 7))
        assert comps.dag_edges == ((0, 1), (1, 2), (2, 3), (3, 4))
        assert comps.compatible_order == (1, 2, 3, 4, 5, 6, 7)
        assert comps.cyclic == (True, False, False, False, False)

    def test_arrows_respect_order(self, chain7):
        """Tails come no later than heads outside cyclic components."""
        comps = path_components(chain7)
        position = {c: i for i, c in enumerate(comps.compatible_order)}
        for arrow in chain7.arrows:
            if comps.component_of(arrow.head) != comps.component_of(arrow.tail):
                assert position[arrow.tail] < position[arrow.head]

    def test_acyclic_chain_has_singletons(self):
        """Without cycles every component is one node."""
        nodes = tuple(Node(c, "cell", "plane", 2) for c in (1, 2, 3))
        net = Network(nodes, (Arrow(1, "edge", 2, 1), Arrow(2, "edge", 3, 2)))
        comps = path_components(net)
        assert comps.components == (frozenset({1}), frozenset({2}), frozenset({3}))
        assert comps.cyclic == (False, False, False)
        assert upstream_core(net) == ()

    def test_self_loop_is_cyclic(self):
        """A single node with a self-loop counts as a loop."""
        net = Network((Node(1, "cell", "plane", 2),), (Arrow(1, "edge", 1, 1),))
        assert path_components(net).cyclic == (True,)

    def test_upstream_core(self, chain7):
        """The CPG of the chain is the ring."""
        assert upstream_core(chain7) == (1, 2, 3)


class TestNetworkFiles:
    """Tests for JSON network files."""

    def test_round_trip(self, chain7, wgb):
        """Writing and reading a network keeps nodes, arrows and colours."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "net.json")
            with open(path, "w") as f:
                json.dump(network_to_dict(chain7, wgb, (1, 2, 3)), f)
            doc = read_network(path)
        assert doc.network == chain7
        assert doc.colouring.assignment == wgb.assignment
        assert doc.cpg == (1, 2, 3)

    def test_missing_field_reports_location(self):
        """A node without state_dim is reported with its position."""
        data = {"nodes": [{"id": 1, "node_type": "cell", "state_type": "plane"}]}
        with pytest.raises(NetworkError, match=r"nodes\[0\]"):
            network_from_dict(data)

    @pytest.mark.parametrize("data, where", [
        ({"nodes": 5}, "nodes"),
        ({"arrows": {"id": 1}}, "arrows"),
        ({"nodes": [], "cpg": 5}, "cpg"),
        ({"nodes": [], "cpg": ["1"]}, "cpg"),
        ({"nodes": [], "phases": 5}, "phases"),
        ({"nodes": [], "colouring": ["W"]}, "colouring"),
        ({"nodes": [], "representatives": {"1": "x"}}, "representatives"),
    ])
    def test_wrongly_typed_fields_name_the_field(self, data, where):
        """Parseable files with wrongly typed fields raise NetworkError naming the field."""
        with pytest.raises(NetworkError, match=where):
            network_from_dict(data)

    def test_truncated_file_raises_decode_error(self):
        """Broken JSON surfaces the parser error with line and column."""
        with pytest.raises(json.JSONDecodeError) as info:
            read_network(FIXTURES / "truncated.json")
        assert info.value.lineno >= 1

    def test_ring_fixture(self):
        """The ring fixture matches the in-code ring."""
        assert read_network(FIXTURES / "ring.json").network == ring_network()

    def test_chain7_fixture(self):
        """The golden chain fixture matches the in-code chain."""
        assert read_network(FIXTURES / "chain7.json").network == chain_network(4)
