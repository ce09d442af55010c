"""Tests for monodromy, multiplier matching and the stability diagnostics."""

import numpy as np
import pytest
from scipy import linalg
from scipy.integrate import quad

from src.dynamics import (
    PeriodicOrbit,
    assemble,
    declared_orbit,
    find_periodic_orbit,
    initial_state,
    integrate,
    lift_orbit,
)
from src.lift import PhaseAssignment
from src.models import read_model_file, read_params
from src.network import read_network
from src.stability import (
    DecompositionError,
    decomposition_check,
    floquet_multipliers,
    liapunov_probe,
    markus_yamabe_demo,
    match_multisets,
    monodromy,
    sort_multipliers,
    switching_demo,
    switching_product,
    transverse_floquet_node,
    transverse_subspace_report,
    travelling_wave_check,
)
from tests.conftest import FIXTURES, chain_colouring, chain_network

SWITCH_PRODUCT = np.array([[0.367879, 0.666852], [0.666852, 1.455395]])
SWITCH_EIGENVALUES = (1.772082, 0.051193)


@pytest.fixture(scope="module")
def sl_report(sl_setup, config):
    s = sl_setup
    return decomposition_check(s["lift_system"], s["lifted"], s["cpg_system"], s["orbit"], s["kappa"], config)


@pytest.fixture(scope="module")
def switch_setup():
    """Switched linear node with a self-loop driving a two-node chain, at rest at the origin."""
    doc = read_network(FIXTURES / "switch_chain.json")
    models = read_model_file(FIXTURES / "switch_model.json")
    params = read_params(FIXTURES / "switch_params.json")
    cpg_net = doc.network.induced(doc.cpg)
    cpg_system = assemble(cpg_net, models.models, params)
    orbit = declared_orbit(cpg_system, np.zeros(2), models.declared_period)
    return {
        "doc": doc,
        "cpg_system": cpg_system,
        "lift_system": assemble(doc.network, models.models, params),
        "orbit": orbit,
        "lifted": lift_orbit(orbit, doc.colouring, doc.network, source=cpg_net),
    }


class TestSortAndMatch:
    """Tests for ordering and pairing multiplier multisets."""

    def test_sort_order(self):
        """Largest modulus first; equal moduli by increasing angle."""
        assert sort_multipliers([0.5, -2.0, 1j, 1.0]) == [-2.0, 1.0, 1j, 0.5]

    def test_permuted_multisets_match(self):
        """Order does not matter."""
        observed = [0.2, 1.0, 0.5 + 0.1j, 0.5 - 0.1j]
        predicted = [0.5 - 0.1j, 1.0, 0.2, 0.5 + 0.1j]
        result = match_multisets(observed, predicted)
        assert result.matched
        assert result.max_residual < 1e-15
        assert result.method == "optimal"

    def test_split_double_value_matches_by_cluster(self):
        """A defective double multiplier splits numerically; the pair's mean still matches."""
        result = match_multisets([2.0 + 1e-4, 2.0 - 1e-4], [2.0, 2.0])
        assert max(result.residuals) > 1e-5
        assert result.matched

    def test_different_multisets(self):
        """A moved multiplier breaks the match."""
        assert not match_multisets([1.0, 0.5], [1.0, 0.6]).matched

    def test_size_mismatch(self):
        """Multisets of different sizes never match."""
        with pytest.raises(DecompositionError, match="sizes differ"):
            match_multisets([1.0], [1.0, 0.5])

    def test_companion_matrix_roots(self):
        """Eigenvalues of a companion matrix come back as its polynomial's roots."""
        roots = [2.0, 0.5, -0.25, 0.3 + 0.4j, 0.3 - 0.4j]
        found = floquet_multipliers(linalg.companion(np.poly(roots)))
        assert match_multisets(found, roots, tol=1e-10).matched
        np.testing.assert_allclose([abs(z) for z in found], [abs(z) for z in sort_multipliers(roots)], atol=1e-10)

    def test_clusters_are_transitive(self):
        """Values chained by near neighbours form one cluster; a distant value its own."""
        predicted = [1.0, 1.0009, 1.0018, 0.5]
        result = match_multisets([1.0018, 0.5, 1.0, 1.0009], predicted)
        assert len(result.cluster_residuals) == 2
        assert result.matched


class TestStuartLandauLift:
    """Decomposition on the rotating wave of the three-node ring lifted to seven nodes."""

    def test_multiset_matches(self, sl_report):
        """Fourteen lifted multipliers match the CPG and transverse prediction."""
        assert len(sl_report.full) == 14
        assert sl_report.match.matched
        assert sl_report.match.max_residual < 1e-5

    def test_trivial_multiplier(self, sl_report):
        """The flow direction gives a multiplier at 1."""
        assert abs(sl_report.full[sl_report.trivial_index] - 1.0) < 1e-6
        assert abs(sl_report.cpg[sl_report.cpg_trivial_index] - 1.0) < 1e-6

    def test_lift_stable(self, sl_report):
        """A stable CPG with contracting chain nodes gives LIFT_STABLE."""
        assert sl_report.cpg_stable
        assert sl_report.verdict == "LIFT_STABLE"
        assert all(abs(z) < 1.0 for z in sl_report.transverse_by_colour["W"])

    def test_liouville_residual_small(self, sl_setup, config):
        """Monodromy determinant agrees with the trace integral."""
        mono = monodromy(sl_setup["cpg_system"], sl_setup["orbit"], config)
        assert mono.liouville_residual < 1e-5

    def test_transverse_same_for_every_copy(self, sl_report, sl_setup, config):
        """Nodes 4 and 7 share colour W, so their internal multipliers agree with W's."""
        expected = sl_report.transverse_by_colour["W"]
        for node in (4, 7):
            values = transverse_floquet_node(sl_setup["lift_system"], sl_setup["lifted"], node, config)
            assert match_multisets(values, expected, tol=1e-6).matched

    def test_report_serialises(self, sl_report):
        """The report flattens to JSON-ready data keyed by string node ids."""
        data = sl_report.to_dict()
        assert data["verdict"] == "LIFT_STABLE"
        assert len(data["full"]) == 14
        assert set(data["transverse"]) == {"4", "5", "6", "7"}

    @pytest.mark.slow
    @pytest.mark.parametrize("length", [1, 2, 3, 4])
    def test_chain_lengths(self, length, sl_setup, config):
        """Every chain length adds two multipliers per node and still matches."""
        net = chain_network(length)
        lifted = lift_orbit(sl_setup["orbit"], chain_colouring(length), net, source=sl_setup["cpg_net"])
        report = decomposition_check(
            assemble(net, sl_setup["models"], sl_setup["params"]), lifted,
            sl_setup["cpg_system"], sl_setup["orbit"], chain_colouring(length), config,
        )
        assert len(report.full) == 6 + 2 * length
        assert report.match.matched


class TestScalarTransverse:
    """In one dimension the transverse multiplier has a closed form."""

    @pytest.mark.slow
    @pytest.mark.parametrize("trial", range(10))
    def test_matches_exponential_of_integral(self, trial, config):
        """rho = exp of the integral of the own derivative along the orbit."""
        rng = np.random.default_rng(trial)
        e, g = rng.uniform(0.4, 0.6), rng.uniform(3.5, 4.5)
        doc = read_network(FIXTURES / "scalar_chain7.json")
        models = read_model_file(FIXTURES / "ring_oscillator_model.json")
        cpg = doc.network.induced((1, 2, 3))
        system = assemble(cpg, models.models, {"e": e, "g": g})
        orbit = find_periodic_orbit(system, initial_state(cpg, models.seed), config)

        (rho,) = transverse_floquet_node(system, orbit, 1, config)
        integral, _ = quad(
            lambda t: -1.0 + e / np.cosh(orbit(t)[0]) ** 2, orbit.t0, orbit.t0 + orbit.period, limit=400
        )
        assert rho.real == pytest.approx(np.exp(integral), rel=1e-6)
        assert rho.imag == 0.0

    def test_pointwise_and_floquet_agree(self, config):
        """A scalar node that contracts at every instant also contracts over the period."""
        doc = read_network(FIXTURES / "scalar_chain7.json")
        models = read_model_file(FIXTURES / "ring_oscillator_model.json")
        params = read_params(FIXTURES / "ring_oscillator_params.json")
        cpg = doc.network.induced((1, 2, 3))
        system = assemble(cpg, models.models, params)
        orbit = find_periodic_orbit(system, initial_state(cpg, models.seed), config)
        pointwise = transverse_subspace_report(system, orbit, grid=100)
        assert pointwise.transversely_stable
        for c in cpg.node_ids:
            (rho,) = transverse_floquet_node(system, orbit, c, config)
            assert abs(rho) < 1.0


class TestSwitchingLift:
    """A stable CPG whose added nodes are Floquet unstable while pointwise stable."""

    def test_verdict_unstable(self, switch_setup, config):
        """The added nodes grow by about 1.77 per period."""
        s = switch_setup
        report = decomposition_check(
            s["lift_system"], s["lifted"], s["cpg_system"], s["orbit"], s["doc"].colouring, config
        )
        assert report.match.matched
        assert report.cpg_stable
        assert report.verdict == "LIFT_UNSTABLE"
        assert report.trivial_index is None
        assert abs(report.transverse_by_colour["S"][0]) == pytest.approx(SWITCH_EIGENVALUES[0], abs=1e-2)
        np.testing.assert_allclose(
            [abs(z) for z in report.cpg], [0.796, 0.023], atol=1e-3
        )

    def test_pointwise_stable(self, switch_setup):
        """Every frozen-time matrix has eigenvalues -0.5 and -0.7."""
        report = transverse_subspace_report(switch_setup["cpg_system"], switch_setup["orbit"], grid=100)
        assert report.transversely_stable
        assert report.max_real[1] == pytest.approx(-0.5)

    def test_probe_amplifies(self, switch_setup, config):
        """Perturbing an added node grows by roughly 1.77 per period."""
        report = liapunov_probe(
            switch_setup["lift_system"], switch_setup["lifted"], (1,),
            deltas=(1e-6,), horizon_periods=10, probes=2, seed=3, config=config,
        )
        assert report.worst(1e-6, "node:2") / 1e-6 > 10.0


class TestCounterexamples:
    """Tests for the two pointwise-stable counterexamples."""

    def test_markus_yamabe(self, config):
        """Multipliers match the closed form while frozen eigenvalues stay at -1/4."""
        report = markus_yamabe_demo(config)
        expected = report.extras["expected_multipliers"]
        for z, e in zip(report.multipliers, expected):
            assert z.real == pytest.approx(e, rel=1e-6)
            assert abs(z.imag) < 1e-8
        assert report.pointwise_max_real == pytest.approx(-0.25)
        assert report.extras["trace_deviation"] < 1e-12
        assert report.extras["growth_error"] < 1e-6
        assert report.paradox

    def test_switching_product(self):
        """The half-period product and its eigenvalues."""
        product, eigenvalues = switching_product()
        np.testing.assert_allclose(product, SWITCH_PRODUCT, atol=1e-5)
        np.testing.assert_allclose([z.real for z in eigenvalues], SWITCH_EIGENVALUES, atol=1e-5)

    def test_switching_demo(self, config):
        """The smoothed switch stays within a thousandth of the hard switch."""
        report = switching_demo(sigma=1e-4, config=config, grid=200)
        np.testing.assert_allclose([abs(z) for z in report.multipliers], SWITCH_EIGENVALUES, atol=1e-3)
        assert report.pointwise_stable
        assert report.floquet_unstable
        assert report.paradox


class TestProbes:
    """Tests for empirical Liapunov probes on the stable Stuart-Landau lift."""

    @pytest.fixture(scope="class")
    def probe_report(self, sl_setup, config):
        return liapunov_probe(
            sl_setup["lift_system"], sl_setup["lifted"], (1, 2, 3),
            deltas=(0.0, 1e-6, 1e-4), horizon_periods=1, probes=1, seed=7, config=config,
        )

    def test_zero_perturbation_stays_on_orbit(self, probe_report):
        """Delta zero reproduces the orbit."""
        assert probe_report.worst(0.0) < 1e-6

    def test_deviation_grows_with_delta(self, probe_report):
        """Larger perturbations give larger deviations."""
        assert probe_report.worst(1e-6) < probe_report.worst(1e-4)

    def test_node_sets(self, probe_report):
        """CPG, each added node alone, and all nodes jointly."""
        names = {e.node_set for e in probe_report.entries}
        assert names == {"cpg", "node:4", "node:5", "node:6", "node:7", "joint"}

    def test_bounded_amplification(self, probe_report):
        """Deviation stays proportional to delta on a stable lift."""
        amps = [e.amplification for e in probe_report.entries if e.delta == 1e-4]
        assert max(amps) < 100.0

    @pytest.mark.slow
    def test_ten_period_horizon(self, sl_setup, config):
        """Over ten periods the deviation orders with delta and stays proportional to it."""
        deltas = (1e-6, 1e-5, 1e-4)
        report = liapunov_probe(
            sl_setup["lift_system"], sl_setup["lifted"], (1, 2, 3),
            deltas=deltas, horizon_periods=10, probes=1, seed=7, config=config,
        )
        worst = [report.worst(d) for d in deltas]
        assert worst[0] < worst[1] < worst[2]
        assert all(e.amplification < 1e3 for e in report.entries)

    def test_same_seed_same_report(self, sl_setup, config, probe_report):
        """A fixed seed reproduces every entry."""
        again = liapunov_probe(
            sl_setup["lift_system"], sl_setup["lifted"], (1, 2, 3),
            deltas=(0.0, 1e-6, 1e-4), horizon_periods=1, probes=1, seed=7, config=config,
        )
        assert again.to_dict() == probe_report.to_dict()


class TestTravellingWave:
    """Tests for phase-shifted copies of the ring's rotating wave."""

    @pytest.fixture(scope="class")
    def phased(self, sl_setup):
        doc = read_network(FIXTURES / "chain7_phases.json")
        phases = PhaseAssignment.from_strings(doc.phases, doc.representatives)
        lifted = lift_orbit(sl_setup["orbit"], doc.colouring, doc.network, source=sl_setup["cpg_net"], phases=phases)
        return doc, phases, lifted

    def test_shifted_copies(self, sl_setup, phased, config):
        """Phase-shifted copies agree with their module node and share internal multipliers."""
        _, phases, lifted = phased
        report = travelling_wave_check(sl_setup["lift_system"], lifted, phases, (1, 2, 3), grid=100, config=config)
        assert report.max_residual < 1e-5
        assert report.consistent
        assert report.transverse_spread < 1e-4

    def test_reintegrated_orbit_keeps_pattern(self, sl_setup, phased, config):
        """Integrating the lifted system from the phased state reproduces the wave."""
        _, phases, lifted = phased
        traj = integrate(sl_setup["lift_system"], lifted.anchor, lifted.t0, lifted.t0 + lifted.period, config)
        orbit = PeriodicOrbit(lifted.period, traj)
        report = travelling_wave_check(sl_setup["lift_system"], orbit, phases, (1, 2, 3), grid=100, config=config)
        assert report.max_residual < 1e-5

    def test_wrong_phase_detected(self, sl_setup, phased, config):
        """Claiming node 5 lags by two thirds instead of one third breaks the check."""
        doc, phases, lifted = phased
        wrong = PhaseAssignment.from_strings({**doc.phases, 5: "2/3"}, doc.representatives)
        report = travelling_wave_check(sl_setup["lift_system"], lifted, wrong, (1, 2, 3), grid=100, config=config)
        assert not report.consistent
        assert report.residuals[5] > 0.1


@pytest.mark.slow
def test_fhn_synchronous_decomposition(config):
    """FitzHugh-Nagumo ring started in synchrony keeps the prediction on the seven-node chain."""
    doc = read_network(FIXTURES / "chain7.json")
    models = read_model_file(FIXTURES / "fhn_sync_model.json")
    params = read_params(FIXTURES / "fhn_params.json")
    cpg_net = doc.network.induced((1, 2, 3))
    cpg_system = assemble(cpg_net, models.models, params)
    orbit = find_periodic_orbit(cpg_system, initial_state(cpg_net, models.seed), config)
    lifted = lift_orbit(orbit, doc.colouring, doc.network, source=cpg_net)
    report = decomposition_check(
        assemble(doc.network, models.models, params), lifted, cpg_system, orbit, doc.colouring, config
    )
    assert report.match.matched
    assert len(report.full) == 14


FHN_PERIOD = 22.745


@pytest.fixture(scope="module")
def fhn_setup(config):
    """FitzHugh-Nagumo ring started from the splay seed, lifted onto the seven-node chain."""
    doc = read_network(FIXTURES / "chain7.json")
    models = read_model_file(FIXTURES / "fhn_model.json")
    params = read_params(FIXTURES / "fhn_params.json")
    cpg_net = doc.network.induced((1, 2, 3))
    cpg_system = assemble(cpg_net, models.models, params)
    orbit = find_periodic_orbit(cpg_system, initial_state(cpg_net, models.seed), config)
    return {
        "doc": doc,
        "cpg_net": cpg_net,
        "cpg_system": cpg_system,
        "lift_system": assemble(doc.network, models.models, params),
        "orbit": orbit,
        "lifted": lift_orbit(orbit, doc.colouring, doc.network, source=cpg_net),
        "models": models.models,
        "params": params,
    }


@pytest.mark.slow
class TestFitzHughNagumoWave:
    """The splay seed settles on the ring's rotating wave, which lifts stably."""

    @pytest.fixture(scope="class")
    def fhn_report(self, fhn_setup, config):
        s = fhn_setup
        return decomposition_check(
            s["lift_system"], s["lifted"], s["cpg_system"], s["orbit"], s["doc"].colouring, config
        )

    def test_period(self, fhn_setup):
        """The wave's period is about 22.745."""
        assert fhn_setup["orbit"].period == pytest.approx(FHN_PERIOD, rel=1e-3)

    def test_node_two_leads_node_one_by_a_third(self, fhn_setup):
        """x_2(t) = x_1(t + T/3) along the whole period."""
        orbit = fhn_setup["orbit"]
        offsets = fhn_setup["cpg_net"].offsets
        times = orbit.grid(200)
        ahead = orbit(times + orbit.period / 3)[:, offsets[1]]
        now = orbit(times)[:, offsets[2]]
        assert np.max(np.linalg.norm(now - ahead, axis=1)) < 1e-6

    def test_lift_stable(self, fhn_report):
        """Full multipliers match the prediction and the lift is stable."""
        assert len(fhn_report.full) == 14
        assert fhn_report.match.matched
        assert fhn_report.match.max_residual < 1e-5
        assert fhn_report.verdict == "LIFT_STABLE"

    def test_colours_share_transverse_multipliers(self, fhn_report):
        """W, G and B carry time shifts of one waveform, so their internal multipliers coincide."""
        by_colour = fhn_report.transverse_by_colour
        for colour in ("G", "B"):
            assert match_multisets(by_colour[colour], by_colour["W"], tol=1e-6).matched

    @pytest.mark.parametrize("length", [1, 2, 3, 4])
    def test_chain_lengths(self, length, fhn_setup, config):
        """Every chain length adds two multipliers per node and stays stable."""
        s = fhn_setup
        net = chain_network(length)
        lifted = lift_orbit(s["orbit"], chain_colouring(length), net, source=s["cpg_net"])
        report = decomposition_check(
            assemble(net, s["models"], s["params"]), lifted,
            s["cpg_system"], s["orbit"], chain_colouring(length), config,
        )
        assert len(report.full) == 6 + 2 * length
        assert report.match.matched
        assert report.verdict == "LIFT_STABLE"

    def test_phase_lift_survives_reintegration(self, fhn_setup, config):
        """After five periods from the phased anchor the chain still carries the shifted wave."""
        s = fhn_setup
        doc = read_network(FIXTURES / "chain7_phases.json")
        phases = PhaseAssignment.from_strings(doc.phases, doc.representatives)
        lifted = lift_orbit(s["orbit"], doc.colouring, doc.network, source=s["cpg_net"], phases=phases)
        period = lifted.period
        settle = integrate(s["lift_system"], lifted.anchor, lifted.t0, lifted.t0 + 5 * period, config)
        last = integrate(s["lift_system"], settle.final, settle.times[-1], settle.times[-1] + period, config)
        report = travelling_wave_check(
            s["lift_system"], PeriodicOrbit(period, last), phases, (1, 2, 3), grid=200, config=config
        )
        assert report.max_residual < 1e-5
        assert report.consistent
        assert report.transverse_spread < 1e-6
