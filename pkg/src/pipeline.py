"""Orchestration of a full lift analysis."""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from src.database import Database
from src.dynamics import (
    IntegratorConfig,
    PeriodicOrbit,
    assemble,
    declared_orbit,
    find_periodic_orbit,
    initial_state,
    lift_orbit,
)
from src.lift import PhaseAssignment, verify_feedforward_lift
from src.models import ModelFile
from src.network import NetworkDocument, NetworkError, upstream_core
from src.reports import orbit_metadata, write_json, write_multipliers_csv, write_orbit_csv
from src.stability import (
    FloquetReport,
    LiapunovProbeReport,
    TransverseSubspaceReport,
    TravellingWaveReport,
    decomposition_check,
    liapunov_probe,
    transverse_subspace_report,
    travelling_wave_check,
)

logger = logging.getLogger("netlab.pipeline")


@dataclass
class AnalysisResult:
    verdict: str
    paradox: bool
    cpg_nodes: tuple[int, ...]
    cpg_orbit: PeriodicOrbit
    lifted_orbit: PeriodicOrbit
    floquet: FloquetReport
    subspace: TransverseSubspaceReport
    probe: Optional[LiapunovProbeReport] = None
    wave: Optional[TravellingWaveReport] = None
    outputs: list[Path] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "paradox": self.paradox,
            "period": self.floquet.period,
            "cpg_nodes": list(self.cpg_nodes),
            "cpg_stable": self.floquet.cpg_stable,
            "lift_stable": self.floquet.lift_stable,
            "pointwise_transversely_stable": self.subspace.transversely_stable,
            "max_residual": self.floquet.match.max_residual,
            "cpg_closure_residual": self.cpg_orbit.closure_residual,
        }


def inputs_digest(*paths: str | Path) -> str:
    """SHA-256 over the input files, in the order given."""
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


class Analyzer:
    """Runs the analyze pipeline: orbit, lift, decomposition, diagnostics, outputs."""

    def __init__(
        self,
        config: IntegratorConfig,
        on_progress: Optional[Callable[[str], None]] = None,
        db: Optional[Database] = None,
    ):
        self.config = config
        self.on_progress = on_progress
        self.db = db

    def _log(self, message: str):
        """Log progress message."""
        logger.debug(message)
        if self.on_progress:
            self.on_progress(message)

    def run(
        self,
        doc: NetworkDocument,
        model_file: ModelFile,
        params: dict,
        grid: int = 200,
        probe: bool = False,
        seed: int = 0,
        out_dir: Optional[str | Path] = None,
    ) -> AnalysisResult:
        net = doc.network
        if doc.colouring is None:
            raise NetworkError("analyze needs a colouring in the network file")
        kappa = doc.colouring
        cpg_nodes = doc.cpg if doc.cpg is not None else upstream_core(net)
        if not cpg_nodes:
            raise NetworkError("network has no loops, so there is no CPG to analyse")
        check = verify_feedforward_lift(net, cpg_nodes, kappa)
        if not check.verified:
            raise NetworkError(
                "not a feedforward lift: " + "; ".join(str(v) for v in check.violations)
            )
        self._log(f"CPG nodes {list(cpg_nodes)}; {len(net) - len(cpg_nodes)} feedforward nodes")

        cpg_net = net.induced(cpg_nodes)
        cpg_system = assemble(cpg_net, model_file.models, params)
        lift_system = assemble(net, model_file.models, params)

        start = initial_state(cpg_net, model_file.seed)
        if cpg_system.nonautonomous or model_file.declared_period is not None:
            self._log("Using the declared rest point as a periodic orbit...")
            cpg_orbit = declared_orbit(cpg_system, start, model_file.declared_period)
        else:
            self._log("Searching for a CPG periodic orbit...")
            cpg_orbit = find_periodic_orbit(cpg_system, start, self.config)
        self._log(f"CPG orbit period T = {cpg_orbit.period:.10g}")

        lifted = lift_orbit(cpg_orbit, kappa, net, source=cpg_net)
        self._log("Computing monodromy matrices and multipliers...")
        floquet = decomposition_check(lift_system, lifted, cpg_system, cpg_orbit, kappa, self.config)
        self._log(f"Decomposition matched, worst residual {floquet.match.max_residual:.3g}")

        subspace = transverse_subspace_report(cpg_system, cpg_orbit, grid=grid)
        paradox = subspace.transversely_stable and not floquet.lift_stable
        if paradox:
            logger.warning("Pointwise-stable internal dynamics but the lift is Floquet unstable")

        probe_report = None
        if probe:
            self._log("Running Liapunov probes...")
            probe_report = liapunov_probe(lift_system, lifted, cpg_nodes, seed=seed, config=self.config)

        wave = None
        if doc.phases is not None and doc.representatives is not None:
            self._log("Checking the travelling-wave pattern...")
            phases = PhaseAssignment.from_strings(doc.phases, doc.representatives)
            wave = travelling_wave_check(lift_system, lifted, phases, cpg_nodes, grid=grid, config=self.config)

        result = AnalysisResult(
            verdict=floquet.verdict,
            paradox=paradox,
            cpg_nodes=tuple(cpg_nodes),
            cpg_orbit=cpg_orbit,
            lifted_orbit=lifted,
            floquet=floquet,
            subspace=subspace,
            probe=probe_report,
            wave=wave,
        )
        if out_dir is not None:
            result.outputs = self.write_outputs(result, cpg_net, net, Path(out_dir), seed)
        return result

    def write_outputs(self, result: AnalysisResult, cpg_net, net, out_dir: Path, seed: int) -> list[Path]:
        samples = self.config.samples_per_period
        floquet = result.floquet
        groups = {"full": floquet.full, "cpg": floquet.cpg}
        for c in sorted(floquet.transverse):
            groups[f"transverse:{c}"] = floquet.transverse[c]
        reports = {
            "summary.json": result.summary(),
            "floquet.json": floquet.to_dict(),
            "transverse_subspace.json": result.subspace.to_dict(),
            "cpg_orbit.json": orbit_metadata(result.cpg_orbit),
            "lifted_orbit.json": orbit_metadata(result.lifted_orbit),
        }
        if result.probe is not None:
            reports["probe.json"] = result.probe.to_dict()
        if result.wave is not None:
            reports["wave.json"] = result.wave.to_dict()

        written = [write_json({**data, "seed": seed}, out_dir / name) for name, data in reports.items()]
        written += [
            write_orbit_csv(result.cpg_orbit, cpg_net, out_dir / "cpg_orbit.csv", samples),
            write_orbit_csv(result.lifted_orbit, net, out_dir / "lifted_orbit.csv", samples),
            write_multipliers_csv(groups, out_dir / "multipliers.csv"),
        ]
        self._log(f"Wrote {len(written)} files to {out_dir}")
        return written

    def record(self, run_id: int, result: AnalysisResult):
        """Store the verdict and multipliers of a finished run in the ledger."""
        if self.db is None:
            return
        self.db.add_multipliers(run_id, "full", result.floquet.full)
        self.db.add_multipliers(run_id, "cpg", result.floquet.cpg)
        self.db.add_multipliers(run_id, "predicted", result.floquet.predicted)
        self.db.complete_run(
            run_id, "completed", verdict=result.verdict, period=result.floquet.period,
            max_residual=result.floquet.match.max_residual,
        )
