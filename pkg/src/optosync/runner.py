"""Scenario execution: build an engine from a scenario, run, export.

Node construction, event wiring and CSV emission all iterate in sorted
or declared order, never hash order, so two runs of one scenario with
one seed are byte-identical on disk.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import metrics, ptp
from .clock import ClockState, NodeClock, PpsConfig, PpsSource
from .control import Agent, ControlChannel, Controller, FailureNotification
from .errors import IncompleteRecord, OptosyncError
from .fabric import (
    CommandMode,
    FpgaDriver,
    OpticalLink,
    OpticalSwitch,
    PhotodiodeMonitor,
)
from .scenario import Scenario, SyncSpec
from .simcore import Engine, MS, SEC, SimTime

WINDOW_SUBMIT_PHASE_PS = SEC // 2  # windows are armed mid-second for the next edge


@dataclass
class RunReport:
    """Everything needed to identify, interpret and replay one run."""

    scenario_id: str
    experiment: str
    seed: int
    scenario_sha256: str
    headlines: dict = field(default_factory=dict)
    csv_paths: dict = field(default_factory=dict)
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "experiment": self.experiment,
            "seed": self.seed,
            "scenario_sha256": self.scenario_sha256,
            "headlines": self.headlines,
            "csv_paths": {k: str(v) for k, v in self.csv_paths.items()},
            "wall_seconds": self.wall_seconds,
        }


class _Site:
    """One built node: clock plus optional switch hardware."""

    def __init__(self, node_spec, engine: Engine):
        self.spec = node_spec
        self.nclock = NodeClock(
            ClockState(
                offset_ps=node_spec.clock.offset_ps,
                drift_ppb=node_spec.clock.drift_ppb,
            ),
            PpsConfig(),
        )
        self.switch: Optional[OpticalSwitch] = None
        self.fpga: Optional[FpgaDriver] = None
        if node_spec.switch is not None:
            self.switch = OpticalSwitch(
                node=node_spec.node_id,
                rise_ps=node_spec.switch.rise_ps,
                initial_port=node_spec.switch.initial_port,
            )
            self.fpga = FpgaDriver(
                engine,
                node=node_spec.node_id,
                nclock=self.nclock,
                switch=self.switch,
                uart_latency_ps=node_spec.fpga.uart_latency_ps,
                clock_grid_ps=node_spec.fpga.clock_grid_ps,
            )


class _WindowProgram:
    """Arms one transmission window per second on a node's FPGA."""

    def __init__(self, engine: Engine, site: _Site, window, stop_at: SimTime):
        self.engine = engine
        self.site = site
        self.window = window
        self.stop_at = stop_at

    def start(self) -> None:
        self.engine.schedule(
            WINDOW_SUBMIT_PHASE_PS,
            "controller-timer",
            self._tick,
            node=self.site.spec.node_id,
            detail="window-program",
        )

    def _tick(self, eng: Engine) -> None:
        self.site.fpga.generate_window(
            on_port=self.window.port,
            width_ps=self.window.width_ps,
            mode=CommandMode.PPS_ALIGNED,
        )
        next_at = eng.now + SEC
        if next_at < self.stop_at:
            eng.schedule(
                next_at,
                "controller-timer",
                self._tick,
                node=self.site.spec.node_id,
                detail="window-program",
            )


def _build_sites(scenario: Scenario, engine: Engine) -> dict[str, _Site]:
    return {spec.node_id: _Site(spec, engine) for spec in scenario.nodes}


def _transitions_into(site: _Site, port: int):
    return [tr for tr in site.switch.transitions if tr.to_port == port]


def _transitions_out_of(site: _Site, port: int):
    return [tr for tr in site.switch.transitions if tr.from_port == port]


def _run_jitter(scenario: Scenario, engine: Engine, sites: dict[str, _Site]) -> dict:
    sync: SyncSpec = scenario.sync
    master = sites[sync.master]
    slave = sites[sync.slave]

    session = ptp.PtpSession(
        engine,
        master.nclock,
        slave.nclock,
        sync.link,
        interval_ps=sync.exchange_interval_ps,
        servo=sync.servo,
        master_node=sync.master,
        slave_node=sync.slave,
    )
    session.start(0)

    master_pps = PpsSource(engine, master.nclock, sync.master)
    slave_pps = PpsSource(engine, slave.nclock, sync.slave)
    master_pps.start(0)
    slave_pps.start(0)

    # The last programmed window fires a full period before the end of
    # the run, so both nodes' actuations always land inside it and the
    # repetition count is independent of the sign of the residual skew.
    stop_at = scenario.duration_ps - SEC
    for site in (master, slave):
        _WindowProgram(engine, site, sync.window, stop_at).start()

    engine.run_until(scenario.duration_ps)

    warmup = sync.warmup_ps
    port = sync.window.port

    master_on = _transitions_into(master, port)
    slave_on = _transitions_into(slave, port)
    if len(master_on) != len(slave_on):
        raise OptosyncError(
            f"window repetition mismatch: master {len(master_on)}, "
            f"slave {len(slave_on)}"
        )
    # Pair repetitions by index, then gate on the master-side window
    # anchor (its transition start, latch noise < one period) so warmup
    # trimming can never split a pair: keep windows whose anchor is at
    # least one full period past warmup.
    kept = [i for i, tr in enumerate(master_on) if tr.start >= warmup + SEC]
    window_trace = metrics.EdgeTrace(
        [slave_on[i].rising_edge() - master_on[i].rising_edge() for i in kept]
    )

    master_by_k = dict(master_pps.edges)
    slave_by_k = dict(slave_pps.edges)
    pps_trace = metrics.EdgeTrace()
    for k in sorted(master_by_k.keys() & slave_by_k.keys()):
        if warmup < master_by_k[k] <= stop_at:
            pps_trace.append(slave_by_k[k] - master_by_k[k])

    eye = metrics.EyeHistogram(bin_width_ps=sync.eye_bin_ps)
    slave_off = _transitions_out_of(slave, port)
    for i in kept:
        trigger = master_on[i].rising_edge()
        deltas = [slave_on[i].rising_edge() - trigger]
        if i < len(slave_off):
            deltas.append(slave_off[i].rising_edge() - trigger)
        metrics.accumulate_eye(eye, deltas)

    window_stats = metrics.jitter_stats(window_trace)
    pps_stats = metrics.jitter_stats(pps_trace)
    return {
        "window_trace": window_trace,
        "pps_trace": pps_trace,
        "eye": eye,
        "window_stats": window_stats,
        "pps_stats": pps_stats,
    }


def _run_recovery(scenario: Scenario, engine: Engine, sites: dict[str, _Site]) -> dict:
    spec = scenario.recovery
    mode = "instant" if scenario.experiment == "instant_recovery" else "scheduled"

    links = {
        s.link_id: OpticalLink(s.link_id, nominal_power_dbm=s.power_dbm)
        for s in scenario.links
    }

    controller_site = sites[scenario.controller().node_id]
    controller = Controller(
        engine,
        nclock=controller_site.nclock,
        processing_latency_ps=scenario.control.processing_latency_ps,
        scheduling_overhead_ps=scenario.control.scheduling_overhead_ps,
        response_margin_ps=scenario.control.response_margin_ps,
        sync_burst=scenario.control.sync_burst,
        offset_refresh_ps=scenario.control.offset_refresh_ps,
        perfect_time=scenario.control.perfect_time,
        node=scenario.controller().node_id,
    )

    actuations: dict[str, list] = {}
    for node_spec in scenario.agents():
        site = sites[node_spec.node_id]
        agent = Agent(agent_id=node_spec.node_id, nclock=site.nclock, fpga=site.fpga)
        channel_model = scenario.control.channels.get(node_spec.node_id)
        channel = ControlChannel(link=channel_model) if channel_model else None
        controller.register_agent(agent, channel)
        actuations[node_spec.node_id] = []
        if site.fpga is not None:
            site.fpga.on_actuation.append(
                lambda eng, fpga, tr: actuations[fpga.node].append(tr)
            )

    backup_targets = sorted(spec.backup_ports.items())
    controller.set_backup_path(spec.failed_link, backup_targets)

    detections: list[tuple[str, SimTime]] = []
    notified_at: list[SimTime] = []

    def on_detect(eng: Engine, monitor: PhotodiodeMonitor, at: SimTime) -> None:
        detections.append((monitor.link.link_id, at))
        note = FailureNotification(
            link_id=monitor.link.link_id,
            agent_id=monitor.node,
            detected_at=at,
            detected_at_local=sites[monitor.node].nclock.local_time(at),
        )
        arrive = eng.now + controller.entries[monitor.node].channel.link.rev_base_ps
        notified_at.append(arrive)
        controller.notify_failure(note, mode)

    for mspec in scenario.monitors:
        monitor = PhotodiodeMonitor(
            engine,
            node=mspec.node,
            link=links[mspec.link],
            threshold_db=mspec.threshold_db,
            sample_interval_ps=mspec.interval_ps,
            debounce_samples=mspec.debounce,
            on_failure=on_detect,
        )
        monitor.start(0)

    controller.start_offset_refresh(0)
    links[spec.failed_link].inject_failure(engine, spec.failure_at_ps)

    engine.run_until(scenario.duration_ps)

    if not detections:
        raise IncompleteRecord("the injected failure was never detected")
    if not controller.plans or controller.plans[0].issued_at < 0:
        raise IncompleteRecord("the controller never issued a recovery plan")
    plan = controller.plans[0]

    starts: dict[str, SimTime] = {}
    restored: dict[str, SimTime] = {}
    for agent_id, port in backup_targets:
        candidates = [tr for tr in actuations[agent_id]
                      if tr.to_port == port and tr.start >= plan.issued_at]
        if not candidates:
            raise IncompleteRecord(
                f"agent {agent_id!r} never actuated onto backup port {port}"
            )
        starts[agent_id] = candidates[0].start
        restored[agent_id] = candidates[0].end

    record = metrics.RecoveryRecord(
        link_id=spec.failed_link,
        mode=mode,
        failure_at=spec.failure_at_ps,
        detected_at=detections[0][1],
        notified_at=notified_at[0],
        plan_issued_at=plan.issued_at,
        actuation_start=starts,
        restored_at=max(restored.values()),
    )
    return {"record": record, "breakdown": metrics.recovery_breakdown(record)}


def run_scenario(
    scenario: Scenario,
    out_dir,
    seed: Optional[int] = None,
    write_trace: bool = True,
) -> RunReport:
    """Run one scenario and write its CSVs under ``out_dir``."""
    started = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root_seed = scenario.root_seed if seed is None else seed
    engine = Engine(root_seed=root_seed)
    sites = _build_sites(scenario, engine)

    digest = hashlib.sha256(
        json.dumps(scenario.raw, sort_keys=True).encode()
    ).hexdigest()
    report = RunReport(
        scenario_id=scenario.scenario_id,
        experiment=scenario.experiment,
        seed=root_seed,
        scenario_sha256=digest,
    )
    summary_row: dict = {
        "scenario_id": scenario.scenario_id,
        "seed": root_seed,
        "experiment": scenario.experiment,
    }

    if scenario.experiment == "jitter_validation":
        result = _run_jitter(scenario, engine, sites)
        window_stats = result["window_stats"]
        pps_stats = result["pps_stats"]
        report.headlines = {
            "window_p2p_ps": window_stats.p2p_ps,
            "window_stddev_ps": window_stats.stddev_ps,
            "window_count": window_stats.count,
            "pps_p2p_ps": pps_stats.p2p_ps,
            "pps_stddev_ps": pps_stats.stddev_ps,
            "pps_count": pps_stats.count,
            "eye_total_count": result["eye"].total_count,
        }
        summary_row.update({
            "window_p2p_ps": window_stats.p2p_ps,
            "window_stddev_ps": window_stats.stddev_ps,
            "window_count": window_stats.count,
            "pps_p2p_ps": pps_stats.p2p_ps,
            "pps_stddev_ps": pps_stats.stddev_ps,
            "pps_count": pps_stats.count,
        })
        metrics.write_edges_csv(out / "edges.csv", result["window_trace"])
        metrics.write_edges_csv(out / "pps_edges.csv", result["pps_trace"])
        metrics.write_eye_csv(out / "eye.csv", result["eye"])
        report.csv_paths = {
            "edges": out / "edges.csv",
            "pps_edges": out / "pps_edges.csv",
            "eye": out / "eye.csv",
        }
    else:
        result = _run_recovery(scenario, engine, sites)
        record: metrics.RecoveryRecord = result["record"]
        breakdown: metrics.RecoveryBreakdown = result["breakdown"]
        report.headlines = {
            "recovery_total_ps": record.total_ps,
            "detection_ps": breakdown.detection_ps,
            "notification_ps": breakdown.notification_ps,
            "processing_ps": breakdown.processing_ps,
            "command_transport_ps": breakdown.command_transport_ps,
            "arming_actuation_ps": breakdown.arming_actuation_ps,
        }
        summary_row["recovery_total_ps"] = record.total_ps
        metrics.write_recovery_csv(out / "recovery.csv", [record])
        report.csv_paths = {"recovery": out / "recovery.csv"}

    metrics.write_summary_csv(out / "summary.csv", summary_row)
    report.csv_paths["summary"] = out / "summary.csv"
    if write_trace:
        engine.trace.write_csv(out / "trace.csv")
        report.csv_paths["trace"] = out / "trace.csv"

    report.wall_seconds = time.perf_counter() - started
    with open(out / "run_report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
