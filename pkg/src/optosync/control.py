"""Central controller and per-switch SDN agents.

The controller is the only component that talks to agents; agents never
message each other.  It keeps a per-agent clock-offset estimate,
translates firing times into each agent's clock domain, and reacts to
link-failure notifications in one of two ways: push immediate
switchover commands, or broadcast a common future fire time so every
switch acts in the same instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import clock as clk
from . import ptp
from .clock import IDEAL, NodeClock
from .errors import LinkDown, NoBackupPath, NoOffsetEstimate
from .fabric import CommandMode, FpgaDriver, PhotodiodeMonitor, SwitchCommand
from .simcore import Engine, MS, SEC, SimTime, US

DEFAULT_PROCESSING_LATENCY_PS = 300 * US
DEFAULT_SCHEDULING_OVERHEAD_PS = 10 * MS
DEFAULT_CONTROL_BASE_PS = 500 * US
DEFAULT_SYNC_BURST = 8
DEFAULT_OFFSET_REFRESH_PS = 10 * SEC


@dataclass
class Agent:
    """One switch site: a clock, an FPGA driver, optional monitors."""

    agent_id: str
    nclock: NodeClock
    fpga: FpgaDriver
    monitors: list[PhotodiodeMonitor] = field(default_factory=list)


@dataclass
class ControlChannel:
    """Controller<->agent management path (fwd is controller-to-agent)."""

    link: ptp.LinkDelayModel
    up: bool = True


@dataclass
class AgentEntry:
    agent: Agent
    channel: ControlChannel
    offset_est_ps: Optional[int] = None
    last_sync_at: Optional[SimTime] = None
    rng_fwd: Optional[object] = None
    rng_rev: Optional[object] = None
    rng_cmd: Optional[object] = None


@dataclass(frozen=True)
class FailureNotification:
    """Agent-to-controller report of a dead link.

    detected_at_local is the detection instant on the reporting
    agent's own clock; the controller sees only local timestamps.
    """

    link_id: str
    agent_id: str
    detected_at: SimTime
    detected_at_local: int = 0


@dataclass
class DispatchEntry:
    """Outcome of one command sent to one agent."""

    agent_id: str
    handle: Optional[object] = None   # fabric.ArmedCommand once dispatched
    error: Optional[str] = None


@dataclass
class RecoveryPlan:
    """What the controller decided to do about one failure."""

    link_id: str
    mode: str                              # "instant" | "scheduled"
    issued_at: SimTime
    targets: list[tuple[str, int]]
    fire_at_controller_local: Optional[int] = None
    dispatch: list[DispatchEntry] = field(default_factory=list)


class Controller:
    """Central control plane over dedicated per-agent channels.

    perfect_time swaps the estimate-based timestamp translation for a
    direct read of the agent clock, modeling agents that carry their
    own absolute time reference; the command fan-out is unchanged.
    """

    def __init__(
        self,
        engine: Engine,
        nclock: Optional[NodeClock] = None,
        *,
        processing_latency_ps: int = DEFAULT_PROCESSING_LATENCY_PS,
        scheduling_overhead_ps: int = DEFAULT_SCHEDULING_OVERHEAD_PS,
        response_margin_ps: int = 0,
        sync_burst: int = DEFAULT_SYNC_BURST,
        offset_refresh_ps: int = DEFAULT_OFFSET_REFRESH_PS,
        perfect_time: bool = False,
        node: str = "controller",
    ):
        self.engine = engine
        self.nclock = nclock if nclock is not None else NodeClock(IDEAL)
        self.node = node
        self.processing_latency_ps = processing_latency_ps
        self.scheduling_overhead_ps = scheduling_overhead_ps
        self.response_margin_ps = response_margin_ps
        self.sync_burst = sync_burst
        self.offset_refresh_ps = offset_refresh_ps
        self.perfect_time = perfect_time
        self.entries: dict[str, AgentEntry] = {}
        self.backup_paths: dict[str, list[tuple[str, int]]] = {}
        self.plans: list[RecoveryPlan] = []
        self._handled_links: set[str] = set()

    # -- registration ---------------------------------------------------

    def register_agent(self, agent: Agent, channel: Optional[ControlChannel] = None) -> None:
        if channel is None:
            channel = ControlChannel(
                link=ptp.LinkDelayModel(
                    fwd_base_ps=DEFAULT_CONTROL_BASE_PS,
                    rev_base_ps=DEFAULT_CONTROL_BASE_PS,
                )
            )
        self.entries[agent.agent_id] = AgentEntry(
            agent=agent,
            channel=channel,
            rng_fwd=self.engine.rng(f"ctrl.{agent.agent_id}.fwd"),
            rng_rev=self.engine.rng(f"ctrl.{agent.agent_id}.rev"),
            rng_cmd=self.engine.rng(f"ctrl.{agent.agent_id}.cmd"),
        )

    def set_backup_path(self, link_id: str, targets: list[tuple[str, int]]) -> None:
        """Declare where traffic of ``link_id`` moves on failure."""
        self.backup_paths[link_id] = list(targets)

    def _entry(self, agent_id: str) -> AgentEntry:
        try:
            return self.entries[agent_id]
        except KeyError:
            raise KeyError(f"unknown agent {agent_id!r}") from None

    # -- time transfer ---------------------------------------------------

    def measure_agent_offset(
        self, agent_id: str, t_start: Optional[SimTime] = None
    ) -> int:
        """Estimate one agent's clock offset against the controller.

        Runs a burst of exchanges over the management channel and keeps
        the estimate from the minimum-delay exchange, the standard
        defense against queueing outliers.  On a dead channel the
        previous estimate is retained and LinkDown propagates.
        """
        entry = self._entry(agent_id)
        if not entry.channel.up:
            raise LinkDown(f"control channel to {agent_id!r} is down")
        start = self.engine.now if t_start is None else t_start
        rng_fwd = entry.rng_fwd
        rng_rev = entry.rng_rev
        best: Optional[ptp.SyncResult] = None
        for _ in range(self.sync_burst):
            ts = ptp.run_sync_exchange(
                self.engine,
                self.nclock,
                entry.agent.nclock,
                entry.channel.link,
                rng_fwd,
                rng_rev,
                t_start=start,
                master_node=self.node,
                slave_node=agent_id,
            )
            result = ptp.estimate_offset(ts)
            if best is None or result.delay_ps < best.delay_ps:
                best = result
            # Next exchange departs when this one completes.
            start = clk.sim_time_of_local(
                entry.agent.nclock.state, ts.t3
            ) + entry.channel.link.rev_base_ps
        entry.offset_est_ps = best.offset_ps
        entry.last_sync_at = start
        return best.offset_ps

    def start_offset_refresh(self, at: SimTime = 0) -> None:
        """Measure every agent now and keep the estimates fresh."""

        def burst(eng: Engine) -> None:
            for agent_id in sorted(self.entries):
                entry = self.entries[agent_id]
                if entry.channel.up:
                    self.measure_agent_offset(agent_id)
            eng.schedule(
                eng.now + self.offset_refresh_ps,
                "controller-timer",
                burst,
                node=self.node,
                detail="offset-refresh",
            )

        self.engine.schedule(at, "controller-timer", burst,
                             node=self.node, detail="offset-refresh")

    def translate_timestamp(self, agent_id: str, controller_local: int) -> int:
        """Map a controller-local instant into an agent's clock domain."""
        entry = self._entry(agent_id)
        if self.perfect_time:
            at = self.nclock.sim_time_of_local(controller_local)
            return entry.agent.nclock.local_time(at)
        if entry.offset_est_ps is None:
            raise NoOffsetEstimate(f"no offset estimate for agent {agent_id!r}")
        return controller_local + entry.offset_est_ps

    # -- fan-out ----------------------------------------------------------

    def schedule_reconfig(
        self,
        targets: list[tuple[str, int]],
        fire_at_controller_local: int,
    ) -> list[DispatchEntry]:
        """Send every agent a timed command for one shared fire instant.

        Each command carries the fire time translated into the agent's
        own clock domain; commands travel the management channels and
        arm behind each agent's UART.  A per-agent problem (dead
        channel, timestamp already past at arming) is reported in its
        dispatch entry without blocking the others.
        """
        dispatch: list[DispatchEntry] = []
        for agent_id, port in targets:
            entry = self._entry(agent_id)
            if not entry.channel.up:
                dispatch.append(DispatchEntry(agent_id, error="control channel down"))
                continue
            try:
                fire_local = self.translate_timestamp(agent_id, fire_at_controller_local)
            except NoOffsetEstimate as exc:
                dispatch.append(DispatchEntry(agent_id, error=str(exc)))
                continue
            command = SwitchCommand(
                target_port=port,
                mode=CommandMode.AT_LOCAL_TIMESTAMP,
                fire_at_local=fire_local,
            )
            handle = entry.agent.fpga.submit_command(
                command,
                sent_at=self.engine.now + self._command_delay(agent_id),
            )
            dispatch.append(DispatchEntry(agent_id, handle=handle))
        return dispatch

    def _command_delay(self, agent_id: str) -> int:
        entry = self._entry(agent_id)
        return entry.channel.link.sample_fwd(entry.rng_cmd)

    # -- failure handling --------------------------------------------------

    def notify_failure(
        self, notification: FailureNotification, mode: str
    ) -> None:
        """Deliver a notification to the controller over the agent channel."""
        entry = self._entry(notification.agent_id)
        arrive = self.engine.now + entry.channel.link.rev_base_ps
        self.engine.schedule(
            arrive,
            "notification-arrival",
            lambda eng: self.handle_failure(notification, mode),
            node=self.node,
            detail=(
                f"src={notification.agent_id} link={notification.link_id} "
                f"detected_at={notification.detected_at}"
            ),
        )

    def handle_failure(self, notification: FailureNotification, mode: str) -> RecoveryPlan:
        """React to a failure notification.

        instant: push immediate switchover commands after the
        processing delay.  scheduled: pick one fire instant the
        scheduling overhead beyond the earliest instant the fabric
        could act (so the scheduled path costs exactly the overhead
        more than the instant path) and fan it out as timed commands.
        Duplicate notifications for a link already being handled are
        dropped.
        """
        if mode not in ("instant", "scheduled"):
            raise ValueError(f"unknown recovery mode {mode!r}")
        targets = self.backup_paths.get(notification.link_id)
        if not targets:
            raise NoBackupPath(
                f"no backup path configured for link {notification.link_id!r}"
            )
        plan = RecoveryPlan(
            link_id=notification.link_id,
            mode=mode,
            issued_at=-1,
            targets=list(targets),
        )
        if notification.link_id in self._handled_links:
            return plan
        self._handled_links.add(notification.link_id)
        self.plans.append(plan)

        issue_at = (
            self.engine.now + self.processing_latency_ps + self.response_margin_ps
        )

        def issue(eng: Engine) -> None:
            plan.issued_at = eng.now
            if mode == "instant":
                for agent_id, port in plan.targets:
                    entry = self._entry(agent_id)
                    if not entry.channel.up:
                        plan.dispatch.append(
                            DispatchEntry(agent_id, error="control channel down")
                        )
                        continue
                    handle = entry.agent.fpga.submit_command(
                        SwitchCommand(target_port=port, mode=CommandMode.IMMEDIATE),
                        sent_at=eng.now + self._command_delay(agent_id),
                    )
                    plan.dispatch.append(DispatchEntry(agent_id, handle=handle))
                return
            # Earliest instant every targeted switch could possibly act:
            # command transport plus UART, taken over the slowest agent.
            lead = max(
                self._entry(a).channel.link.fwd_base_ps
                + self._entry(a).agent.fpga.uart_latency_ps
                for a, _ in plan.targets
            )
            fire_at = eng.now + lead + self.scheduling_overhead_ps
            plan.fire_at_controller_local = self.nclock.local_time(fire_at)
            plan.dispatch.extend(
                self.schedule_reconfig(plan.targets, plan.fire_at_controller_local)
            )

        self.engine.schedule(
            issue_at,
            "controller-timer",
            issue,
            node=self.node,
            detail=f"recovery-plan link={notification.link_id} mode={mode}",
        )
        return plan
