"""Optical data plane: 1x4 switches, their FPGA drivers, links, monitors.

A switch port does not open instantaneously; transmission ramps
linearly over the rise time and the 50% crossing is taken as the
switching instant.  The FPGA driver models the command path of the
bench hardware: commands reach the FPGA over a slow UART, then fire
immediately, on the next local 1PPS edge, or at a programmed local
timestamp.  Timestamps in the local past are rejected at arming time,
never silently executed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

from .clock import NodeClock, schedule_at_local
from .errors import AlreadyFailed, LinkDown
from .simcore import Engine, NS, SimTime, US

# Rise-time presets, in picoseconds.  "nominal" is the conservative
# figure used everywhere by default; "measured" (alias "fast") is the
# best case seen on the bench.
RISE_PRESETS: dict[str, int] = {
    "nominal": 10 * NS,
    "measured": 8_400,
    "fast": 8_400,
}

DEFAULT_RISE_PS = RISE_PRESETS["nominal"]
DEFAULT_UART_LATENCY_PS = 100 * US
PORT_COUNT = 4

# Optical power reported on a dead link.
FAILED_FLOOR_DBM = -60.0


def resolve_rise(rise) -> int:
    """Accept a preset name or an explicit picosecond count."""
    if isinstance(rise, str):
        try:
            return RISE_PRESETS[rise]
        except KeyError:
            raise ValueError(
                f"unknown rise preset {rise!r}; known: {sorted(RISE_PRESETS)}"
            ) from None
    rise = int(rise)
    if rise <= 0:
        raise ValueError("rise time must be positive")
    return rise


@dataclass(frozen=True)
class Transition:
    """One port change: coupling ramps 0 -> 1 on to_port over rise_ps."""

    from_port: int
    to_port: int
    start: SimTime
    rise_ps: int

    @property
    def end(self) -> SimTime:
        return self.start + self.rise_ps

    def rising_edge(self) -> SimTime:
        """50% crossing of the incoming port."""
        return self.start + self.rise_ps // 2


class OpticalSwitch:
    """1x4 switch with a finite linear transition.

    At most one transition is ever in flight.  Actuating during a ramp
    snaps the old ramp to completion first, so a preempted command
    still leaves the fabric in its commanded state, just early.
    """

    def __init__(self, node: str, rise_ps=DEFAULT_RISE_PS, initial_port: int = 1):
        self.node = node
        self.rise_ps = resolve_rise(rise_ps)
        if not 1 <= initial_port <= PORT_COUNT:
            raise ValueError(f"initial_port must be 1..{PORT_COUNT}")
        self.active_port = initial_port
        self.transition: Optional[Transition] = None
        # Completed and in-flight transitions, in actuation order.
        self.transitions: list[Transition] = []

    def _settle(self, t: SimTime) -> None:
        # Fold a finished ramp into the static state.
        if self.transition is not None and t >= self.transition.end:
            self.active_port = self.transition.to_port
            self.transition = None

    def port_at(self, t: SimTime) -> int:
        """Commanded route at instant ``t``; a begun ramp counts as its
        target port.  Read-only, so stale internal state never leaks."""
        tr = self.transition
        if tr is None:
            return self.active_port
        return tr.to_port if t >= tr.start else tr.from_port

    def actuate(self, to_port: int, at: SimTime) -> Optional[Transition]:
        """Begin switching to ``to_port`` at ``at``.

        Returns the new transition, or None for a no-op actuation into
        the already-active port.
        """
        if not 1 <= to_port <= PORT_COUNT:
            raise ValueError(f"port must be 1..{PORT_COUNT}, got {to_port}")
        self._settle(at)
        if self.transition is not None:
            # Preemption: the in-flight ramp completes instantly.
            self.active_port = self.transition.to_port
            self.transition = None
        if to_port == self.active_port:
            return None
        tr = Transition(
            from_port=self.active_port,
            to_port=to_port,
            start=at,
            rise_ps=self.rise_ps,
        )
        self.transition = tr
        self.transitions.append(tr)
        return tr

    def port_transmission(self, port: int, t: SimTime) -> float:
        """Power coupling of ``port`` at instant ``t``, in [0, 1].

        Evaluated against the most recent actuation at or before ``t``;
        earlier instants are answered from the pre-transition state.
        """
        if not 1 <= port <= PORT_COUNT:
            raise ValueError(f"port must be 1..{PORT_COUNT}, got {port}")
        tr = self.transition
        if tr is None or t < tr.start:
            base = tr.from_port if tr is not None else self.active_port
            return 1.0 if port == base else 0.0
        if t >= tr.end:
            return 1.0 if port == tr.to_port else 0.0
        frac = (t - tr.start) / tr.rise_ps
        if port == tr.to_port:
            return frac
        if port == tr.from_port:
            return 1.0 - frac
        return 0.0


class CommandMode(str, enum.Enum):
    IMMEDIATE = "immediate"
    PPS_ALIGNED = "pps_aligned"
    AT_LOCAL_TIMESTAMP = "at_local_timestamp"


@dataclass(frozen=True)
class SwitchCommand:
    """One FPGA instruction: connect target_port under a firing rule."""

    target_port: int
    mode: CommandMode = CommandMode.IMMEDIATE
    fire_at_local: Optional[int] = None

    def __post_init__(self):
        if (self.mode is CommandMode.AT_LOCAL_TIMESTAMP) != (self.fire_at_local is not None):
            raise ValueError(
                "fire_at_local is required exactly when mode is at_local_timestamp"
            )


class CommandStatus(str, enum.Enum):
    PENDING = "pending"      # in flight on the UART
    ARMED = "armed"          # accepted, waiting for its firing condition
    FIRED = "fired"
    REJECTED = "rejected"


@dataclass
class ArmedCommand:
    """Tracking handle returned by submit_command."""

    command: SwitchCommand
    submitted_at: SimTime
    status: CommandStatus = CommandStatus.PENDING
    armed_at: Optional[SimTime] = None
    fired_at: Optional[SimTime] = None
    reject_reason: Optional[str] = None


class FpgaDriver:
    """Command path between an SDN agent and its optical switch.

    Commands cross a UART with fixed latency before arming.  An armed
    command fires per its mode; when clock_grid_ps is nonzero the
    trigger is additionally latched by the FPGA's free-running logic
    clock, adding a uniform 0..grid delay per actuation.  The logic
    clock is not phase-locked to timestamps, so each latch lands at an
    independent point inside one period.
    """

    def __init__(
        self,
        engine: Engine,
        node: str,
        nclock: NodeClock,
        switch: OpticalSwitch,
        uart_latency_ps: int = DEFAULT_UART_LATENCY_PS,
        clock_grid_ps: int = 0,
    ):
        if uart_latency_ps < 0:
            raise ValueError("uart latency cannot be negative")
        if clock_grid_ps < 0:
            raise ValueError("clock grid cannot be negative")
        self.engine = engine
        self.node = node
        self.nclock = nclock
        self.switch = switch
        self.uart_latency_ps = uart_latency_ps
        self.clock_grid_ps = clock_grid_ps
        self.commands: list[ArmedCommand] = []
        self.on_actuation: list[Callable[[Engine, "FpgaDriver", Transition], None]] = []
        self._latch_rng = engine.rng(f"fpga.{node}.latch")

    def submit_command(
        self, command: SwitchCommand, sent_at: Optional[SimTime] = None
    ) -> ArmedCommand:
        """Send a command up the UART; it arms uart_latency later.

        ``sent_at`` defaults to now and may sit in the future, which is
        how transport latency ahead of the UART is expressed.
        """
        sent = self.engine.now if sent_at is None else sent_at
        if sent < self.engine.now:
            raise ValueError("cannot submit a command in the past")
        handle = ArmedCommand(command=command, submitted_at=sent)
        self.commands.append(handle)
        self.engine.schedule(
            sent + self.uart_latency_ps,
            "uart-delivery",
            lambda eng: self._arm(eng, handle),
            node=self.node,
            detail=f"mode={command.mode.value} port={command.target_port}",
        )
        return handle

    def _arm(self, eng: Engine, handle: ArmedCommand) -> None:
        cmd = handle.command
        handle.armed_at = eng.now
        if cmd.mode is CommandMode.IMMEDIATE:
            handle.status = CommandStatus.ARMED
            eng.schedule(
                eng.now,
                "actuation",
                lambda e: self._fire(e, handle, latch=True),
                node=self.node,
                detail=f"port={cmd.target_port} trigger=immediate",
            )
            return
        if cmd.mode is CommandMode.PPS_ALIGNED:
            handle.status = CommandStatus.ARMED
            period = self.nclock.pps.period
            target_local = (self.nclock.local_time(eng.now) // period + 1) * period
            self._fire_at_local(eng, handle, target_local, "pps-edge")
            return
        # at_local_timestamp
        local_now = self.nclock.local_time(eng.now)
        if cmd.fire_at_local < local_now:
            handle.status = CommandStatus.REJECTED
            handle.reject_reason = (
                f"timestamp {cmd.fire_at_local} is in the local past "
                f"(local time at arming {local_now})"
            )
            eng.schedule(
                eng.now,
                "uart-delivery",
                node=self.node,
                detail=f"rejected port={cmd.target_port} reason=timestamp-in-local-past",
            )
            return
        handle.status = CommandStatus.ARMED
        self._fire_at_local(eng, handle, cmd.fire_at_local, "timestamp")

    def _fire_at_local(
        self, eng: Engine, handle: ArmedCommand, target_local: int, trigger: str
    ) -> None:
        schedule_at_local(
            eng,
            self.nclock,
            target_local,
            "actuation",
            lambda e: self._fire(e, handle, latch=True),
            node=self.node,
            detail=f"port={handle.command.target_port} trigger={trigger}",
        )

    def _latch_delay(self) -> int:
        grid = self.clock_grid_ps
        if grid <= 0:
            return 0
        return self._latch_rng.randint(0, grid - 1)

    def _fire(self, eng: Engine, handle: ArmedCommand, latch: bool = False) -> None:
        if latch:
            wait = self._latch_delay()
            if wait > 0:
                eng.schedule(
                    eng.now + wait,
                    "actuation",
                    lambda e: self._fire(e, handle),
                    node=self.node,
                    detail=f"port={handle.command.target_port} trigger=latch",
                )
                return
        handle.status = CommandStatus.FIRED
        handle.fired_at = eng.now
        tr = self.switch.actuate(handle.command.target_port, eng.now)
        if tr is not None:
            for listener in self.on_actuation:
                listener(eng, self, tr)

    def generate_window(
        self,
        on_port: int,
        width_ps: int,
        mode: CommandMode = CommandMode.AT_LOCAL_TIMESTAMP,
        fire_at_local: Optional[int] = None,
        sent_at: Optional[SimTime] = None,
    ) -> tuple[ArmedCommand, ArmedCommand]:
        """Arm a transmission window: switch to on_port, then back.

        Both edges are anchored to the same local clock, so a clock
        offset moves the whole window without stretching it; the 50%-
        to-50% width equals width_ps exactly for any width at or above
        the rise time.
        """
        if width_ps <= 0:
            raise ValueError("window width must be positive")
        sent = self.engine.now if sent_at is None else sent_at
        return_port = self.switch.port_at(sent)
        if mode is CommandMode.AT_LOCAL_TIMESTAMP:
            if fire_at_local is None:
                raise ValueError("timestamp windows need fire_at_local")
            anchor = fire_at_local
        elif mode is CommandMode.PPS_ALIGNED:
            # Anchor on the first edge after the expected arming instant.
            period = self.nclock.pps.period
            arm_local = self.nclock.local_time(sent + self.uart_latency_ps)
            anchor = (arm_local // period + 1) * period
        else:
            # Immediate windows anchor where the first command arms.
            anchor = self.nclock.local_time(sent + self.uart_latency_ps)
        opening = SwitchCommand(
            target_port=on_port,
            mode=CommandMode.AT_LOCAL_TIMESTAMP,
            fire_at_local=anchor,
        )
        closing = SwitchCommand(
            target_port=return_port,
            mode=CommandMode.AT_LOCAL_TIMESTAMP,
            fire_at_local=anchor + width_ps,
        )
        return (
            self.submit_command(opening, sent_at=sent),
            self.submit_command(closing, sent_at=sent),
        )


class OpticalLink:
    """Point-to-point fiber with a scalar received-power model."""

    def __init__(self, link_id: str, nominal_power_dbm: float = 0.0):
        self.link_id = link_id
        self.nominal_power_dbm = nominal_power_dbm
        self.failed_since: Optional[SimTime] = None
        self._injection_pending = False

    def power_dbm(self, t: SimTime) -> float:
        if self.failed_since is not None and t >= self.failed_since:
            return FAILED_FLOOR_DBM
        return self.nominal_power_dbm

    def up_at(self, t: SimTime) -> bool:
        return self.failed_since is None or t < self.failed_since

    def inject_failure(self, engine: Engine, at: SimTime) -> None:
        """Schedule a hard failure: power drops to the floor at ``at``."""
        if self.failed_since is not None or self._injection_pending:
            raise AlreadyFailed(f"link {self.link_id!r} already has a failure")
        self._injection_pending = True

        def fail(eng: Engine) -> None:
            self.failed_since = eng.now
            self._injection_pending = False

        engine.schedule(
            at,
            "failure-injection",
            fail,
            node=self.link_id,
            detail=f"power->{FAILED_FLOOR_DBM}dBm",
        )


DEFAULT_THRESHOLD_DB = 3.0
DEFAULT_SAMPLE_INTERVAL_PS = 10 * US
DEFAULT_DEBOUNCE_SAMPLES = 3


class PhotodiodeMonitor:
    """Sampled power watchdog on one link.

    Samples on a fixed grid; after ``debounce_samples`` consecutive
    readings more than ``threshold_db`` below nominal it raises exactly
    one notification for the failure episode.  The notified flag clears
    only when power recovers, so one dead link never floods the
    controller.
    """

    def __init__(
        self,
        engine: Engine,
        node: str,
        link: OpticalLink,
        threshold_db: float = DEFAULT_THRESHOLD_DB,
        sample_interval_ps: int = DEFAULT_SAMPLE_INTERVAL_PS,
        debounce_samples: int = DEFAULT_DEBOUNCE_SAMPLES,
        on_failure: Optional[Callable[[Engine, "PhotodiodeMonitor", SimTime], None]] = None,
    ):
        if sample_interval_ps <= 0:
            raise ValueError("sample interval must be positive")
        if debounce_samples < 1:
            raise ValueError("debounce needs at least one sample")
        self.engine = engine
        self.node = node
        self.link = link
        self.threshold_db = threshold_db
        self.sample_interval_ps = sample_interval_ps
        self.debounce_samples = debounce_samples
        self.on_failure = on_failure
        self.consecutive_low = 0
        self.notified = False
        self.notifications: list[SimTime] = []

    def start(self, at: SimTime = 0) -> None:
        self.engine.schedule(
            at,
            "power-sample",
            self._sample,
            node=self.node,
            detail=f"link={self.link.link_id}",
        )

    def poll(self, t: SimTime) -> bool:
        """One reading at ``t``; returns True when it trips the debounce."""
        low = self.link.power_dbm(t) < self.link.nominal_power_dbm - self.threshold_db
        if not low:
            self.consecutive_low = 0
            self.notified = False
            return False
        self.consecutive_low += 1
        if self.consecutive_low >= self.debounce_samples and not self.notified:
            self.notified = True
            return True
        return False

    def _sample(self, eng: Engine) -> None:
        if self.poll(eng.now):
            self.notifications.append(eng.now)
            if self.on_failure is not None:
                self.on_failure(eng, self, eng.now)
        eng.schedule(
            eng.now + self.sample_interval_ps,
            "power-sample",
            self._sample,
            node=self.node,
            detail=f"link={self.link.link_id}",
        )
