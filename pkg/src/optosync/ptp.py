"""Two-way time transfer and slave-clock disciplining.

One exchange produces the classic four timestamps: t1 master send,
t2 slave receive, t3 slave send, t4 master receive, each captured in
the owning node's clock domain.  From those,

    offset = ((t2 - t1) - (t4 - t3)) / 2
    delay  = ((t2 - t1) + (t4 - t3)) / 2

with halves rounded away from zero.  Under symmetric path delays the
offset estimate is exact; an asymmetry of ``a`` picoseconds between the
directions biases it by ``a / 2``, which no two-way protocol can see.

Message delays are a fixed base plus a per-message packet-delay
variation draw.  The two named variation profiles below were calibrated
once against bench measurements of a slave window-edge spread over a
half-hour run (105 ns peak to peak through a store-and-forward Ethernet
switch, 56/62 ns PPS/window through a PTP-aware one) and then frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from . import clock as clk
from .errors import LinkDown
from .simcore import (
    MS,
    NS,
    SEC,
    US,
    Engine,
    RngStream,
    SimTime,
    div_round_half_away,
    round_half_away,
)

# Slave turnaround: t3 - t2, in slave-local picoseconds.
TURNAROUND_PS = 1 * US

# Default disciplining cadence.
SYNC_INTERVAL_PS = 1 * SEC


@dataclass(frozen=True)
class JitterProfile:
    """Per-message packet-delay-variation model.

    kind is one of "none", "gaussian" (zero mean, sigma_ps wide) or
    "gamma" (shape/scale_ps, one-sided and heavy tailed).  Draws are
    clamped into [lo_ps, hi_ps]; a None bound is open.  Clamping rather
    than redrawing keeps every profile a one-draw-per-message consumer
    of its stream, so sample alignment never depends on tail luck.
    """

    kind: str = "none"
    sigma_ps: int = 0
    shape: float = 0.0
    scale_ps: int = 0
    lo_ps: Optional[int] = None
    hi_ps: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "gamma"):
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma_ps < 0:
            raise ValueError("sigma_ps must be >= 0")
        if self.kind == "gamma" and (self.shape <= 0 or self.scale_ps <= 0):
            raise ValueError("gamma profiles need positive shape and scale")
        if self.lo_ps is not None and self.hi_ps is not None and self.lo_ps > self.hi_ps:
            raise ValueError("truncation bounds are inverted")

    def sample(self, rng: RngStream) -> int:
        if self.kind == "none":
            return 0
        if self.kind == "gaussian":
            value = round_half_away(rng.gauss(float(self.sigma_ps)))
        else:
            value = round_half_away(rng.gamma(self.shape, float(self.scale_ps)))
        if self.lo_ps is not None and value < self.lo_ps:
            value = self.lo_ps
        if self.hi_ps is not None and value > self.hi_ps:
            value = self.hi_ps
        return value

    def scaled(self, factor: float) -> "JitterProfile":
        """Profile with all magnitudes multiplied by ``factor``."""
        if factor < 0:
            raise ValueError("scale factor must be >= 0")

        def stretch(v):
            return None if v is None else round_half_away(v * factor)

        return replace(
            self,
            sigma_ps=round_half_away(self.sigma_ps * factor),
            scale_ps=max(1, round_half_away(self.scale_ps * factor)) if self.kind == "gamma" else self.scale_ps,
            lo_ps=stretch(self.lo_ps),
            hi_ps=stretch(self.hi_ps),
        )


NO_PDV = JitterProfile(kind="none")


@dataclass(frozen=True)
class LinkDelayModel:
    """Directional message-delay model: base plus variation each way."""

    fwd_base_ps: int
    rev_base_ps: int
    fwd_pdv: JitterProfile = NO_PDV
    rev_pdv: JitterProfile = NO_PDV

    def __post_init__(self):
        if self.fwd_base_ps <= 0 or self.rev_base_ps <= 0:
            raise ValueError("link base delays must be positive")
        for base, pdv, name in (
            (self.fwd_base_ps, self.fwd_pdv, "fwd"),
            (self.rev_base_ps, self.rev_pdv, "rev"),
        ):
            if pdv.lo_ps is not None and pdv.lo_ps < -base:
                raise ValueError(
                    f"{name} truncation floor {pdv.lo_ps} would allow a negative delay"
                )
            if pdv.kind == "gaussian" and pdv.lo_ps is None:
                raise ValueError(f"{name} gaussian variation needs a truncation floor")

    def sample_fwd(self, rng: RngStream) -> int:
        return self.fwd_base_ps + self.fwd_pdv.sample(rng)

    def sample_rev(self, rng: RngStream) -> int:
        return self.rev_base_ps + self.rev_pdv.sample(rng)

    def scaled_pdv(self, factor: float) -> "LinkDelayModel":
        return replace(
            self,
            fwd_pdv=self.fwd_pdv.scaled(factor),
            rev_pdv=self.rev_pdv.scaled(factor),
        )


# Frozen calibration results for the two bench network paths.  The
# gaussian profile models a PTP-aware switch (small, symmetric residual
# variation); the gamma profile models a plain store-and-forward switch
# whose queueing produces a one-sided heavy tail.  Values were fitted by
# sweeping the magnitudes until the half-hour slave edge spreads matched
# the bench numbers quoted in the module docstring, then frozen here.
LINK_PROFILES: dict[str, LinkDelayModel] = {
    "ptp-enabled": LinkDelayModel(
        fwd_base_ps=25 * US,
        rev_base_ps=25 * US,
        fwd_pdv=JitterProfile(kind="gaussian", sigma_ps=7_400, lo_ps=-29_600, hi_ps=29_600),
        rev_pdv=JitterProfile(kind="gaussian", sigma_ps=7_400, lo_ps=-29_600, hi_ps=29_600),
    ),
    "standard-ethernet": LinkDelayModel(
        fwd_base_ps=25 * US,
        rev_base_ps=25 * US,
        fwd_pdv=JitterProfile(kind="gamma", shape=2.0, scale_ps=7_650, lo_ps=0, hi_ps=153_000),
        rev_pdv=JitterProfile(kind="gamma", shape=2.0, scale_ps=7_650, lo_ps=0, hi_ps=153_000),
    ),
}


@dataclass(frozen=True)
class PtpTimestamps:
    """The four timestamps of one exchange, in picoseconds.

    t1/t4 are master-local, t2/t3 slave-local.
    """

    t1: int
    t2: int
    t3: int
    t4: int

    def __post_init__(self):
        if self.t3 <= self.t2:
            raise ValueError("slave send must follow slave receive")
        if self.t4 <= self.t1:
            raise ValueError("master receive must follow master send")


@dataclass(frozen=True)
class SyncResult:
    offset_ps: int
    delay_ps: int


def estimate_offset(ts: PtpTimestamps) -> SyncResult:
    """Recover slave-minus-master offset and one-way delay.

    Reconstruction identity: (t2-t1) == offset + delay and
    (t4-t3) == delay - offset, up to the half-tick rounding.
    """
    fwd = ts.t2 - ts.t1
    rev = ts.t4 - ts.t3
    return SyncResult(
        offset_ps=div_round_half_away(fwd - rev, 2),
        delay_ps=div_round_half_away(fwd + rev, 2),
    )


def exchange_timestamps(
    master: clk.ClockState,
    slave: clk.ClockState,
    t_start: SimTime,
    fwd_delay_ps: int,
    rev_delay_ps: int,
    turnaround_ps: int = TURNAROUND_PS,
) -> PtpTimestamps:
    """Timestamps of one exchange with the given path delays.

    Pure function of the two clock states; the event-driven wrapper
    below feeds it sampled delays.
    """
    t1 = clk.local_time(master, t_start)
    arrive = t_start + fwd_delay_ps
    t2 = clk.local_time(slave, arrive)
    t3 = t2 + turnaround_ps
    depart = clk.sim_time_of_local(slave, t3)
    t4 = clk.local_time(master, depart + rev_delay_ps)
    return PtpTimestamps(t1=t1, t2=t2, t3=t3, t4=t4)


def run_sync_exchange(
    engine: Engine,
    master: clk.NodeClock,
    slave: clk.NodeClock,
    link: LinkDelayModel,
    rng_fwd: RngStream,
    rng_rev: RngStream,
    *,
    t_start: Optional[SimTime] = None,
    turnaround_ps: int = TURNAROUND_PS,
    up_at: Optional[Callable[[SimTime], bool]] = None,
    master_node: str = "master",
    slave_node: str = "slave",
    on_complete: Optional[Callable[[Engine, PtpTimestamps], None]] = None,
) -> PtpTimestamps:
    """Run one exchange through the engine.

    Samples both path delays, schedules the two message arrivals, and
    returns the resulting timestamps.  ``on_complete`` runs at the t4
    arrival, which is where a servo should act.  Raises LinkDown when
    the path is already dead at sync arrival time; the draw order
    (forward, then reverse) is fixed so a dead link consumes the same
    stream state as a live one.
    """
    start = engine.now if t_start is None else t_start
    fwd = link.sample_fwd(rng_fwd)
    rev = link.sample_rev(rng_rev)
    ts = exchange_timestamps(
        master.state, slave.state, start, fwd, rev, turnaround_ps
    )
    arrive_slave = start + fwd
    if up_at is not None and not up_at(arrive_slave):
        raise LinkDown(
            f"sync path {master_node}->{slave_node} is down at {arrive_slave} ps"
        )
    depart_slave = clk.sim_time_of_local(slave.state, ts.t3)
    arrive_master = depart_slave + rev

    engine.schedule(
        arrive_slave,
        "ptp-message-arrival",
        node=slave_node,
        detail=f"src={master_node} msg=sync t1={ts.t1} t2={ts.t2}",
    )

    def complete(eng: Engine) -> None:
        if on_complete is not None:
            on_complete(eng, ts)

    result = estimate_offset(ts)
    engine.schedule(
        arrive_master,
        "ptp-message-arrival",
        complete,
        node=master_node,
        detail=(
            f"src={slave_node} msg=delay-req t1={ts.t1} t2={ts.t2} t3={ts.t3} "
            f"t4={ts.t4} offset_est={result.offset_ps} delay_est={result.delay_ps}"
        ),
    )
    return ts


DEFAULT_KP = 0.9
DEFAULT_KI = 0.6
DEFAULT_MAX_STEP_PS = 10 * MS


@dataclass(frozen=True)
class ServoState:
    """PI phase servo.

    With these gains the closed loop (measure, step, re-accumulate) has
    spectral radius sqrt(0.1) per exchange, so a millisecond of initial
    error is inside a nanosecond well within twenty exchanges and the
    integral term still tracks steady drift.  The step clamp only
    guards against wild measurements; it is far above any step the
    default gains produce from in-band offsets.
    """

    kp: float = DEFAULT_KP
    ki: float = DEFAULT_KI
    integral_ps: int = 0
    max_step_ps: int = DEFAULT_MAX_STEP_PS

    def __post_init__(self):
        if self.max_step_ps <= 0:
            raise ValueError("max_step_ps must be positive")


def servo_step(servo: ServoState, measured_offset_ps: int) -> tuple[int, ServoState]:
    """One servo update; returns (phase step, advanced state).

    The step is meant to be applied through apply_correction, whose
    sign convention already reduces the measured offset.
    """
    integral = servo.integral_ps + measured_offset_ps
    raw = servo.kp * measured_offset_ps + servo.ki * integral
    step = round_half_away(raw)
    if step > servo.max_step_ps:
        step = servo.max_step_ps
    elif step < -servo.max_step_ps:
        step = -servo.max_step_ps
    return step, replace(servo, integral_ps=integral)


class PtpSession:
    """Periodic disciplining of a slave clock against a master.

    Every ``interval_ps`` a full exchange runs over ``link``; at its
    completion the servo turns the offset estimate into a phase step on
    the slave clock.  Exchange summaries land in ``history`` as
    (completion instant, SyncResult, applied step).
    """

    def __init__(
        self,
        engine: Engine,
        master: clk.NodeClock,
        slave: clk.NodeClock,
        link: LinkDelayModel,
        *,
        interval_ps: int = SYNC_INTERVAL_PS,
        servo: ServoState = ServoState(),
        rng_fwd: Optional[RngStream] = None,
        rng_rev: Optional[RngStream] = None,
        master_node: str = "master",
        slave_node: str = "slave",
        up_at: Optional[Callable[[SimTime], bool]] = None,
    ):
        if interval_ps <= 0:
            raise ValueError("sync interval must be positive")
        self.engine = engine
        self.master = master
        self.slave = slave
        self.link = link
        self.interval_ps = interval_ps
        self.servo = servo
        self.rng_fwd = rng_fwd if rng_fwd is not None else engine.rng("ptp.fwd")
        self.rng_rev = rng_rev if rng_rev is not None else engine.rng("ptp.rev")
        self.master_node = master_node
        self.slave_node = slave_node
        self.up_at = up_at
        self.history: list[tuple[SimTime, SyncResult, int]] = []

    def start(self, at: SimTime = 0) -> None:
        self.engine.schedule(
            at,
            "controller-timer",
            self._exchange,
            node=self.master_node,
            detail=f"ptp-session peer={self.slave_node}",
        )

    def _exchange(self, eng: Engine) -> None:
        run_sync_exchange(
            eng,
            self.master,
            self.slave,
            self.link,
            self.rng_fwd,
            self.rng_rev,
            up_at=self.up_at,
            master_node=self.master_node,
            slave_node=self.slave_node,
            on_complete=self._discipline,
        )
        eng.schedule(
            eng.now + self.interval_ps,
            "controller-timer",
            self._exchange,
            node=self.master_node,
            detail=f"ptp-session peer={self.slave_node}",
        )

    def _discipline(self, eng: Engine, ts: PtpTimestamps) -> None:
        result = estimate_offset(ts)
        step, self.servo = servo_step(self.servo, result.offset_ps)
        self.slave.apply_correction(step, eng.now)
        self.history.append((eng.now, result, step))
