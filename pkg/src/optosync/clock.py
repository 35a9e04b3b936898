"""Per-node clocks: offset, linear drift, 1PPS edges, phase corrections.

A clock is described by the local reading it had at its last update and
a drift rate in parts per billion.  For any simulation instant
``t >= updated_at`` the local reading is

    local(t) = (updated_at + offset_ps) + elapsed + skew(elapsed)

where ``elapsed = t - updated_at`` and ``skew`` is
``elapsed * drift_ppb / 1e9`` rounded half away from zero.  The inverse
mapping divides by ``(1e9 + drift_ppb) / 1e9`` under the same rounding
rule, which keeps round trips within one picosecond.

All arithmetic is exact integer math; drift rates are integer ppb.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .errors import PpsDisabled, TimeBeforeUpdate
from .simcore import SEC, Engine, SimTime, div_round_half_away

PPB = 10**9

# Fractional-frequency accuracy band of the oscillators being modeled.
# Scenario validation applies this bound; see scenario.MAX_DRIFT_PPB_KEY.
DEFAULT_MAX_DRIFT_PPB = 100


@dataclass(frozen=True)
class ClockState:
    """Immutable snapshot of a node clock.

    offset_ps is local minus reference at updated_at; drift_ppb is the
    signed rate error.  Rates at or beyond +/-1e9 ppb would make the
    local mapping non-invertible and are rejected outright.
    """

    offset_ps: int
    drift_ppb: int
    updated_at: SimTime = 0

    def __post_init__(self):
        if abs(self.drift_ppb) >= PPB:
            raise ValueError(
                f"drift {self.drift_ppb} ppb leaves no invertible time mapping"
            )


IDEAL = ClockState(offset_ps=0, drift_ppb=0, updated_at=0)


@dataclass(frozen=True)
class PpsConfig:
    """1PPS output configuration; period is in picoseconds."""

    period: int = SEC
    enabled: bool = True

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("pps period must be positive")


def local_time(clock: ClockState, t: SimTime) -> int:
    """Local reading of ``clock`` at simulation instant ``t``."""
    if t < clock.updated_at:
        raise TimeBeforeUpdate(
            f"query at {t} ps precedes clock update at {clock.updated_at} ps"
        )
    elapsed = t - clock.updated_at
    skew = div_round_half_away(elapsed * clock.drift_ppb, PPB)
    return clock.updated_at + clock.offset_ps + elapsed + skew


def sim_time_of_local(clock: ClockState, local: int) -> SimTime:
    """Simulation instant at which ``clock`` reads ``local``.

    Inverse of local_time under the shared rounding rule; the round
    trip sim -> local -> sim lands within 1 ps of where it started.
    """
    base_local = clock.updated_at + clock.offset_ps
    if local < base_local:
        raise TimeBeforeUpdate(
            f"local reading {local} ps precedes the clock's last update"
        )
    elapsed = div_round_half_away((local - base_local) * PPB, PPB + clock.drift_ppb)
    return clock.updated_at + elapsed


def next_pps_edge(clock: ClockState, cfg: PpsConfig, after: SimTime) -> SimTime:
    """First instant strictly after ``after`` whose local reading sits on
    a period boundary.

    An ``after`` that falls exactly on an edge yields the following
    edge.  With nonzero drift the rounded mapping can make a boundary
    land between integer instants; the returned instant is then the
    first one at or past the boundary, which stays within 1 ps of the
    exact crossing for any in-band drift.
    """
    if not cfg.enabled:
        raise PpsDisabled("clock has no 1PPS output configured")
    period = cfg.period
    target = (local_time(clock, after) // period + 1) * period
    t = sim_time_of_local(clock, target)
    while local_time(clock, t) < target:
        t += 1
    while t - 1 > after and t - 1 >= clock.updated_at and local_time(clock, t - 1) >= target:
        t -= 1
    return t


def apply_correction(clock: ClockState, phase_step_ps: int, at: SimTime) -> ClockState:
    """Apply a phase step, rebasing the state at ``at``.

    The returned state reads ``phase_step_ps`` earlier than the old
    state would have read at the same instant; drift is untouched.
    Steps of opposite sign applied at one instant cancel exactly.
    """
    if at < clock.updated_at:
        raise TimeBeforeUpdate(
            f"correction at {at} ps precedes clock update at {clock.updated_at} ps"
        )
    offset_now = local_time(clock, at) - at
    return replace(
        clock,
        offset_ps=offset_now - phase_step_ps,
        updated_at=at,
    )


class NodeClock:
    """Mutable clock holder shared by the actors of one node.

    The FPGA driver, the PPS source and the sync servo all read and
    correct the same underlying state through this object.
    """

    def __init__(self, state: ClockState, pps: PpsConfig = PpsConfig()):
        self.state = state
        self.pps = pps

    def local_time(self, t: SimTime) -> int:
        return local_time(self.state, t)

    def sim_time_of_local(self, local: int) -> SimTime:
        return sim_time_of_local(self.state, local)

    def next_pps_edge(self, after: SimTime) -> SimTime:
        return next_pps_edge(self.state, self.pps, after)

    def apply_correction(self, phase_step_ps: int, at: SimTime) -> None:
        self.state = apply_correction(self.state, phase_step_ps, at)

    def offset_at(self, t: SimTime) -> int:
        """True local-minus-reference offset at ``t``."""
        return self.local_time(t) - t


def schedule_at_local(
    engine: Engine,
    nclock: NodeClock,
    target_local: int,
    kind: str,
    callback: Callable[[Engine], None],
    node: str = "",
    detail: str = "",
) -> None:
    """Run ``callback`` at the instant ``nclock`` reads ``target_local``.

    The fire instant is recomputed when the event pops, so a phase
    correction applied between scheduling and firing moves the callback
    with the clock.  If a correction has already carried local time past
    the target, the callback runs immediately (late), matching hardware
    that reacts to its clock rather than to a prediction of it.
    """

    def estimate(now: SimTime) -> Optional[SimTime]:
        # Returns the first instant >= now whose local reading reaches
        # the target, or None when it has already been reached.
        if nclock.local_time(now) >= target_local:
            return None
        t = max(nclock.sim_time_of_local(target_local), now)
        while nclock.local_time(t) < target_local:
            t += 1
        return t

    def fire(eng: Engine) -> None:
        t_star = estimate(eng.now)
        if t_star is not None and t_star > eng.now:
            eng.schedule(t_star, kind, fire, node=node, detail=detail)
            return
        callback(eng)

    first = estimate(engine.now)
    engine.schedule(first if first is not None else engine.now, kind, fire,
                    node=node, detail=detail)


class PpsSource:
    """Emits a pps-edge event at every local period crossing of a node.

    Edges are tracked by their multiple index k (local reading equals
    k * period), recorded as (k, fire instant) pairs, and announced to
    any registered listeners.
    """

    def __init__(self, engine: Engine, nclock: NodeClock, node: str):
        if not nclock.pps.enabled:
            raise PpsDisabled(f"node {node!r} has no 1PPS output configured")
        self.engine = engine
        self.nclock = nclock
        self.node = node
        self.edges: list[tuple[int, SimTime]] = []
        self.listeners: list[Callable[[Engine, int, SimTime], None]] = []

    def start(self, after: SimTime = 0) -> None:
        period = self.nclock.pps.period
        k = local_time(self.nclock.state, max(after, self.nclock.state.updated_at)) // period + 1
        self._arm(k)

    def _arm(self, k: int) -> None:
        period = self.nclock.pps.period
        schedule_at_local(
            self.engine,
            self.nclock,
            k * period,
            "pps-edge",
            lambda eng: self._emit(eng, k),
            node=self.node,
            detail=f"k={k}",
        )

    def _emit(self, eng: Engine, k: int) -> None:
        self.edges.append((k, eng.now))
        for listener in self.listeners:
            listener(eng, k, eng.now)
        self._arm(k + 1)
