"""Edge traces, jitter statistics, eye histograms, recovery records.

Samples are integer picoseconds throughout; only the derived mean and
standard deviation are floats.  The headline jitter figure is peak to
peak, matching how a scope cursor pair reads an edge cloud; the
standard deviation rides along for anyone who prefers an RMS view.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field

from .errors import EmptyTrace, IncompleteRecord
from .simcore import NS, SimTime

DEFAULT_EYE_BIN_PS = 5 * NS


@dataclass
class EdgeTrace:
    """Signed edge-position samples relative to a trigger, in ps."""

    samples: list[int] = field(default_factory=list)

    def append(self, delta_ps: int) -> None:
        self.samples.append(delta_ps)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class JitterStats:
    p2p_ps: int
    stddev_ps: float
    mean_ps: float
    count: int


def jitter_stats(trace: EdgeTrace) -> JitterStats:
    """Summarize an edge trace.

    Peak to peak and mean are exact; the standard deviation is the
    population form (the trace is the whole measurement, not a sample
    of something larger).  A single-sample trace has spread zero.
    """
    samples = trace.samples
    if not samples:
        raise EmptyTrace("no edge samples collected")
    return JitterStats(
        p2p_ps=max(samples) - min(samples),
        stddev_ps=statistics.pstdev(samples) if len(samples) > 1 else 0.0,
        mean_ps=statistics.fmean(samples),
        count=len(samples),
    )


@dataclass
class EyeHistogram:
    """Histogram of edge positions relative to the trigger.

    Bins are half-open [k*bin, (k+1)*bin) over signed deltas; the
    vertical axis is a plain hit count.
    """

    bin_width_ps: int = DEFAULT_EYE_BIN_PS
    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise ValueError("bin width must be positive")

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())

    def bin_center(self, index: int) -> int:
        return index * self.bin_width_ps + self.bin_width_ps // 2


def accumulate_eye(hist: EyeHistogram, edge_deltas_ps) -> None:
    """Fold one repetition's edge positions into the histogram."""
    for delta in edge_deltas_ps:
        index = delta // hist.bin_width_ps
        hist.counts[index] = hist.counts.get(index, 0) + 1


@dataclass(frozen=True)
class RecoveryRecord:
    """Timeline of one failure-to-restoration episode, all in ps."""

    link_id: str
    mode: str
    failure_at: SimTime
    detected_at: SimTime
    notified_at: SimTime
    plan_issued_at: SimTime
    actuation_start: dict[str, SimTime]
    restored_at: SimTime

    def __post_init__(self):
        if not self.actuation_start:
            raise IncompleteRecord("recovery record has no actuations")
        order = [
            ("failure_at", self.failure_at),
            ("detected_at", self.detected_at),
            ("notified_at", self.notified_at),
            ("plan_issued_at", self.plan_issued_at),
            ("first actuation", min(self.actuation_start.values())),
            ("last actuation", max(self.actuation_start.values())),
            ("restored_at", self.restored_at),
        ]
        for (name_a, a), (name_b, b) in zip(order, order[1:]):
            if b < a:
                raise IncompleteRecord(
                    f"{name_b} ({b}) precedes {name_a} ({a})"
                )

    @property
    def total_ps(self) -> int:
        return self.restored_at - self.failure_at


@dataclass(frozen=True)
class RecoveryBreakdown:
    """Stage durations; they sum to the total by construction."""

    detection_ps: int
    notification_ps: int
    processing_ps: int
    command_transport_ps: int
    arming_actuation_ps: int
    total_ps: int


def recovery_breakdown(record: RecoveryRecord) -> RecoveryBreakdown:
    last_actuation = max(record.actuation_start.values())
    return RecoveryBreakdown(
        detection_ps=record.detected_at - record.failure_at,
        notification_ps=record.notified_at - record.detected_at,
        processing_ps=record.plan_issued_at - record.notified_at,
        command_transport_ps=last_actuation - record.plan_issued_at,
        arming_actuation_ps=record.restored_at - last_actuation,
        total_ps=record.total_ps,
    )


# -- CSV export ----------------------------------------------------------
#
# All writers emit a header row, '.' decimals, and rows in a fixed
# order, so byte-identical reruns are a property of the data alone.

def write_edges_csv(path, trace: EdgeTrace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("rep", "delta_ps"))
        for rep, delta in enumerate(trace.samples):
            writer.writerow((rep, delta))


def write_eye_csv(path, hist: EyeHistogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("bin_center_ps", "count"))
        for index in sorted(hist.counts):
            writer.writerow((hist.bin_center(index), hist.counts[index]))


RECOVERY_COLUMNS = (
    "link_id", "mode", "failure_at_ps", "detected_at_ps", "notified_at_ps",
    "plan_issued_at_ps", "first_actuation_ps", "last_actuation_ps",
    "restored_at_ps", "detection_ps", "notification_ps", "processing_ps",
    "command_transport_ps", "arming_actuation_ps", "total_ps",
)


def write_recovery_csv(path, records: list[RecoveryRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECOVERY_COLUMNS)
        for record in records:
            b = recovery_breakdown(record)
            writer.writerow((
                record.link_id,
                record.mode,
                record.failure_at,
                record.detected_at,
                record.notified_at,
                record.plan_issued_at,
                min(record.actuation_start.values()),
                max(record.actuation_start.values()),
                record.restored_at,
                b.detection_ps,
                b.notification_ps,
                b.processing_ps,
                b.command_transport_ps,
                b.arming_actuation_ps,
                b.total_ps,
            ))


SUMMARY_COLUMNS = (
    "scenario_id", "seed", "experiment",
    "window_p2p_ps", "window_stddev_ps", "window_count",
    "pps_p2p_ps", "pps_stddev_ps", "pps_count",
    "recovery_total_ps",
)


def write_summary_csv(path, row: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow(tuple(row.get(col, "") for col in SUMMARY_COLUMNS))
