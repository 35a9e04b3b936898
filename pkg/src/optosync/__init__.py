"""Deterministic simulation of PTP-disciplined optical switching.

Picosecond-integer event simulation of a control plane driving
nanosecond optical switches: clock drift and correction, two-way time
transfer with a PI servo, FPGA-armed switch actuation, link failure
detection and recovery, and the jitter/recovery metrics to evaluate
them.  Scenario JSON files drive full experiments via the CLI.
"""

from .clock import (
    ClockState,
    IDEAL,
    NodeClock,
    PpsConfig,
    PpsSource,
    apply_correction,
    local_time,
    next_pps_edge,
    schedule_at_local,
    sim_time_of_local,
)
from .control import Agent, ControlChannel, Controller, FailureNotification
from .errors import OptosyncError, ParseError, ValidationError
from .fabric import (
    CommandMode,
    FpgaDriver,
    OpticalLink,
    OpticalSwitch,
    PhotodiodeMonitor,
    SwitchCommand,
    Transition,
)
from .metrics import (
    EdgeTrace,
    EyeHistogram,
    JitterStats,
    RecoveryBreakdown,
    RecoveryRecord,
    accumulate_eye,
    jitter_stats,
    recovery_breakdown,
)
from .ptp import (
    LINK_PROFILES,
    LinkDelayModel,
    PtpSession,
    PtpTimestamps,
    ServoState,
    estimate_offset,
    run_sync_exchange,
    servo_step,
)
from .runner import RunReport, run_scenario
from .scenario import Scenario, load_scenario, parse_duration, validate_scenario
from .simcore import (
    Engine,
    MS,
    NS,
    PS,
    RngStream,
    SEC,
    US,
    div_round_half_away,
    round_half_away,
)

__version__ = "0.1.0"
