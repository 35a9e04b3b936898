"""Scenario files: schema, parsing, validation, bundled examples.

Scenarios are JSON documents in which every duration is a string with
an explicit unit ("150ns", "2.7ms", "1830s").  Bare numbers are
rejected for durations; a picosecond/nanosecond mix-up that survives
loading would silently wreck every result downstream, so the loader
refuses to guess.

Validation gathers every problem it can find, each tagged with the
path of the offending field, and raises once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from . import fabric, ptp
from .clock import DEFAULT_MAX_DRIFT_PPB
from .errors import ParseError, UnknownParameter, ValidationError
from .simcore import MS, NS, PS, SEC, US

EXPERIMENTS = ("jitter_validation", "instant_recovery", "scheduled_recovery")

_UNIT_PS = {"ps": PS, "ns": NS, "us": US, "µs": US, "ms": MS, "s": SEC}
_DURATION_RE = re.compile(r"^\s*([+-]?\d+(?:\.\d+)?)(ps|ns|us|µs|ms|s)\s*$")


def parse_duration(text: str) -> int:
    """Parse a unit-suffixed duration into integer picoseconds.

    Accepts a sign and a decimal mantissa as long as the result is a
    whole number of picoseconds; "0.5ps" is as invalid as "150".
    """
    if not isinstance(text, str):
        raise ValueError(
            f"durations must be unit-suffixed strings, got {text!r}"
        )
    match = _DURATION_RE.match(text)
    if match is None:
        raise ValueError(
            f"cannot parse duration {text!r}; expected forms like '150ns' or '2.7ms'"
        )
    mantissa, unit = match.groups()
    try:
        value = Decimal(mantissa) * _UNIT_PS[unit]
    except InvalidOperation:  # pragma: no cover - regex already constrains this
        raise ValueError(f"cannot parse duration {text!r}") from None
    if value != value.to_integral_value():
        raise ValueError(
            f"duration {text!r} is not a whole number of picoseconds"
        )
    return int(value)


@dataclass(frozen=True)
class ClockSpec:
    offset_ps: int = 0
    drift_ppb: int = 0


@dataclass(frozen=True)
class SwitchSpec:
    rise_ps: int = fabric.DEFAULT_RISE_PS
    initial_port: int = 1


@dataclass(frozen=True)
class FpgaSpec:
    uart_latency_ps: int = fabric.DEFAULT_UART_LATENCY_PS
    clock_grid_ps: int = 0


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: str
    clock: ClockSpec = ClockSpec()
    switch: Optional[SwitchSpec] = None
    fpga: Optional[FpgaSpec] = None


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    power_dbm: float
    end_a: tuple[str, int]
    end_b: tuple[str, int]


@dataclass(frozen=True)
class MonitorSpec:
    monitor_id: str
    node: str
    link: str
    threshold_db: float = fabric.DEFAULT_THRESHOLD_DB
    interval_ps: int = fabric.DEFAULT_SAMPLE_INTERVAL_PS
    debounce: int = fabric.DEFAULT_DEBOUNCE_SAMPLES


@dataclass(frozen=True)
class ControlSpec:
    processing_latency_ps: int = 300 * US
    response_margin_ps: int = 0
    scheduling_overhead_ps: int = 10 * MS
    sync_burst: int = 8
    offset_refresh_ps: int = 10 * SEC
    perfect_time: bool = False
    channels: dict = field(default_factory=dict)  # agent id -> LinkDelayModel


@dataclass(frozen=True)
class WindowSpec:
    width_ps: int
    port: int


@dataclass(frozen=True)
class SyncSpec:
    master: str
    slave: str
    link: ptp.LinkDelayModel
    exchange_interval_ps: int
    servo: ptp.ServoState
    window: WindowSpec
    warmup_ps: int
    eye_bin_ps: int


@dataclass(frozen=True)
class RecoverySpec:
    failed_link: str
    failure_at_ps: int
    backup_link: str
    backup_ports: dict  # agent id -> port


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    experiment: str
    root_seed: int
    duration_ps: int
    max_drift_ppb: int
    nodes: list[NodeSpec]
    links: list[LinkSpec]
    monitors: list[MonitorSpec]
    control: ControlSpec
    sync: Optional[SyncSpec]
    recovery: Optional[RecoverySpec]
    raw: dict

    def node(self, node_id: str) -> NodeSpec:
        for spec in self.nodes:
            if spec.node_id == node_id:
                return spec
        raise KeyError(node_id)

    def agents(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role in ("agent", "grandmaster")]

    def controller(self) -> NodeSpec:
        return next(n for n in self.nodes if n.role == "controller")


class _Checker:
    """Collects validation problems tagged with field paths."""

    def __init__(self):
        self.problems: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.problems.append(f"{path}: {message}")

    def duration(self, doc: dict, key: str, path: str, default=None,
                 minimum: Optional[int] = None) -> Optional[int]:
        if key not in doc:
            if default is None and minimum is not None:
                self.add(f"{path}.{key}", "missing required duration")
                return None
            return default
        try:
            value = parse_duration(doc[key])
        except ValueError as exc:
            self.add(f"{path}.{key}", str(exc))
            return default
        if minimum is not None and value < minimum:
            self.add(f"{path}.{key}", f"must be >= {minimum} ps, got {value}")
            return default
        return value

    def integer(self, doc: dict, key: str, path: str, default=None,
                minimum: Optional[int] = None) -> Optional[int]:
        if key not in doc:
            return default
        value = doc[key]
        if not isinstance(value, int) or isinstance(value, bool):
            self.add(f"{path}.{key}", f"must be an integer, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.add(f"{path}.{key}", f"must be >= {minimum}, got {value}")
            return default
        return value

    def number(self, doc: dict, key: str, path: str, default=None):
        if key not in doc:
            return default
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(f"{path}.{key}", f"must be a number, got {value!r}")
            return default
        return float(value)


def _parse_pdv(doc: Any, path: str, check: _Checker) -> ptp.JitterProfile:
    if not isinstance(doc, dict):
        check.add(path, f"must be an object, got {doc!r}")
        return ptp.NO_PDV
    kind = doc.get("kind", "none")
    if kind not in ("none", "gaussian", "gamma"):
        check.add(f"{path}.kind", f"unknown jitter kind {kind!r}")
        return ptp.NO_PDV
    lo = check.duration(doc, "lo", path) if "lo" in doc else None
    hi = check.duration(doc, "hi", path) if "hi" in doc else None
    try:
        if kind == "none":
            return ptp.NO_PDV
        if kind == "gaussian":
            sigma = check.duration(doc, "sigma", path, minimum=0)
            if sigma is None:
                check.add(f"{path}.sigma", "gaussian variation needs a sigma")
                return ptp.NO_PDV
            if lo is None:
                lo = -4 * sigma
            if hi is None:
                hi = 4 * sigma
            return ptp.JitterProfile(kind="gaussian", sigma_ps=sigma, lo_ps=lo, hi_ps=hi)
        shape = check.number(doc, "shape", path)
        scale = check.duration(doc, "scale", path, minimum=1)
        if shape is None or scale is None:
            check.add(path, "gamma variation needs shape and scale")
            return ptp.NO_PDV
        if lo is None:
            lo = 0
        return ptp.JitterProfile(kind="gamma", shape=shape, scale_ps=scale,
                                 lo_ps=lo, hi_ps=hi)
    except ValueError as exc:
        check.add(path, str(exc))
        return ptp.NO_PDV


def _parse_link_model(doc: Any, path: str, check: _Checker) -> Optional[ptp.LinkDelayModel]:
    if not isinstance(doc, dict):
        check.add(path, "must be an object")
        return None
    if "profile" in doc:
        name = doc["profile"]
        model = ptp.LINK_PROFILES.get(name)
        if model is None:
            check.add(f"{path}.profile",
                      f"unknown profile {name!r}; known: {sorted(ptp.LINK_PROFILES)}")
            return None
        scale = check.number(doc, "pdv_scale", path, default=1.0)
        if scale is not None and scale != 1.0:
            if scale < 0:
                check.add(f"{path}.pdv_scale", "must be >= 0")
                return model
            model = model.scaled_pdv(scale)
        return model
    fwd = check.duration(doc, "fwd_base", path, minimum=1)
    rev = check.duration(doc, "rev_base", path, minimum=1)
    if fwd is None or rev is None:
        check.add(path, "inline link models need fwd_base and rev_base")
        return None
    fwd_pdv = _parse_pdv(doc.get("fwd_pdv", {"kind": "none"}), f"{path}.fwd_pdv", check)
    rev_pdv = _parse_pdv(doc.get("rev_pdv", {"kind": "none"}), f"{path}.rev_pdv", check)
    try:
        return ptp.LinkDelayModel(fwd_base_ps=fwd, rev_base_ps=rev,
                                  fwd_pdv=fwd_pdv, rev_pdv=rev_pdv)
    except ValueError as exc:
        check.add(path, str(exc))
        return None


def validate_scenario(doc: Any) -> Scenario:
    """Validate a raw scenario document; raises ValidationError listing
    every problem found."""
    check = _Checker()
    if not isinstance(doc, dict):
        raise ValidationError(["document: top level must be an object"])

    scenario_id = doc.get("id")
    if not isinstance(scenario_id, str) or not scenario_id:
        check.add("id", "missing or empty scenario id")
        scenario_id = "<unnamed>"

    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        check.add("experiment",
                  f"must be one of {EXPERIMENTS}, got {experiment!r}")
        experiment = "jitter_validation"

    root_seed = check.integer(doc, "root_seed", "", default=0, minimum=0)
    duration_ps = check.duration(doc, "duration", "", minimum=1)
    if duration_ps is None:
        check.add("duration", "missing required duration")
        duration_ps = 1
    max_drift = check.integer(doc, "max_drift_ppb", "",
                              default=DEFAULT_MAX_DRIFT_PPB, minimum=0)

    # -- nodes ---------------------------------------------------------
    nodes: list[NodeSpec] = []
    node_ids: set[str] = set()
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        check.add("nodes", "scenario needs a non-empty node list")
        raw_nodes = []
    for i, raw in enumerate(raw_nodes):
        path = f"nodes[{i}]"
        if not isinstance(raw, dict):
            check.add(path, "must be an object")
            continue
        node_id = raw.get("id")
        if not isinstance(node_id, str) or not node_id:
            check.add(f"{path}.id", "missing node id")
            node_id = f"<node-{i}>"
        if node_id in node_ids:
            check.add(f"{path}.id", f"duplicate node id {node_id!r}")
        node_ids.add(node_id)
        role = raw.get("role")
        if role not in ("controller", "agent", "grandmaster"):
            check.add(f"{path}.role",
                      f"must be controller, agent or grandmaster, got {role!r}")
            role = "agent"
        clock_doc = raw.get("clock", {})
        offset = 0
        drift = 0
        if isinstance(clock_doc, dict):
            offset = check.duration(clock_doc, "offset", f"{path}.clock", default=0)
            drift = check.integer(clock_doc, "drift_ppb", f"{path}.clock", default=0)
            if drift is not None and abs(drift) > max_drift:
                check.add(f"{path}.clock.drift_ppb",
                          f"|drift| exceeds max_drift_ppb={max_drift}")
                drift = 0
        else:
            check.add(f"{path}.clock", "must be an object")
        if role == "grandmaster" and (offset or drift):
            check.add(f"{path}.clock",
                      "a grandmaster holds the time reference; offset and drift must be zero")
            offset, drift = 0, 0
        switch_spec = None
        if "switch" in raw:
            sw = raw["switch"]
            if not isinstance(sw, dict):
                check.add(f"{path}.switch", "must be an object")
            else:
                rise_raw = sw.get("rise", "nominal")
                try:
                    rise_ps = (fabric.resolve_rise(rise_raw)
                               if isinstance(rise_raw, str) and not _DURATION_RE.match(rise_raw)
                               else parse_duration(rise_raw))
                except ValueError as exc:
                    check.add(f"{path}.switch.rise", str(exc))
                    rise_ps = fabric.DEFAULT_RISE_PS
                initial = check.integer(sw, "initial_port", f"{path}.switch",
                                        default=1, minimum=1)
                if initial is not None and initial > fabric.PORT_COUNT:
                    check.add(f"{path}.switch.initial_port",
                              f"must be 1..{fabric.PORT_COUNT}")
                    initial = 1
                switch_spec = SwitchSpec(rise_ps=rise_ps, initial_port=initial)
        fpga_spec = None
        if "fpga" in raw:
            fp = raw["fpga"]
            if not isinstance(fp, dict):
                check.add(f"{path}.fpga", "must be an object")
            else:
                uart = check.duration(fp, "uart_latency", f"{path}.fpga",
                                      default=fabric.DEFAULT_UART_LATENCY_PS, minimum=0)
                grid = check.duration(fp, "clock_grid", f"{path}.fpga",
                                      default=0, minimum=0)
                fpga_spec = FpgaSpec(uart_latency_ps=uart, clock_grid_ps=grid)
        if switch_spec is not None and fpga_spec is None:
            fpga_spec = FpgaSpec()
        if role == "controller" and switch_spec is not None:
            check.add(f"{path}.switch", "the controller drives no switch of its own")
        nodes.append(NodeSpec(node_id=node_id, role=role,
                              clock=ClockSpec(offset_ps=offset or 0, drift_ppb=drift or 0),
                              switch=switch_spec, fpga=fpga_spec))

    controllers = [n for n in nodes if n.role == "controller"]
    if len(controllers) != 1:
        check.add("nodes", f"exactly one controller required, found {len(controllers)}")
    grandmasters = [n for n in nodes if n.role == "grandmaster"]
    if len(grandmasters) > 1:
        check.add("nodes", "at most one grandmaster is allowed")
    if not any(n.role in ("agent", "grandmaster") for n in nodes):
        check.add("nodes", "at least one agent is required")

    # -- optical links ---------------------------------------------------
    links: list[LinkSpec] = []
    link_ids: set[str] = set()
    for i, raw in enumerate(doc.get("links", [])):
        path = f"links[{i}]"
        if not isinstance(raw, dict):
            check.add(path, "must be an object")
            continue
        link_id = raw.get("id")
        if not isinstance(link_id, str) or not link_id:
            check.add(f"{path}.id", "missing link id")
            link_id = f"<link-{i}>"
        if link_id in link_ids:
            check.add(f"{path}.id", f"duplicate link id {link_id!r}")
        link_ids.add(link_id)
        power = check.number(raw, "power_dbm", path, default=0.0)
        ends = raw.get("ends")
        parsed_ends = []
        if (not isinstance(ends, list)) or len(ends) != 2:
            check.add(f"{path}.ends", "a link needs exactly two (node, port) ends")
        else:
            for j, end in enumerate(ends):
                epath = f"{path}.ends[{j}]"
                if (not isinstance(end, list)) or len(end) != 2:
                    check.add(epath, "must be a [node, port] pair")
                    continue
                node_ref, port = end
                if node_ref not in node_ids:
                    check.add(epath, f"link {link_id!r} references unknown node {node_ref!r}")
                    continue
                spec = next(n for n in nodes if n.node_id == node_ref)
                if spec.switch is None:
                    check.add(epath, f"node {node_ref!r} has no switch to terminate {link_id!r}")
                    continue
                if not isinstance(port, int) or not 1 <= port <= fabric.PORT_COUNT:
                    check.add(epath, f"port must be 1..{fabric.PORT_COUNT}, got {port!r}")
                    continue
                parsed_ends.append((node_ref, port))
        if len(parsed_ends) == 2:
            links.append(LinkSpec(link_id=link_id, power_dbm=power,
                                  end_a=tuple(parsed_ends[0]),
                                  end_b=tuple(parsed_ends[1])))

    # -- monitors ----------------------------------------------------------
    monitors: list[MonitorSpec] = []
    for i, raw in enumerate(doc.get("monitors", [])):
        path = f"monitors[{i}]"
        if not isinstance(raw, dict):
            check.add(path, "must be an object")
            continue
        monitor_id = raw.get("id", f"monitor-{i}")
        node_ref = raw.get("node")
        link_ref = raw.get("link")
        if node_ref not in node_ids:
            check.add(f"{path}.node", f"monitor references unknown node {node_ref!r}")
            continue
        if link_ref not in link_ids:
            check.add(f"{path}.link", f"monitor references unknown link {link_ref!r}")
            continue
        threshold = check.number(raw, "threshold_db", path,
                                 default=fabric.DEFAULT_THRESHOLD_DB)
        interval = check.duration(raw, "interval", path,
                                  default=fabric.DEFAULT_SAMPLE_INTERVAL_PS, minimum=1)
        debounce = check.integer(raw, "debounce", path,
                                 default=fabric.DEFAULT_DEBOUNCE_SAMPLES, minimum=1)
        monitors.append(MonitorSpec(monitor_id=monitor_id, node=node_ref,
                                    link=link_ref, threshold_db=threshold,
                                    interval_ps=interval, debounce=debounce))

    # -- control plane -------------------------------------------------------
    control_doc = doc.get("control", {})
    channels: dict[str, ptp.LinkDelayModel] = {}
    control = ControlSpec()
    if not isinstance(control_doc, dict):
        check.add("control", "must be an object")
    else:
        for agent_id, raw in sorted(control_doc.get("channels", {}).items()):
            path = f"control.channels.{agent_id}"
            if agent_id not in node_ids:
                check.add(path, f"channel references unknown node {agent_id!r}")
                continue
            model = _parse_link_model(raw, path, check)
            if model is not None:
                channels[agent_id] = model
        control = ControlSpec(
            processing_latency_ps=check.duration(
                control_doc, "processing_latency", "control",
                default=300 * US, minimum=0),
            response_margin_ps=check.duration(
                control_doc, "response_margin", "control", default=0, minimum=0),
            scheduling_overhead_ps=check.duration(
                control_doc, "scheduling_overhead", "control",
                default=10 * MS, minimum=0),
            sync_burst=check.integer(control_doc, "sync_burst", "control",
                                     default=8, minimum=1),
            offset_refresh_ps=check.duration(
                control_doc, "offset_refresh", "control",
                default=10 * SEC, minimum=1),
            perfect_time=bool(control_doc.get("perfect_time", False)),
            channels=channels,
        )

    # -- experiment sections ---------------------------------------------------
    sync_spec = None
    if experiment == "jitter_validation":
        raw = doc.get("sync")
        if not isinstance(raw, dict):
            check.add("sync", "jitter_validation scenarios need a sync section")
        else:
            master = raw.get("master")
            slave = raw.get("slave")
            for key, ref in (("master", master), ("slave", slave)):
                if ref not in node_ids:
                    check.add(f"sync.{key}", f"references unknown node {ref!r}")
            if master == slave:
                check.add("sync.slave", "master and slave must differ")
            link = _parse_link_model(raw.get("link", {"profile": "ptp-enabled"}),
                                     "sync.link", check)
            servo_doc = raw.get("servo", {})
            kp = check.number(servo_doc, "kp", "sync.servo", default=ptp.DEFAULT_KP)
            ki = check.number(servo_doc, "ki", "sync.servo", default=ptp.DEFAULT_KI)
            max_step = check.duration(servo_doc, "max_step", "sync.servo",
                                      default=ptp.DEFAULT_MAX_STEP_PS, minimum=1)
            window_doc = raw.get("window", {})
            width = check.duration(window_doc, "width", "sync.window",
                                   default=150 * NS, minimum=1)
            port = check.integer(window_doc, "port", "sync.window",
                                 default=2, minimum=1)
            if port is not None and port > fabric.PORT_COUNT:
                check.add("sync.window.port", f"must be 1..{fabric.PORT_COUNT}")
                port = 2
            interval = check.duration(raw, "exchange_interval", "sync",
                                      default=ptp.SYNC_INTERVAL_PS, minimum=1)
            warmup = check.duration(raw, "warmup", "sync", default=0, minimum=0)
            eye_bin = check.duration(raw, "eye_bin", "sync",
                                     default=5 * NS, minimum=1)
            if link is not None and master in node_ids and slave in node_ids and master != slave:
                master_spec = next(n for n in nodes if n.node_id == master)
                slave_spec = next(n for n in nodes if n.node_id == slave)
                for ref, spec in (("master", master_spec), ("slave", slave_spec)):
                    if spec.switch is None or spec.fpga is None:
                        check.add(f"sync.{ref}",
                                  f"node {spec.node_id!r} needs a switch and fpga")
                sync_spec = SyncSpec(
                    master=master, slave=slave, link=link,
                    exchange_interval_ps=interval,
                    servo=ptp.ServoState(kp=kp, ki=ki, max_step_ps=max_step),
                    window=WindowSpec(width_ps=width, port=port),
                    warmup_ps=warmup, eye_bin_ps=eye_bin,
                )

    recovery_spec = None
    if experiment in ("instant_recovery", "scheduled_recovery"):
        raw = doc.get("recovery")
        if not isinstance(raw, dict):
            check.add("recovery", f"{experiment} scenarios need a recovery section")
        else:
            failed = raw.get("failed_link")
            if failed not in link_ids:
                check.add("recovery.failed_link",
                          f"references unknown link {failed!r}")
            failure_at = check.duration(raw, "failure_at", "recovery", minimum=0)
            if failure_at is None:
                check.add("recovery.failure_at", "missing required duration")
                failure_at = 0
            backup = raw.get("backup")
            backup_link = None
            backup_ports: dict[str, int] = {}
            if not isinstance(backup, dict):
                check.add("recovery.backup", "missing backup path description")
            else:
                backup_link = backup.get("link")
                if backup_link not in link_ids:
                    check.add("recovery.backup.link",
                              f"references unknown link {backup_link!r}")
                ports = backup.get("ports")
                if not isinstance(ports, dict) or not ports:
                    check.add("recovery.backup.ports",
                              "needs a {agent: port} mapping")
                else:
                    for agent_id, port in sorted(ports.items()):
                        if agent_id not in node_ids:
                            check.add(f"recovery.backup.ports.{agent_id}",
                                      "references an unknown node")
                            continue
                        if not isinstance(port, int) or not 1 <= port <= fabric.PORT_COUNT:
                            check.add(f"recovery.backup.ports.{agent_id}",
                                      f"port must be 1..{fabric.PORT_COUNT}")
                            continue
                        backup_ports[agent_id] = port
            if not monitors:
                check.add("monitors",
                          f"{experiment} scenarios need at least one monitor")
            if failed in link_ids and backup_link in link_ids and backup_ports:
                recovery_spec = RecoverySpec(
                    failed_link=failed, failure_at_ps=failure_at,
                    backup_link=backup_link, backup_ports=backup_ports,
                )

    if check.problems:
        raise ValidationError(check.problems)
    return Scenario(
        scenario_id=scenario_id,
        experiment=experiment,
        root_seed=root_seed,
        duration_ps=duration_ps,
        max_drift_ppb=max_drift,
        nodes=nodes,
        links=links,
        monitors=monitors,
        control=control,
        sync=sync_spec,
        recovery=recovery_spec,
        raw=doc,
    )


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file (a path or a bundled name)."""
    resolved = resolve_scenario_path(path)
    try:
        text = Path(resolved).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario file {path!r} is not valid JSON: {exc}") from exc
    return validate_scenario(doc)


def bundled_names() -> list[str]:
    """Names of the scenario files shipped inside the package."""
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(path) -> Path:
    """Resolve a filesystem path, falling back to bundled names."""
    p = Path(path)
    if p.exists():
        return p
    name = str(path)
    if name.endswith(".json"):
        name = name[:-5]
    candidate = resources.files(__package__) / "scenarios" / f"{name}.json"
    if candidate.is_file():
        return Path(str(candidate))
    raise ParseError(
        f"scenario {path!r} is neither a file nor a bundled name; "
        f"bundled: {bundled_names()}"
    )


def set_by_path(doc: dict, dotted: str, value) -> None:
    """Assign into a nested document by dotted path; sweep helper.

    Every intermediate key must already exist: sweeps vary parameters a
    scenario actually has, they do not invent new ones.
    """
    parts = dotted.split(".")
    here: Any = doc
    for i, part in enumerate(parts[:-1]):
        if isinstance(here, list):
            try:
                here = here[int(part)]
                continue
            except (ValueError, IndexError):
                raise UnknownParameter(
                    f"no element {part!r} under {'.'.join(parts[:i]) or '<root>'}"
                ) from None
        if not isinstance(here, dict) or part not in here:
            raise UnknownParameter(
                f"no key {part!r} under {'.'.join(parts[:i]) or '<root>'}"
            )
        here = here[part]
    leaf = parts[-1]
    if isinstance(here, list):
        try:
            here[int(leaf)] = value
            return
        except (ValueError, IndexError):
            raise UnknownParameter(f"no element {leaf!r} in list") from None
    if not isinstance(here, dict) or leaf not in here:
        raise UnknownParameter(f"scenario has no parameter {dotted!r}")
    here[leaf] = value
