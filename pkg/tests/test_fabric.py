"""Switch, FPGA command path, links, and the power watchdog."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optosync.clock import ClockState, NodeClock
from optosync.errors import AlreadyFailed
from optosync.fabric import (
    DEFAULT_RISE_PS,
    FAILED_FLOOR_DBM,
    RISE_PRESETS,
    ArmedCommand,
    CommandMode,
    CommandStatus,
    FpgaDriver,
    OpticalLink,
    OpticalSwitch,
    PhotodiodeMonitor,
    SwitchCommand,
    resolve_rise,
)
from optosync.simcore import MS, NS, SEC, US, Engine

WIDTHS = (150 * NS, 1 * US, 1 * MS)


def make_driver(engine, offset_ps=0, drift_ppb=0, uart=100 * US, grid=0,
                rise=DEFAULT_RISE_PS, initial_port=1, node="agent"):
    nclock = NodeClock(ClockState(offset_ps=offset_ps, drift_ppb=drift_ppb))
    switch = OpticalSwitch(node, rise_ps=rise, initial_port=initial_port)
    fpga = FpgaDriver(engine, node, nclock, switch,
                      uart_latency_ps=uart, clock_grid_ps=grid)
    return fpga, switch, nclock


class TestRisePresets:
    def test_preset_values(self):
        assert RISE_PRESETS["nominal"] == 10 * NS
        assert RISE_PRESETS["measured"] == 8_400
        assert RISE_PRESETS["fast"] == 8_400
        assert DEFAULT_RISE_PS == 10 * NS

    def test_resolve_accepts_raw_picoseconds(self):
        assert resolve_rise(12_345) == 12_345

    def test_resolve_rejects_bad_input(self):
        with pytest.raises(ValueError):
            resolve_rise("warp")
        with pytest.raises(ValueError):
            resolve_rise(0)


class TestSwitch:
    def test_port_active_after_rise(self):
        sw = OpticalSwitch("a")
        tr = sw.actuate(2, at=SEC)
        assert tr.start == SEC and tr.end == SEC + 10 * NS
        assert sw.port_transmission(2, SEC + 10 * NS) == 1.0
        assert sw.port_transmission(1, SEC + 10 * NS) == 0.0

    def test_fast_preset_completes_in_8_4_ns(self):
        sw = OpticalSwitch("a", rise_ps="fast")
        tr = sw.actuate(3, at=0)
        assert tr.end - tr.start == 8_400

    def test_no_op_actuation(self):
        sw = OpticalSwitch("a", initial_port=2)
        assert sw.actuate(2, at=0) is None
        assert sw.transitions == []

    def test_linear_ramp_midpoint(self):
        sw = OpticalSwitch("a")
        sw.actuate(2, at=1000 * NS)
        assert sw.port_transmission(2, 1000 * NS + 5 * NS) == 0.5
        assert sw.port_transmission(1, 1000 * NS + 5 * NS) == 0.5

    def test_uninvolved_port_dark_during_ramp(self):
        sw = OpticalSwitch("a")
        sw.actuate(2, at=0)
        assert sw.port_transmission(3, 5 * NS) == 0.0

    def test_steady_state_coupling(self):
        sw = OpticalSwitch("a", initial_port=4)
        assert sw.port_transmission(4, 0) == 1.0
        assert sw.port_transmission(1, 0) == 0.0

    def test_preemption_snaps_old_ramp(self):
        sw = OpticalSwitch("a")
        sw.actuate(2, at=0)
        tr = sw.actuate(3, at=3 * NS)
        assert tr.from_port == 2 and tr.to_port == 3
        assert sw.port_transmission(3, 3 * NS + 10 * NS) == 1.0
        assert len(sw.transitions) == 2

    def test_port_at_reflects_commanded_route(self):
        sw = OpticalSwitch("a")
        sw.actuate(2, at=100 * NS)
        assert sw.port_at(99 * NS) == 1
        assert sw.port_at(100 * NS) == 2
        assert sw.port_at(105 * NS) == 2

    def test_rising_edge_is_half_rise(self):
        sw = OpticalSwitch("a")
        tr = sw.actuate(2, at=0)
        assert tr.rising_edge() == 5 * NS

    def test_invalid_port_rejected(self):
        sw = OpticalSwitch("a")
        with pytest.raises(ValueError):
            sw.actuate(5, at=0)
        with pytest.raises(ValueError):
            sw.port_transmission(0, 0)


class TestSubmitCommand:
    def test_immediate_actuation_latency_sum(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        handle = fpga.submit_command(SwitchCommand(target_port=2), sent_at=1 * MS)
        eng.run_until(2 * MS)
        assert handle.status is CommandStatus.FIRED
        assert handle.fired_at == 1 * MS + 100 * US
        assert sw.transitions[0].start == 1 * MS + 100 * US

    def test_pps_aligned_fires_on_next_edge(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        # Arms at 3.2 s; the next local whole-second edge is 4.0 s.
        handle = fpga.submit_command(
            SwitchCommand(target_port=2, mode=CommandMode.PPS_ALIGNED),
            sent_at=3 * SEC + 200 * MS - 100 * US,
        )
        eng.run_until(5 * SEC)
        assert handle.fired_at == 4 * SEC

    def test_pps_aligned_follows_clock_offset(self):
        eng = Engine()
        fpga, sw, nclock = make_driver(eng, offset_ps=50 * NS)
        handle = fpga.submit_command(
            SwitchCommand(target_port=2, mode=CommandMode.PPS_ALIGNED),
            sent_at=3 * SEC + 200 * MS - 100 * US,
        )
        eng.run_until(5 * SEC)
        assert handle.fired_at == 4 * SEC - 50 * NS
        assert nclock.local_time(handle.fired_at) == 4 * SEC

    def test_timestamp_command_fires_at_local_instant(self):
        eng = Engine()
        fpga, sw, nclock = make_driver(eng, offset_ps=-30 * NS)
        handle = fpga.submit_command(
            SwitchCommand(target_port=3, mode=CommandMode.AT_LOCAL_TIMESTAMP,
                          fire_at_local=2 * SEC),
            sent_at=0,
        )
        eng.run_until(3 * SEC)
        assert nclock.local_time(handle.fired_at) == 2 * SEC
        assert handle.fired_at == 2 * SEC + 30 * NS

    def test_past_timestamp_rejected_and_logged(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        handle = fpga.submit_command(
            SwitchCommand(target_port=2, mode=CommandMode.AT_LOCAL_TIMESTAMP,
                          fire_at_local=10 * NS),
            sent_at=1 * MS,
        )
        eng.run_until(2 * MS)
        assert handle.status is CommandStatus.REJECTED
        assert "local past" in handle.reject_reason
        assert sw.transitions == []
        assert any("timestamp-in-local-past" in row[4] for row in eng.trace)

    def test_command_mode_field_consistency(self):
        with pytest.raises(ValueError):
            SwitchCommand(target_port=1, mode=CommandMode.IMMEDIATE, fire_at_local=5)
        with pytest.raises(ValueError):
            SwitchCommand(target_port=1, mode=CommandMode.AT_LOCAL_TIMESTAMP)

    def test_latch_delay_bounded_by_grid(self):
        eng = Engine()
        grid = 10 * NS
        fpga, sw, _ = make_driver(eng, grid=grid, node="latchy")
        handles = []
        for i in range(50):
            port = 2 if i % 2 == 0 else 3
            handles.append(fpga.submit_command(
                SwitchCommand(target_port=port), sent_at=i * MS))
        eng.run_until(SEC)
        slips = [h.fired_at - (h.submitted_at + 100 * US) for h in handles]
        assert all(0 <= s < grid for s in slips)
        # A free-running latch must actually dither, not sit at zero.
        assert len(set(slips)) > 1

    def test_zero_grid_is_exact(self):
        eng = Engine()
        fpga, _, _ = make_driver(eng, grid=0)
        h = fpga.submit_command(SwitchCommand(target_port=2), sent_at=0)
        eng.run_until(MS)
        assert h.fired_at == 100 * US

    def test_actuation_listener_sees_transition(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        seen = []
        fpga.on_actuation.append(lambda e, f, tr: seen.append((e.now, tr.to_port)))
        fpga.submit_command(SwitchCommand(target_port=4), sent_at=0)
        eng.run_until(MS)
        assert seen == [(100 * US, 4)]


class TestGenerateWindow:
    def test_window_edges_and_width(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        fpga.generate_window(2, 150 * NS, mode=CommandMode.AT_LOCAL_TIMESTAMP,
                             fire_at_local=2 * SEC, sent_at=0)
        eng.run_until(3 * SEC)
        opened, closed = sw.transitions
        assert opened.to_port == 2 and closed.to_port == 1
        assert opened.rising_edge() == 2 * SEC + 5 * NS
        assert closed.rising_edge() - opened.rising_edge() == 150 * NS

    def test_width_must_be_positive(self):
        eng = Engine()
        fpga, _, _ = make_driver(eng)
        with pytest.raises(ValueError):
            fpga.generate_window(2, 0, fire_at_local=SEC)

    def test_pps_aligned_window_spans_the_edge(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        fpga.generate_window(2, 150 * NS, mode=CommandMode.PPS_ALIGNED, sent_at=0)
        eng.run_until(2 * SEC)
        opened, closed = sw.transitions
        assert opened.start == SEC
        assert closed.start == SEC + 150 * NS

    @settings(max_examples=30, deadline=None)
    @given(
        st.sampled_from(WIDTHS),
        st.integers(-SEC // 2, SEC // 2),
    )
    def test_width_law_under_any_offset(self, width, offset):
        # Both edges ride the same clock: an offset moves the window
        # but cannot stretch it.
        eng = Engine()
        fpga, sw, nclock = make_driver(eng, offset_ps=offset)
        anchor = nclock.local_time(2 * SEC)
        fpga.generate_window(2, width, fire_at_local=anchor, sent_at=0)
        eng.run_until(4 * SEC)
        opened, closed = sw.transitions
        measured = closed.rising_edge() - opened.rising_edge()
        assert abs(measured - width) <= 1

    def test_return_port_is_route_at_submission(self):
        eng = Engine()
        fpga, sw, _ = make_driver(eng, initial_port=3)
        fpga.generate_window(2, 1 * US, fire_at_local=SEC, sent_at=0)
        eng.run_until(2 * SEC)
        assert sw.transitions[-1].to_port == 3
        assert sw.port_at(2 * SEC) == 3

    def test_consecutive_windows_do_not_wedge_the_switch(self):
        # The closing command of each window must return to the true
        # standing port so the next window starts from the same state.
        eng = Engine()
        fpga, sw, _ = make_driver(eng)
        for k in (1, 2, 3):
            fpga.generate_window(2, 150 * NS, fire_at_local=k * SEC,
                                 sent_at=(k - 1) * SEC)
        eng.run_until(4 * SEC)
        assert len(sw.transitions) == 6
        assert [tr.to_port for tr in sw.transitions] == [2, 1, 2, 1, 2, 1]


class TestOpticalLink:
    def test_failure_is_a_step_function(self):
        eng = Engine()
        link = OpticalLink("primary", nominal_power_dbm=0.0)
        link.inject_failure(eng, at=5 * MS)
        eng.run_until(10 * MS)
        assert link.power_dbm(4_999 * US) == 0.0
        assert link.power_dbm(5 * MS) == FAILED_FLOOR_DBM
        assert link.up_at(4_999 * US) and not link.up_at(5 * MS)

    def test_double_injection_rejected(self):
        eng = Engine()
        link = OpticalLink("primary")
        link.inject_failure(eng, at=5 * MS)
        with pytest.raises(AlreadyFailed):
            link.inject_failure(eng, at=6 * MS)

    def test_injection_after_failure_rejected(self):
        eng = Engine()
        link = OpticalLink("primary")
        link.inject_failure(eng, at=1 * MS)
        eng.run_until(2 * MS)
        with pytest.raises(AlreadyFailed):
            link.inject_failure(eng, at=3 * MS)


class TestMonitor:
    def test_hand_traced_detection(self):
        # Failure lands exactly on a sampling instant; with debounce 3
        # the third consecutive low sample raises the alarm.
        eng = Engine()
        link = OpticalLink("primary", nominal_power_dbm=0.0)
        link.inject_failure(eng, at=5 * MS)
        mon = PhotodiodeMonitor(eng, "agent", link, threshold_db=3.0,
                                sample_interval_ps=10 * US, debounce_samples=3)
        mon.start(0)
        eng.run_until(6 * MS)
        assert mon.notifications == [5 * MS + 20 * US]

    def test_healthy_link_never_fires(self):
        eng = Engine()
        link = OpticalLink("primary")
        mon = PhotodiodeMonitor(eng, "agent", link)
        mon.start(0)
        eng.run_until(5 * MS)
        assert mon.notifications == []

    def test_debounce_not_met_resets(self):
        link = OpticalLink("primary", nominal_power_dbm=0.0)
        mon = PhotodiodeMonitor(Engine(), "agent", link, debounce_samples=3)
        link.failed_since = 0
        assert mon.poll(10 * US) is False
        assert mon.poll(20 * US) is False
        link.failed_since = None  # power restored before the third sample
        assert mon.poll(30 * US) is False
        assert mon.consecutive_low == 0
        # A fresh episode needs the full debounce run again.
        link.failed_since = 40 * US
        assert mon.poll(40 * US) is False
        assert mon.poll(50 * US) is False
        assert mon.poll(60 * US) is True

    def test_single_notification_per_episode(self):
        eng = Engine()
        link = OpticalLink("primary")
        link.inject_failure(eng, at=1 * MS)
        mon = PhotodiodeMonitor(eng, "agent", link)
        mon.start(0)
        eng.run_until(20 * MS)
        assert len(mon.notifications) == 1

    def test_monitor_on_backup_path_stays_quiet(self):
        eng = Engine()
        primary = OpticalLink("primary")
        backup = OpticalLink("backup")
        primary.inject_failure(eng, at=1 * MS)
        mon_p = PhotodiodeMonitor(eng, "agent", primary)
        mon_b = PhotodiodeMonitor(eng, "agent", backup)
        mon_p.start(0)
        mon_b.start(0)
        eng.run_until(10 * MS)
        assert len(mon_p.notifications) == 1
        assert mon_b.notifications == []

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100 * US))
    def test_detection_latency_bounds(self, failure_at):
        eng = Engine()
        link = OpticalLink("primary")
        link.inject_failure(eng, at=failure_at)
        interval, debounce = 10 * US, 3
        mon = PhotodiodeMonitor(eng, "agent", link,
                                sample_interval_ps=interval,
                                debounce_samples=debounce)
        mon.start(0)
        eng.run_until(failure_at + 1 * MS)
        (notified,) = mon.notifications
        latency = notified - failure_at
        assert (debounce - 1) * interval <= latency <= debounce * interval + interval

    def test_rejects_degenerate_config(self):
        eng = Engine()
        link = OpticalLink("l")
        with pytest.raises(ValueError):
            PhotodiodeMonitor(eng, "a", link, sample_interval_ps=0)
        with pytest.raises(ValueError):
            PhotodiodeMonitor(eng, "a", link, debounce_samples=0)
