from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aura.domain import (
    CATEGORY_DISTRIBUTION,
    ConnectorStandard,
    FaultCategory,
    OcppVersion,
    PERSISTENT_FAULT_EVENTS,
    StationProfile,
    dump_incident_jsonl,
)
from aura.fleetsim.clock import SimClock
from aura.fleetsim.corpus import (
    fault_script_for_incident,
    generate_corpus,
    telemetry_stream_for_incident,
)
from aura.fleetsim.lru import LruCache
from aura.fleetsim.station import (
    ConnectorStatus,
    Fleet,
    PreconditionViolated,
    SimStation,
    UnknownAction,
    run_offline,
)
from aura.syncfed.wal import WalStore


def _profile(sid="CS-0001"):
    return StationProfile(
        station_id=sid,
        model="DCFC-150",
        firmware="3.2.1",
        ocpp_version=OcppVersion.V1_6J,
        connector_standard=ConnectorStandard.CCS2,
    )


class TestClock:
    def test_advance(self):
        clock = SimClock()
        clock.advance_s(2.5)
        assert clock.now_ms() == 2500
        assert clock.now_s() == 2.5

    def test_never_backward(self):
        with pytest.raises(ValueError):
            SimClock().advance_ms(-1)


class TestLru:
    def test_capacity_evicts_oldest(self):
        cache = LruCache(2)
        cache.put("a", 1)
        cache.put("b", 2)
        cache.put("c", 3)
        assert "a" not in cache and "b" in cache and "c" in cache

    def test_get_refreshes_recency(self):
        cache = LruCache(2)
        cache.put("a", 1)
        cache.put("b", 2)
        cache.get("a")
        cache.put("c", 3)
        assert "a" in cache and "b" not in cache

    def test_snapshot_restore(self):
        cache = LruCache(3)
        cache.put("a", 1)
        snap = cache.snapshot()
        cache.put("b", 2)
        cache.restore(snap)
        assert len(cache) == 1 and cache.get("a") == 1

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 9), st.integers()), max_size=50))
    def test_never_exceeds_capacity(self, ops):
        cache = LruCache(4)
        for key, value in ops:
            cache.put(key, value)
            assert len(cache) <= 4


class TestCorpus:
    def test_frequencies_match_distribution_at_10k(self):
        corpus = generate_corpus(10_000, seed=42)
        counts = Counter(i.ground_truth_category for i in corpus)
        for category, expected in CATEGORY_DISTRIBUTION.items():
            assert abs(counts[category] / 10_000 - expected) <= 0.02, category

    def test_byte_identical_under_same_seed(self):
        a = dump_incident_jsonl(generate_corpus(10_000, seed=42))
        b = dump_incident_jsonl(generate_corpus(10_000, seed=42))
        assert a.encode("utf-8") == b.encode("utf-8")

    def test_different_seed_differs(self):
        assert generate_corpus(20, seed=1) != generate_corpus(20, seed=2)

    def test_hardware_fraction_and_markers(self, corpus_small):
        hw = [i for i in corpus_small if i.resolvable_by == "hardware_only"]
        assert 0.1 <= len(hw) / len(corpus_small) <= 0.35
        for inc in hw:
            names = {e for _, e in inc.recent_events}
            assert PERSISTENT_FAULT_EVENTS <= names
        for inc in corpus_small:
            if inc.resolvable_by != "hardware_only":
                names = {e for _, e in inc.recent_events}
                assert not (PERSISTENT_FAULT_EVENTS & names)

    def test_labels_are_consistent(self, corpus_small, taxonomy):
        for inc in corpus_small:
            assert inc.error_codes[0].category is inc.ground_truth_category
            if inc.resolvable_by != "hardware_only":
                assert inc.resolvable_by == inc.error_codes[0].playbook_id

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            generate_corpus(0, seed=1)

    def test_fault_script_round_trip(self, corpus_small):
        for inc in corpus_small[:50]:
            script = fault_script_for_incident(inc)
            assert script.category is inc.ground_truth_category
            assert script.hardware_only == (inc.resolvable_by == "hardware_only")
            if not script.hardware_only:
                assert script.cleared_by is not None

    def test_stream_deterministic_per_incident(self, corpus_small):
        inc = corpus_small[0]
        a = telemetry_stream_for_incident(inc, seed=9)
        b = telemetry_stream_for_incident(inc, seed=9)
        assert np.array_equal(a, b)
        assert a.shape == (120, 7)


class TestStationActions:
    def test_unknown_action(self):
        with pytest.raises(UnknownAction):
            SimStation(_profile()).apply_action("self_destruct")

    def test_wait_advances_clock(self):
        station = SimStation(_profile(), clock=SimClock())
        station.apply_action("wait", {"duration": "5s"})
        assert station.clock.now_s() == 5.0

    def test_resolving_action_clears_software_fault(self, corpus_small):
        inc = next(i for i in corpus_small if i.resolvable_by != "hardware_only")
        script = fault_script_for_incident(inc)
        station = SimStation(_profile(), clock=SimClock())
        station.inject_fault(script)
        assert station.error_codes
        result = station.apply_action(script.cleared_by)
        assert result.ok
        assert not station.error_codes
        assert station.connector_status is ConnectorStatus.AVAILABLE

    def test_hardware_fault_never_clears(self, corpus_small):
        inc = next(i for i in corpus_small if i.resolvable_by == "hardware_only")
        station = SimStation(_profile(), clock=SimClock())
        station.inject_fault(fault_script_for_incident(inc))
        for action in ("reset_protocol_state", "clear_connection_cache", "reinitialize_tls"):
            station.apply_action(action)
        assert station.error_codes

    def test_checkpoint_restore_equality(self):
        station = SimStation(_profile(), clock=SimClock())
        station.auth_cache.put("TOK-1", True)
        before = station.observable_state()
        checkpoint = station.capture_state()
        station.apply_action("close_websocket")
        station.apply_action("adjust_config", {"set": {"x": 1}})
        station.auth_cache.put("TOK-2", True)
        station.restore_state(checkpoint)
        assert station.observable_state() == before


class TestSessions:
    def test_online_session_lifecycle(self):
        station = SimStation(_profile(), clock=SimClock())
        session = station.start_session("TOK", online=True)
        assert session is not None
        assert station.connector_status is ConnectorStatus.CHARGING
        station.clock.advance_s(1800)
        station.stop_session(session, energy_wh=22000.0)
        assert session.state == "completed"
        assert session.stop_ms - session.start_ms == 1800 * 1000

    def test_only_one_active_session(self):
        station = SimStation(_profile(), clock=SimClock())
        station.start_session("TOK", online=True)
        with pytest.raises(PreconditionViolated):
            station.start_session("TOK2", online=True)

    def test_offline_authorization_uses_cache(self):
        station = SimStation(_profile(), clock=SimClock())
        station.auth_cache.put("CACHED", True)
        assert station.start_session("CACHED", online=False) is not None

    def test_offline_unknown_token_follows_fallback(self):
        station = SimStation(_profile(), clock=SimClock())
        assert station.start_session("NEW", online=False, fallback="deny") is None
        assert station.start_session("NEW", online=False, fallback="allow") is not None


class TestOffline:
    def _fleet(self, n_stations=3, tokens=30):
        fleet = Fleet(clock=SimClock())
        rng = np.random.default_rng(5)
        for i in range(n_stations):
            station = SimStation(_profile(f"CS-{i:04d}"), clock=fleet.clock)
            for t in range(tokens):
                station.auth_cache.put(f"TOK-{t:03d}", True)
            fleet.add_station(station)
        return fleet

    def test_sessions_conserved_and_persisted(self, tmp_path):
        fleet = self._fleet()
        wal = WalStore(tmp_path / "offline.wal")
        report = run_offline(fleet, duration_hours=8, wal=wal)
        assert report.sessions_started == report.sessions_authorized + report.sessions_rejected
        assert report.sessions_persisted == report.sessions_authorized
        assert len(report.pending_sync) == report.sessions_persisted
        counts = fleet.session_counts()
        assert counts["started"] == report.sessions_authorized
        assert counts["active"] == 0

    def test_offline_run_deterministic(self, tmp_path):
        r1 = run_offline(self._fleet(), 8, WalStore(tmp_path / "a.wal"), seed=3)
        r2 = run_offline(self._fleet(), 8, WalStore(tmp_path / "b.wal"), seed=3)
        assert r1 == r2

    def test_wal_records_are_billable(self, tmp_path):
        fleet = self._fleet()
        wal = WalStore(tmp_path / "c.wal")
        run_offline(fleet, duration_hours=6, wal=wal)
        for rec in wal.recover():
            assert rec["meter_wh"] > 0
            assert rec["stop_ms"] > rec["start_ms"]
            assert rec["station_id"] in fleet.stations
