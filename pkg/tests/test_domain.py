import json
import math

import pytest
from hypothesis import given, strategies as st

from aura.domain import (
    AvailabilityModel,
    Criticality,
    DuplicateCode,
    FaultCategory,
    LoopDelay,
    OutOfRange,
    ParseError,
    default_taxonomy,
    dump_incident_jsonl,
    incident_from_json,
    incident_to_json,
    load_error_taxonomy,
    load_incident_jsonl,
    loop_delay_total,
    pilot_available_current,
    serialize_error_taxonomy,
    system_availability,
)
from aura.fleetsim.corpus import generate_corpus


class TestAvailability:
    def test_reference_point(self):
        # 0.999 * 0.92 * 0.997 = 0.91632...
        a = system_availability(AvailabilityModel(0.999, 0.92, 0.997))
        assert abs(a - 0.9163) < 0.0005

    def test_perfect_chain(self):
        assert system_availability(AvailabilityModel(1.0, 1.0, 1.0)) == 1.0

    @given(
        st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0)
    )
    def test_product_bounded_by_weakest_link(self, a, b, c):
        avail = system_availability(AvailabilityModel(a, b, c))
        assert avail <= min(a, b, c) + 1e-12

    def test_rejects_zero(self):
        with pytest.raises(Exception):
            AvailabilityModel(0.0, 0.9, 0.9)


class TestLoopDelay:
    def test_sum(self):
        assert loop_delay_total(LoopDelay(1.0, 2.5, 0.5, 1.0)) == 5.0

    def test_negative_rejected(self):
        with pytest.raises(Exception):
            LoopDelay(-1.0, 0, 0, 0)


class TestPilotCurrent:
    def test_low_branch(self):
        assert math.isclose(pilot_available_current(50.0), 30.0)

    def test_boundary_85(self):
        assert pilot_available_current(85.0) == 51.0

    def test_top_of_range(self):
        assert pilot_available_current(96.0) == 80.0

    def test_branch_boundary_belongs_to_low_range(self):
        # approaching 85% from below converges to the value at exactly 85%
        at = pilot_available_current(85.0)
        below = pilot_available_current(85.0 - 1e-9)
        assert abs(at - below) < 1e-8
        assert at == 51.0

    @pytest.mark.parametrize("d", [10.0, 9.0, 96.1, 0.0, -5.0, 100.0])
    def test_out_of_range(self, d):
        with pytest.raises(OutOfRange):
            pilot_available_current(d)

    @given(st.floats(11.0, 96.0))
    def test_monotone_nondecreasing(self, d):
        # current never decreases as duty cycle grows
        lower = pilot_available_current(d - 0.5)
        assert pilot_available_current(d) >= lower - 1e-9


class TestTaxonomy:
    def test_default_loads(self, taxonomy):
        assert len(taxonomy) >= 25
        assert taxonomy["GroundFailure"].playbook_id == "DIAG-SAFETY-001"
        assert taxonomy["GroundFailure"].criticality is Criticality.CRITICAL
        assert taxonomy["NoError"].playbook_id is None

    def test_all_categories_covered(self, taxonomy):
        cats = {ec.category for ec in taxonomy.values() if ec.playbook_id}
        assert cats == set(FaultCategory)

    def test_round_trip(self, taxonomy):
        text = serialize_error_taxonomy(taxonomy)
        assert load_error_taxonomy(text) == taxonomy

    def test_parse_error_reports_line(self):
        with pytest.raises(ParseError) as err:
            load_error_taxonomy("Taxonomy:\n  G:\n    - not a valid line\n")
        assert err.value.line == 3

    def test_duplicate_code(self):
        text = "Taxonomy:\n  G:\n    - A -> NULL\n    - A -> NULL\n"
        with pytest.raises(DuplicateCode):
            load_error_taxonomy(text)


class TestIncidentJson:
    def test_round_trip(self, taxonomy, corpus_small):
        for inc in corpus_small[:40]:
            doc = incident_to_json(inc)
            back = incident_from_json(doc, taxonomy)
            assert back == inc

    def test_jsonl_round_trip_and_determinism(self, taxonomy):
        corpus = generate_corpus(50, seed=5)
        text1 = dump_incident_jsonl(corpus)
        text2 = dump_incident_jsonl(generate_corpus(50, seed=5))
        assert text1 == text2
        assert load_incident_jsonl(text1, taxonomy) == corpus

    def test_canonical_sorted_keys(self):
        corpus = generate_corpus(3, seed=5)
        line = dump_incident_jsonl(corpus).splitlines()[0]
        doc = json.loads(line)
        assert line == json.dumps(doc, sort_keys=True, separators=(",", ":"))
