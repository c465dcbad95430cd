import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchlin.document import document_from, dump_document, load_document
from switchlin.errors import InvalidInputError, OutOfHorizonError
from switchlin.model import (ContinuousSignal, DiscreteSignal, Flow, HybridSignal, HybridSystem,
                             Jump, SwitchedSystem, active_index, hybrid_segments,
                             random_discrete_signal, random_signal, segments_up_to, validate,
                             validate_hybrid)


def approx_pairs(actual, expected):
    assert len(actual) == len(expected)
    for (i, d), (j, e) in zip(actual, expected):
        assert i == j
        assert d == pytest.approx(e, abs=1e-12)


segment = st.tuples(st.integers(1, 3), st.floats(0.05, 2.0))
signals = st.builds(ContinuousSignal,
                    prefix=st.lists(segment, max_size=4).map(tuple),
                    tail=st.lists(segment, min_size=1, max_size=5).map(tuple))


class TestSwitchedSystem:
    def test_dimensions(self):
        s = SwitchedSystem(([[1.0, 0], [0, 1]], [[0, 1], [1, 0]]), "continuous")
        assert s.n == 2 and s.dim == 2
        np.testing.assert_array_equal(s.matrix(2), [[0, 1], [1, 0]])

    def test_matrices_read_only(self):
        s = SwitchedSystem(([[1.0]],), "discrete")
        with pytest.raises(ValueError):
            s.matrix(1)[0, 0] = 2.0

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(InvalidInputError):
            SwitchedSystem(([[1.0]], np.eye(2)), "continuous")

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            SwitchedSystem((), "continuous")

    def test_bad_role(self):
        with pytest.raises(InvalidInputError):
            SwitchedSystem(([[1.0]],), "sideways")

    def test_index_out_of_range(self):
        s = SwitchedSystem(([[1.0]],), "continuous")
        with pytest.raises(InvalidInputError):
            s.matrix(2)

    def test_hybrid_dimension_check(self):
        with pytest.raises(InvalidInputError):
            HybridSystem(SwitchedSystem(([[1.0]],), "continuous"),
                         SwitchedSystem((np.eye(2),), "discrete"))


class TestActiveIndex:
    def test_start(self):
        assert active_index(ContinuousSignal(prefix=((1, 2.0), (2, 1.0))), 0.0) == 1

    def test_right_continuous(self):
        assert active_index(ContinuousSignal(prefix=((1, 2.0), (2, 1.0))), 2.0) == 2

    def test_periodic_unrolling(self):
        assert active_index(ContinuousSignal(tail=((1, 2.0), (2, 1.0))), 7.5) == 1

    def test_beyond_finite_horizon(self):
        with pytest.raises(OutOfHorizonError):
            active_index(ContinuousSignal(prefix=((1, 2.0),)), 2.0)

    def test_negative_time(self):
        with pytest.raises(InvalidInputError):
            active_index(ContinuousSignal(tail=((1, 1.0),)), -1.0)

    @settings(max_examples=100, deadline=None)
    @given(signals, st.floats(0.0, 20.0))
    def test_matches_last_segment_just_after(self, signal, t):
        delta = 1e-7
        index, duration = segments_up_to(signal, t + delta)[-1]
        if duration > 2 * delta:  # no switch inside (t, t + delta]
            assert active_index(signal, t) == index


class TestSegmentsUpTo:
    def test_finite(self):
        approx_pairs(segments_up_to(ContinuousSignal(prefix=((1, 2), (2, 1))), 2.5),
                     [(1, 2.0), (2, 0.5)])

    def test_single_index_tail(self):
        approx_pairs(segments_up_to(ContinuousSignal(tail=((1, 1),)), 3.25),
                     [(1, 1), (1, 1), (1, 1), (1, 0.25)])

    def test_manual_unrolling(self):
        approx_pairs(segments_up_to(ContinuousSignal(tail=((1, 2), (2, 1))), 7),
                     [(1, 2), (2, 1), (1, 2), (2, 1), (1, 1)])

    def test_zero_time(self):
        assert segments_up_to(ContinuousSignal(tail=((1, 1),)), 0.0) == []

    def test_beyond_horizon(self):
        with pytest.raises(OutOfHorizonError):
            segments_up_to(ContinuousSignal(prefix=((1, 1.0),)), 1.5)

    @settings(max_examples=100, deadline=None)
    @given(signals, st.floats(0.01, 15.0))
    def test_durations_sum_to_t(self, signal, t):
        assert math.fsum(d for _, d in segments_up_to(signal, t)) == pytest.approx(t, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(signals, st.floats(0.01, 10.0), st.floats(0.01, 10.0))
    def test_prefix_property(self, signal, s, dt):
        # [0, t] extends [0, s]: only the seam segment may differ
        t = s + dt
        early = segments_up_to(signal, s)
        late = segments_up_to(signal, t)
        assert late[:len(early) - 1] == early[:-1]
        seam_index, seam_len = early[-1]
        assert late[len(early) - 1][0] == seam_index
        assert late[len(early) - 1][1] >= seam_len - 1e-9

    @settings(max_examples=60, deadline=None)
    @given(signals, st.integers(0, 5), st.data())
    def test_periodic_rotation(self, signal, k, data):
        # one period starting at any tail switch past the prefix is a rotation of the tail
        j = data.draw(st.integers(0, len(signal.tail) - 1))
        P = signal.period
        t = signal.prefix_duration + k * P + math.fsum(d for _, d in signal.tail[:j])
        window = [(g.index, g.duration) for g in itertools.takewhile(
            lambda g: g.start < t + P - 1e-9, signal.iter_segments()) if g.start >= t - 1e-9]
        approx_pairs(window, list(signal.tail[j:]) + list(signal.tail[:j]))


class TestDiscreteSignal:
    def test_index_at(self):
        s = DiscreteSignal(prefix=(1, 1, 1), tail=(2,))
        assert [s.index_at(j) for j in range(5)] == [1, 1, 1, 2, 2]

    def test_finite_overrun(self):
        with pytest.raises(OutOfHorizonError):
            DiscreteSignal(prefix=(1, 2)).index_at(2)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            DiscreteSignal(prefix=(), tail=())


class TestValidate:
    def test_clean(self):
        s = SwitchedSystem(([[-1.0]], [[1.0]]), "continuous")
        assert validate(s, ContinuousSignal(tail=((1, 1), (2, 1)))).findings == ()

    def test_unused_warning(self):
        s = SwitchedSystem(([[-1.0]], [[1.0]], [[0.0]]), "continuous")
        report = validate(s, ContinuousSignal(tail=((1, 1), (2, 1))))
        assert report.ok
        assert [f.message for f in report.warnings] == ["subsystem 3 unused asymptotically"]

    def test_zero_duration(self):
        s = SwitchedSystem(([[-1.0]], [[1.0]]), "continuous")
        report = validate(s, ContinuousSignal(prefix=((1, 0.0),)))
        assert not report.ok
        assert "non-positive duration" in report.errors[0].message

    def test_segment_numbering_spans_prefix_and_tail(self):
        s = SwitchedSystem(([[-1.0]], [[1.0]]), "continuous")
        report = validate(s, ContinuousSignal(prefix=((1, 1.0), (2, 1.0)), tail=((1, 0.0), (2, 1.0))))
        assert report.errors[0].message == "non-positive duration at segment 3"

    def test_index_range(self):
        s = SwitchedSystem(([[-1.0]],), "continuous")
        report = validate(s, ContinuousSignal(tail=((2, 1.0),)))
        assert report.errors[0].message == "index 2 out of range 1..1 at segment 1"

    def test_non_finite(self):
        s = SwitchedSystem(([[-1.0]],), "continuous")
        assert not validate(s, ContinuousSignal(prefix=((1, math.inf),))).ok

    def test_finite_signal_warns(self):
        s = SwitchedSystem(([[-1.0]],), "continuous")
        report = validate(s, ContinuousSignal(prefix=((1, 1.0),)))
        assert report.ok and report.warnings

    def test_discrete(self):
        s = SwitchedSystem(([[0.5]], [[2.0]]), "discrete")
        assert validate(s, DiscreteSignal(tail=(1, 2))).findings == ()
        assert not validate(s, DiscreteSignal(tail=(1, 3))).ok

    def test_hybrid_prefixes(self):
        h = HybridSystem(SwitchedSystem(([[-1.0]],), "continuous"),
                         SwitchedSystem(([[1.0]], [[0.5]]), "discrete"))
        report = validate_hybrid(h, HybridSignal(ContinuousSignal(tail=((1, 1.0),)),
                                                 DiscreteSignal(tail=(1,))))
        assert [f.message for f in report.findings] == ["jump: subsystem 2 unused asymptotically"]


class TestHybridSegments:
    def test_unit_flow(self):
        sig = HybridSignal(ContinuousSignal(tail=((1, 1),)), DiscreteSignal(tail=(1,)))
        out = hybrid_segments(sig, 2.5)
        assert [type(x).__name__ for x in out] == ["Flow", "Jump", "Flow", "Jump", "Flow"]
        assert out[-1] == Flow(1, pytest.approx(0.5))
        assert out[1] == Jump(1, 1) and out[3] == Jump(1, 2)

    def test_two_flows_one_jump(self):
        sig = HybridSignal(ContinuousSignal(tail=((1, 0.5), (2, 0.5))), DiscreteSignal(tail=(2,)))
        assert hybrid_segments(sig, 1.0) == [Flow(1, 0.5), Flow(2, 0.5), Jump(2, 1)]

    def test_split_at_integer(self):
        sig = HybridSignal(ContinuousSignal(tail=((1, 0.75), (2, 0.75))), DiscreteSignal(tail=(1, 2)))
        out = hybrid_segments(sig, 1.5)
        assert out == [Flow(1, 0.75), Flow(2, pytest.approx(0.25)), Jump(1, 1),
                       Flow(2, pytest.approx(0.5))]

    def test_short_jump_signal(self):
        sig = HybridSignal(ContinuousSignal(tail=((1, 1),)), DiscreteSignal(prefix=(1,)))
        with pytest.raises(OutOfHorizonError):
            hybrid_segments(sig, 3.0)


class TestRandomSignals:
    def test_seeded_determinism(self):
        assert random_signal(3, 10, seed=5) == random_signal(3, 10, seed=5)
        assert random_signal(3, 10, seed=5) != random_signal(3, 10, seed=6)

    def test_covers_all(self):
        for seed in range(20):
            assert random_signal(4, 4, seed=seed).indices() == {1, 2, 3, 4}
            assert random_discrete_signal(3, 5, seed=seed).indices() == {1, 2, 3}

    def test_duration_bounds(self):
        sig = random_signal(2, 50, seed=1, durations=(0.2, 0.3))
        assert all(0.2 <= d <= 0.3 for _, d in sig.tail)

    def test_probabilities(self):
        sig = random_signal(2, 200, seed=0, probabilities=[1.0, 0.0], cover_all=False)
        assert sig.indices() == {1}


class TestRoundTrip:
    @settings(max_examples=50, deadline=None)
    @given(signals)
    def test_signal_round_trip(self, signal):
        system = SwitchedSystem(([[-1.0]], [[0.5]], [[0.0]]), "continuous")
        doc = load_document(dump_document(document_from(system, signal)))
        assert doc.signal == signal
        assert segments_up_to(doc.signal, 5.0) == segments_up_to(signal, 5.0)
