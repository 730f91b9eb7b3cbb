import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncta_sim.channel import Frame
from ncta_sim.errors import PreconditionError
from ncta_sim.traffic import (ArrivalConfig, ArrivalTrace, Population, SystemType, UserBuffer, admit,
                              draw_arrivals, gate_participants)


def test_arrival_config_validation():
    with pytest.raises(PreconditionError):
        ArrivalConfig(-0.1, 8)
    with pytest.raises(PreconditionError):
        ArrivalConfig(1.0, 0)
    assert ArrivalConfig(2.0, 8).per_user_rate == 0.25


def test_zero_rate_means_no_arrivals():
    trace = draw_arrivals(ArrivalConfig(0.0, 4), np.random.default_rng(0), 100)
    assert trace.total == 0 and trace.horizon == 100


def test_arrivals_reproducible_and_poisson_mean():
    cfg = ArrivalConfig(1.6, 8)
    a = draw_arrivals(cfg, np.random.default_rng(5), 20000)
    b = draw_arrivals(cfg, np.random.default_rng(5), 20000)
    assert np.array_equal(a.counts, b.counts)
    rate = a.total / a.horizon
    assert abs(rate - 1.6) < 4 * np.sqrt(1.6 / 20000)


def test_admit_single_frame_buffer():
    b = UserBuffer(3)
    assert admit(b, Frame(3, 0, 1))
    assert not admit(b, Frame(3, 1, 2))
    assert b.held == Frame(3, 0, 1) and b.drops == 1


def test_release_empties_buffer():
    b = UserBuffer(0, [2], [1])
    b.advance(1)
    assert b.held is None
    assert b.release(2) == Frame(0, 0, 2)
    with pytest.raises(PreconditionError):
        b.release(3)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(1, 3)), max_size=15, unique_by=lambda x: x[0]),
       st.lists(st.integers(0, 45), max_size=8))
def test_advance_equals_repeated_admit(events, release_slots):
    events.sort()
    slots, counts = [s for s, _ in events], [c for _, c in events]
    lazy = UserBuffer(0, slots, counts)
    eager = UserBuffer(0)
    by_slot = dict(events)
    releases = set(release_slots)
    for t in range(46):
        lazy.advance(t)
        for _ in range(by_slot.get(t, 0)):
            admit(eager, Frame(0, eager.admitted, t))
        assert lazy.held == eager.held and lazy.drops == eager.drops
        if t in releases and eager.held is not None:
            assert lazy.release(t) == eager.held
            eager.held = None


def _pop(rows):
    return Population(ArrivalTrace(np.array(rows, dtype=np.int64)))


def test_gate_type2_takes_every_holder():
    pop = _pop([[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1]])
    assert gate_participants(SystemType.TYPE_II, pop.buffers, 2) == [0, 3]


def test_gate_type1_keeps_gate_stamped_frames_only():
    # user 3 arrived at the gate slot, user 4 holds an older frame
    rows = np.zeros((6, 5), dtype=np.int64)
    rows[5, 3] = 1
    rows[2, 4] = 1
    pop = Population(ArrivalTrace(rows))
    assert gate_participants(SystemType.TYPE_I, pop.buffers, 5) == [3]
    assert pop.buffers[4].held is None and pop.dropped == 1


def test_population_counts_and_next_busy():
    pop = _pop([[2, 0], [0, 0], [0, 1], [0, 0]])
    assert pop.next_busy_slot(0) == 2
    assert pop.next_busy_slot(2) is None
    pop.advance_all(3)
    assert pop.buffered == 2 and pop.dropped == 1
