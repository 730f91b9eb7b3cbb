import pytest
from hypothesis import given, strategies as st

from ncta_sim.channel import (EMPTY_SIGNAL, Feedback, Frame, Signal, cancel, classify, extract_frame, superpose)
from ncta_sim.errors import ModelViolation, PreconditionError


def f(u, seq=0, slot=0):
    return Frame(u, seq, slot)


def test_frame_rejects_negative_arrival():
    with pytest.raises(ValueError):
        Frame(0, 0, -1)


@pytest.mark.parametrize("n,expected", [(0, Feedback.EMPTY), (1, Feedback.SINGLE), (2, Feedback.COLLISION),
                                        (7, Feedback.COLLISION)])
def test_classify_by_cardinality(n, expected):
    assert classify(Signal.of(*(f(u) for u in range(n)))) is expected


def test_feedback_symbols():
    assert [fb.value for fb in Feedback] == ["0", "1", "e"]


def test_superpose_unions_and_rejects_overlap():
    a, b = Signal.of(f(1)), Signal.of(f(2), f(3))
    assert superpose([a, b]).users == {1, 2, 3}
    assert superpose([]) == EMPTY_SIGNAL
    with pytest.raises(ModelViolation):
        superpose([a, Signal.of(f(1))])


def test_signal_of_rejects_duplicates():
    with pytest.raises(ModelViolation):
        Signal.of(f(1), f(1))


def test_cancel_exposes_residual():
    whole = Signal.of(f(1), f(2))
    rest = cancel(whole, Signal.of(f(1)))
    assert classify(rest) is Feedback.SINGLE
    assert extract_frame(rest) == f(2)
    assert cancel(whole, EMPTY_SIGNAL) == whole


def test_cancel_requires_containment():
    with pytest.raises(PreconditionError):
        cancel(Signal.of(f(1)), Signal.of(f(2)))


def test_extract_needs_single():
    for sig in (EMPTY_SIGNAL, Signal.of(f(1), f(2))):
        with pytest.raises(PreconditionError):
            extract_frame(sig)


@given(st.sets(st.integers(0, 31), max_size=12), st.data())
def test_cancel_inverts_superpose(users, data):
    part = data.draw(st.sets(st.sampled_from(sorted(users)) if users else st.nothing()))
    whole = Signal.of(*(f(u) for u in users))
    y1 = Signal.of(*(f(u) for u in part))
    rest = cancel(whole, y1)
    assert superpose([y1, rest]) == whole
    assert rest.users == users - part
