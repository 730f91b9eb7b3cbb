"""Symbolic channel with ternary feedback and exact signal cancellation.

A :class:`Signal` carries frame identities rather than waveforms.  Everything
the access point can observe (the feedback symbol, plus the decoded frame on
success) is a function of the set of frames in a slot, so the set
is the whole model.  Background noise is implicit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ModelViolation, PreconditionError


@dataclass(frozen=True, slots=True, order=True)
class Frame:
    """One buffered payload.  ``(user_id, seq)`` identifies it within a run."""

    user_id: int
    seq: int
    arrival_slot: int

    def __post_init__(self) -> None:
        if self.arrival_slot < 0:
            raise PreconditionError(f"arrival_slot must be >= 0, got {self.arrival_slot}")


class Feedback(enum.Enum):
    EMPTY = "0"
    SINGLE = "1"
    COLLISION = "e"


@dataclass(frozen=True, slots=True)
class Signal:
    """Superposition of the frames transmitted in one slot."""

    frames: frozenset[Frame] = frozenset()

    @classmethod
    def of(cls, *frames: Frame) -> Signal:
        fs = frozenset(frames)
        if len(fs) != len(frames):
            raise ModelViolation("a frame cannot be on the channel twice in one slot")
        return cls(fs)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def __contains__(self, frame: object) -> bool:
        return frame in self.frames

    @property
    def users(self) -> frozenset[int]:
        return frozenset(f.user_id for f in self.frames)


EMPTY_SIGNAL = Signal()


def superpose(parts: Iterable[Signal]) -> Signal:
    """Sum of signals sent in the same slot.

    Raises :class:`ModelViolation` if two parts share a frame, since a user
    sends its single buffered frame at most once per slot.
    """
    acc: set[Frame] = set()
    total = 0
    for part in parts:
        acc.update(part.frames)
        total += len(part.frames)
    if len(acc) != total:
        raise ModelViolation("overlapping signals: a frame was transmitted twice in one slot")
    return Signal(frozenset(acc))


def classify(x: Signal) -> Feedback:
    n = len(x.frames)
    if n == 0:
        return Feedback.EMPTY
    if n == 1:
        return Feedback.SINGLE
    return Feedback.COLLISION


def cancel(whole: Signal, part: Signal) -> Signal:
    """Remove a decoded component from a stored superposition.

    Cancellation is ideal (noise-free).  ``part`` must be contained in
    ``whole``; anything else means the caller paired a transmission with the
    wrong stored signal.
    """
    if not part.frames <= whole.frames:
        extra = sorted(part.frames - whole.frames)
        raise PreconditionError(f"cannot cancel frames not present in the stored signal: {extra}")
    return Signal(whole.frames - part.frames)


def extract_frame(x: Signal) -> Frame:
    """Decode the lone frame of a SINGLE signal."""
    if len(x.frames) != 1:
        raise PreconditionError(f"decoding needs exactly one frame, signal holds {len(x.frames)}")
    (frame,) = x.frames
    return frame
