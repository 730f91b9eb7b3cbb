"""Poisson arrivals into one-frame user buffers, gated at the start of each CRP."""

from __future__ import annotations

import bisect
import enum
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import Frame
from .errors import PreconditionError


class SystemType(enum.Enum):
    TYPE_I = 1
    TYPE_II = 2


@dataclass(frozen=True)
class ArrivalConfig:
    lambda_total: float
    m: int

    def __post_init__(self) -> None:
        if not self.lambda_total >= 0:
            raise PreconditionError(f"lambda_total must be >= 0, got {self.lambda_total}")
        if self.m < 1:
            raise PreconditionError(f"m must be >= 1, got {self.m}")

    @property
    def per_user_rate(self) -> float:
        return self.lambda_total / self.m


@dataclass(frozen=True)
class ArrivalTrace:
    """Per-slot, per-user arrival counts for one replication.

    Rows are drawn in slot order from a single stream, so row ``t`` depends
    only on the stream seed and ``t``: extending the horizon never changes
    earlier rows.
    """

    counts: np.ndarray  # (horizon, m) int

    @property
    def horizon(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def at(self, slot: int) -> np.ndarray:
        return self.counts[slot]

    def events(self, user: int) -> tuple[list[int], list[int]]:
        """Slots with at least one arrival for ``user`` and the count in each."""
        col = self.counts[:, user]
        slots = np.flatnonzero(col)
        return slots.tolist(), col[slots].tolist()


def draw_arrivals(cfg: ArrivalConfig, rng: np.random.Generator, horizon: int) -> ArrivalTrace:
    """Independent Poisson(lambda/m) counts for every user in every slot."""
    if cfg.lambda_total == 0:
        return ArrivalTrace(np.zeros((horizon, cfg.m), dtype=np.int64))
    counts = rng.poisson(cfg.per_user_rate, size=(horizon, cfg.m))
    return ArrivalTrace(counts)


_NEVER = sys.maxsize


class UserBuffer:
    """Single-frame buffer of one user, fed lazily from its arrival record.

    Arrivals stamped with slot ``t`` happen at the start of ``t``, before any
    transmission in ``t``.  ``advance(t)`` replays every arrival up to and
    including slot ``t`` through :func:`admit`.
    """

    __slots__ = ("user_id", "held", "drops", "admitted", "due", "_slots", "_counts", "_next")

    def __init__(self, user_id: int, slots: Sequence[int] = (), counts: Sequence[int] = ()):
        self.user_id = user_id
        self.held: Frame | None = None
        self.drops = 0
        self.admitted = 0
        self._slots = list(slots)
        self._counts = list(counts)
        self._next = 0
        # slot of the next arrival not yet replayed
        self.due = self._slots[0] if self._slots else _NEVER

    def __repr__(self) -> str:
        return f"UserBuffer(user_id={self.user_id}, held={self.held}, drops={self.drops})"

    @property
    def active(self) -> bool:
        return self.held is not None

    def advance(self, slot: int) -> None:
        if self.due > slot:
            return
        slots, counts = self._slots, self._counts
        i, n = self._next, len(slots)
        while i < n and slots[i] <= slot:
            s, c = slots[i], counts[i]
            if self.held is None:
                admit(self, Frame(self.user_id, self.admitted, s))
                c -= 1
            self.drops += c
            i += 1
        self._next = i
        self.due = slots[i] if i < n else _NEVER

    def release(self, slot: int) -> Frame:
        """Hand over the buffered frame for delivery in ``slot``."""
        self.advance(slot)
        frame = self.held
        if frame is None:
            raise PreconditionError(f"user {self.user_id} has nothing to deliver in slot {slot}")
        self.held = None
        return frame


def admit(buffer: UserBuffer, frame: Frame) -> bool:
    """Offer ``frame`` to a one-frame buffer.  Returns False (and counts a drop) when full."""
    if buffer.held is not None:
        buffer.drops += 1
        return False
    buffer.held = frame
    buffer.admitted += 1
    return True


def gate_participants(sys: SystemType, buffers: Sequence[UserBuffer], gate_slot: int) -> list[int]:
    """Users taking part in the CRP that starts at ``gate_slot``.

    Type II admits every occupied buffer.  Type I keeps only frames that
    arrived in the window right before the gate (stamped ``gate_slot``) and
    flushes older ones as drops.
    """
    out = []
    for b in buffers:
        if b.due <= gate_slot:
            b.advance(gate_slot)
        if b.held is None:
            continue
        if sys is SystemType.TYPE_I and b.held.arrival_slot != gate_slot:
            b.held = None
            b.drops += 1
            continue
        out.append(b.user_id)
    return out


@dataclass
class Population:
    """All user buffers of one replication plus the trace that feeds them."""

    trace: ArrivalTrace
    buffers: list[UserBuffer] = field(init=False)
    _any_arrival: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.buffers = [UserBuffer(u, *self.trace.events(u)) for u in range(self.trace.counts.shape[1])]
        self._any_arrival = np.flatnonzero(self.trace.counts.any(axis=1)).tolist()

    def advance_all(self, slot: int) -> None:
        for b in self.buffers:
            b.advance(slot)

    def next_busy_slot(self, after: int) -> int | None:
        """First slot after ``after`` in which any user receives a frame."""
        i = bisect.bisect_right(self._any_arrival, after)
        return self._any_arrival[i] if i < len(self._any_arrival) else None

    @property
    def dropped(self) -> int:
        return sum(b.drops for b in self.buffers)

    @property
    def buffered(self) -> int:
        return sum(b.held is not None for b in self.buffers)
