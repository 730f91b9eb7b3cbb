"""Slot-level state machines for NCTA, BTA, modified ALOHA and TDM.

Tree protocols resolve one collision-resolution period (CRP) at a time.  A
CRP opens with a gate slot in which every participant transmits; if that slot
collides, the resolver is stepped once per slot until every participant frame
has been delivered.  Participants are frozen at the gate.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .channel import EMPTY_SIGNAL, Feedback, Frame, Signal, cancel, classify, extract_frame
from .errors import ModelViolation, PreconditionError
from .traffic import UserBuffer

Subset = tuple[int, ...]


class Algo(enum.Enum):
    ALOHA = "aloha"
    BTA = "bta"
    NCTA = "ncta"
    TDM = "tdm"


class SplitPolicy(enum.Enum):
    DETERMINISTIC_HALVES = "det"
    RANDOM_FAIR_COIN = "rand"


class PathCoins:
    """Coin streams keyed by tree position.

    Two resolvers sharing a ``PathCoins`` split the same node the same way,
    however differently they walk the tree.  That is what makes NCTA and BTA
    comparable CRP by CRP under random splitting.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def at(self, path: str) -> random.Random:
        return random.Random(f"{self.seed}/{path}")


def split(subset: Sequence[int], policy: SplitPolicy, rng: random.Random | None = None) -> tuple[Subset, Subset]:
    if not subset:
        raise PreconditionError("cannot split an empty subset")
    users = sorted(subset)
    if policy is SplitPolicy.DETERMINISTIC_HALVES:
        h = (len(users) + 1) // 2
        return tuple(users[:h]), tuple(users[h:])
    if rng is None:
        raise PreconditionError("random splitting needs a coin source")
    left, right = [], []
    for u in users:
        (left if rng.random() < 0.5 else right).append(u)
    return tuple(left), tuple(right)


@dataclass
class SlotOutcome:
    transmitted: Signal
    feedback: Feedback
    deliveries: list[Frame] = field(default_factory=list)
    pushes: list[tuple[Subset, Signal | None]] = field(default_factory=list)


def _signal_of(frames: Mapping[int, Frame], users: Sequence[int]) -> Signal:
    return Signal(frozenset(frames[u] for u in users if u in frames))


def _gate(frames: Mapping[int, Frame]) -> SlotOutcome:
    y = Signal(frozenset(frames.values()))
    out = SlotOutcome(y, classify(y))
    if out.feedback is Feedback.SINGLE:
        out.deliveries.append(extract_frame(y))
    return out


# -- NCTA ---------------------------------------------------------------------


@dataclass
class NctaResolver:
    """Paired stacks of user subsets (``s1``) and their stored collision signals (``s2``)."""

    frames: dict[int, Frame]
    policy: SplitPolicy
    s1: list[Subset] = field(default_factory=list)
    s2: list[Signal] = field(default_factory=list)
    paths: list[str] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return not self.s1

    def push(self, subset: Subset, signal: Signal, path: str) -> None:
        self.s1.append(subset)
        self.s2.append(signal)
        self.paths.append(path)


def ncta_open(users: Sequence[int], frames: Mapping[int, Frame],
              policy: SplitPolicy) -> tuple[SlotOutcome, NctaResolver | None]:
    """Gate slot: every participant transmits once.

    ``users`` is the full user set the tree splits (inactive users included);
    ``frames`` maps each participant to its buffered frame.
    """
    out = _gate(frames)
    if out.feedback is not Feedback.COLLISION:
        return out, None
    r = NctaResolver(dict(frames), policy)
    root = tuple(sorted(users))
    r.push(root, out.transmitted, "")
    out.pushes.append((root, out.transmitted))
    return out, r


def ncta_step(r: NctaResolver, coins: PathCoins | None = None) -> SlotOutcome:
    if r.done:
        raise PreconditionError("NCTA resolver has nothing left to resolve")
    subset, stored, path = r.s1.pop(), r.s2.pop(), r.paths.pop()
    a1, a2 = split(subset, r.policy, coins.at(path) if coins is not None else None)
    y1 = _signal_of(r.frames, a1)
    try:
        residual = cancel(stored, y1)
    except PreconditionError as exc:
        raise ModelViolation(f"stored signal for {subset} does not contain A1's transmission") from exc
    f1, f2 = classify(y1), classify(residual)
    out = SlotOutcome(y1, f1)

    if f1 is not Feedback.COLLISION and f2 is Feedback.COLLISION:
        r.push(a2, residual, path + "1")
        out.pushes.append((a2, residual))
    elif f1 is Feedback.COLLISION and f2 is not Feedback.COLLISION:
        r.push(a1, y1, path + "0")
        out.pushes.append((a1, y1))
    elif f1 is Feedback.COLLISION and f2 is Feedback.COLLISION:
        r.push(a2, residual, path + "1")
        r.push(a1, y1, path + "0")
        out.pushes += [(a2, residual), (a1, y1)]

    for sig, fb in ((y1, f1), (residual, f2)):
        if fb is Feedback.SINGLE:
            frame = extract_frame(sig)
            out.deliveries.append(frame)
            del r.frames[frame.user_id]
    return out


# -- BTA ----------------------------------------------------------------------


@dataclass
class BtaResolver:
    frames: dict[int, Frame]
    policy: SplitPolicy
    pending: list[tuple[Subset, str]] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return not self.pending

    def push_children(self, subset: Subset, path: str, coins: PathCoins | None) -> list[tuple[Subset, None]]:
        a1, a2 = split(subset, self.policy, coins.at(path) if coins is not None else None)
        self.pending.append((a2, path + "1"))
        self.pending.append((a1, path + "0"))
        return [(a2, None), (a1, None)]


def bta_open(users: Sequence[int], frames: Mapping[int, Frame], policy: SplitPolicy,
             coins: PathCoins | None = None) -> tuple[SlotOutcome, BtaResolver | None]:
    out = _gate(frames)
    if out.feedback is not Feedback.COLLISION:
        return out, None
    r = BtaResolver(dict(frames), policy)
    out.pushes = r.push_children(tuple(sorted(users)), "", coins)
    return out, r


def bta_step(r: BtaResolver, coins: PathCoins | None = None) -> SlotOutcome:
    """Pop a subset and let its active members transmit; collided signals are discarded."""
    if r.done:
        raise PreconditionError("BTA resolver has nothing left to resolve")
    subset, path = r.pending.pop()
    y = _signal_of(r.frames, subset)
    out = SlotOutcome(y, classify(y))
    if out.feedback is Feedback.SINGLE:
        frame = extract_frame(y)
        out.deliveries.append(frame)
        del r.frames[frame.user_id]
    elif out.feedback is Feedback.COLLISION:
        out.pushes = r.push_children(subset, path, coins)
    return out


# -- modified ALOHA -----------------------------------------------------------


class AlohaMode(enum.Enum):
    UNBLOCKED = "unblocked"
    BLOCKED = "blocked"


def aloha_probability(n: int) -> float:
    """Per-user transmit probability in blocked state; maximises n*p*(1-p)**n."""
    if n < 1:
        raise PreconditionError(f"need at least one frame holder, got {n}")
    return 1.0 / (n + 1)


@dataclass
class AlohaState:
    frames: dict[int, Frame]
    mode: AlohaMode = AlohaMode.UNBLOCKED

    @property
    def n(self) -> int:
        return len(self.frames)

    @property
    def done(self) -> bool:
        return self.mode is AlohaMode.UNBLOCKED


def aloha_open(frames: Mapping[int, Frame]) -> tuple[SlotOutcome, AlohaState | None]:
    """Unblocked slot: every participant transmits; a collision blocks the system."""
    out = _gate(frames)
    if out.feedback is not Feedback.COLLISION:
        return out, None
    return out, AlohaState(dict(frames), AlohaMode.BLOCKED)


def aloha_step(st: AlohaState, rng: random.Random) -> SlotOutcome:
    """Blocked slot: each remaining holder transmits with p = 1/(n+1).

    The system unblocks once every frame of the blocking collision is through.
    """
    if st.done:
        raise PreconditionError("ALOHA is not blocked")
    p = aloha_probability(st.n)
    sent = [st.frames[u] for u in sorted(st.frames) if rng.random() < p]
    y = Signal(frozenset(sent))
    out = SlotOutcome(y, classify(y))
    if out.feedback is Feedback.SINGLE:
        frame = extract_frame(y)
        out.deliveries.append(frame)
        del st.frames[frame.user_id]
        if not st.frames:
            st.mode = AlohaMode.UNBLOCKED
    return out


def aloha_success_probability(n: int) -> float:
    """Chance that exactly one of ``n`` blocked holders transmits in a slot."""
    p = aloha_probability(n)
    return n * p * (1.0 - p) ** (n - 1)


def sample_aloha_crp(participants: Sequence[int], rng: random.Random) -> tuple[list[tuple[int, int]], int]:
    """Draw a whole ALOHA CRP in one go: ``([(slot offset, delivered user), ...], length)``.

    Same law as stepping :func:`aloha_step` slot by slot.  With ``n`` holders
    left, the wait for the next success is geometric with parameter
    :func:`aloha_success_probability` and the winner is uniform among them.
    """
    left = sorted(participants)
    if len(left) <= 1:
        return [(0, u) for u in left], 1
    hits = []
    t = 1
    while left:
        ps = aloha_success_probability(len(left))
        t += int(math.log(1.0 - rng.random()) / math.log(1.0 - ps))
        hits.append((t, left.pop(int(rng.random() * len(left)))))
        t += 1
    return hits, t


# -- TDM ----------------------------------------------------------------------


def tdm_owner(slot: int, m: int) -> int:
    return slot % m


def tdm_step(slot: int, buffers: Sequence[UserBuffer], m: int) -> SlotOutcome:
    owner = buffers[tdm_owner(slot, m)]
    owner.advance(slot)
    if owner.held is None:
        return SlotOutcome(EMPTY_SIGNAL, Feedback.EMPTY)
    frame = owner.release(slot)
    return SlotOutcome(Signal(frozenset((frame,))), Feedback.SINGLE, [frame])


# -- one whole CRP ------------------------------------------------------------


def run_crp(algo: Algo, users: Sequence[int], frames: Mapping[int, Frame],
            policy: SplitPolicy = SplitPolicy.DETERMINISTIC_HALVES,
            rng: random.Random | None = None, coins: PathCoins | None = None) -> list[SlotOutcome]:
    """Resolve one CRP from its gate slot to completion, one outcome per slot.

    ``coins`` pins the random splits (pass the same one to pair NCTA with
    BTA); if omitted and the policy is random, one is drawn from ``rng``.
    """
    if policy is SplitPolicy.RANDOM_FAIR_COIN and coins is None and algo in (Algo.NCTA, Algo.BTA):
        if rng is None:
            raise PreconditionError("random splitting needs an rng or coins")
        coins = PathCoins(rng.getrandbits(64))
    if algo is Algo.NCTA:
        first, r = ncta_open(users, frames, policy)
        trace = [first]
        while r is not None and not r.done:
            trace.append(ncta_step(r, coins))
    elif algo is Algo.BTA:
        first, r = bta_open(users, frames, policy, coins)
        trace = [first]
        while r is not None and not r.done:
            trace.append(bta_step(r, coins))
    elif algo is Algo.ALOHA:
        if rng is None:
            raise PreconditionError("ALOHA needs an rng")
        first, st = aloha_open(frames)
        trace = [first]
        while st is not None and not st.done:
            trace.append(aloha_step(st, rng))
    else:
        raise PreconditionError(f"{algo.value} has no collision-resolution period")
    return trace
