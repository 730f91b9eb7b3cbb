"""Brute-force ground truth for single collision-resolution periods.

Written as its own recursion over the splitting tree rather than by driving
:mod:`ncta_sim.protocols`, so agreement between the two is evidence.

Deterministic halving gives one exact trace.  Fair-coin splitting gives exact
expectations (as fractions) by enumerating every coin outcome at every node;
a node whose split sends all actives to one side reappears with the same
content, and that self-loop is solved for in closed form.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from .channel import Frame
from .errors import PreconditionError
from .protocols import Algo, PathCoins, SplitPolicy, run_crp

RANDOM_ACTIVE_BUDGET = 12
UNREDUCED_USER_BUDGET = 8


class BudgetExceeded(PreconditionError):
    pass


@dataclass(frozen=True)
class CrpInstance:
    m: int
    active: frozenset[int]
    protocol: Algo
    split: SplitPolicy = SplitPolicy.DETERMINISTIC_HALVES

    def __post_init__(self) -> None:
        object.__setattr__(self, "active", frozenset(self.active))
        if self.m < 1:
            raise PreconditionError(f"m must be >= 1, got {self.m}")
        if not all(0 <= u < self.m for u in self.active):
            raise PreconditionError(f"active users {sorted(self.active)} not all in [0, {self.m})")
        if self.protocol not in (Algo.NCTA, Algo.BTA):
            raise PreconditionError(f"no CRP oracle for {self.protocol.value}")


@dataclass(frozen=True)
class CrpExpectation:
    """Expected CRP length and deliveries; ``trace`` lists delivered users per slot (deterministic split only)."""

    slots: Fraction
    deliveries: Fraction
    trace: tuple[tuple[int, ...], ...] | None = None


def enumerate_crp(inst: CrpInstance) -> CrpExpectation:
    if inst.split is SplitPolicy.DETERMINISTIC_HALVES:
        trace = _det_trace(inst.protocol, inst.m, tuple(sorted(inst.active)))
        return CrpExpectation(Fraction(len(trace)), Fraction(sum(map(len, trace))), trace)
    if len(inst.active) > RANDOM_ACTIVE_BUDGET:
        raise BudgetExceeded(
            f"fair-coin enumeration is limited to {RANDOM_ACTIVE_BUDGET} active users, got {len(inst.active)}")
    active = frozenset(inst.active)
    if inst.protocol is Algo.BTA:
        slots, dels = _bta_node(active)
    elif len(active) <= 1:
        slots, dels = Fraction(1), Fraction(len(active))
    else:
        slots, dels = _ncta_stored(active)
        slots += 1
    return CrpExpectation(slots, dels)


# -- deterministic halving ------------------------------------------------------


def _det_trace(protocol: Algo, m: int, act: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    trace: list[tuple[int, ...]] = []

    def inside(lo: int, hi: int) -> list[int]:
        return [u for u in act if lo <= u < hi]

    def ncta_resolve(lo: int, hi: int) -> None:
        # [lo, hi) holds a stored collision; its first half transmits now
        mid = lo + (hi - lo + 1) // 2
        left, right = inside(lo, mid), inside(mid, hi)
        trace.append(tuple(side[0] for side in (left, right) if len(side) == 1))
        if len(left) >= 2:
            ncta_resolve(lo, mid)
        if len(right) >= 2:
            ncta_resolve(mid, hi)

    def bta_node(lo: int, hi: int) -> None:
        here = inside(lo, hi)
        if len(here) >= 2:
            trace.append(())
            mid = lo + (hi - lo + 1) // 2
            bta_node(lo, mid)
            bta_node(mid, hi)
        else:
            trace.append(tuple(here))

    if protocol is Algo.BTA:
        bta_node(0, m)
    elif len(act) <= 1:
        trace.append(act)
    else:
        trace.append(())
        ncta_resolve(0, m)
    return tuple(trace)


# -- fair-coin splitting, reduced to the active users -----------------------------


def _splits(s: frozenset[int]):
    """Every (A1 actives, A2 actives) pair except the two one-sided ones."""
    users = sorted(s)
    for r in range(1, len(users)):
        for left in combinations(users, r):
            lf = frozenset(left)
            yield lf, s - lf


@lru_cache(maxsize=None)
def _ncta_stored(s: frozenset[int]) -> tuple[Fraction, Fraction]:
    """Slots and deliveries to clear a stored collision whose subset holds actives ``s``."""
    p = Fraction(1, 2 ** len(s))
    slots, dels = Fraction(1), Fraction(0)
    for left, right in _splits(s):
        for side in (left, right):
            if len(side) == 1:
                dels += p
            elif len(side) >= 2:
                sub_slots, sub_dels = _ncta_stored(side)
                slots += p * sub_slots
                dels += p * sub_dels
    # both one-sided outcomes re-store the same collision
    stay = 1 - 2 * p
    return slots / stay, dels / stay


@lru_cache(maxsize=None)
def _bta_node(s: frozenset[int]) -> tuple[Fraction, Fraction]:
    """Slots and deliveries from the transmission of a subset holding actives ``s`` onward."""
    if len(s) <= 1:
        return Fraction(1), Fraction(len(s))
    p = Fraction(1, 2 ** len(s))
    # one-sided outcomes: an idle sibling slot plus the same node again
    slots, dels = 1 + 2 * p, Fraction(0)
    for left, right in _splits(s):
        for side in (left, right):
            sub_slots, sub_dels = _bta_node(side)
            slots += p * sub_slots
            dels += p * sub_dels
    stay = 1 - 2 * p
    return slots / stay, dels / stay


# -- fair-coin splitting over all users, inactive ones included -------------------


def enumerate_crp_unreduced(inst: CrpInstance) -> CrpExpectation:
    """Fair-coin expectation with every user (active or not) flipping at each node.

    Slower twin of the reduced enumeration; exists to confirm inactive users
    never change the answer.
    """
    if inst.split is not SplitPolicy.RANDOM_FAIR_COIN:
        raise PreconditionError("unreduced enumeration is for fair-coin splitting")
    if inst.m > UNREDUCED_USER_BUDGET:
        raise BudgetExceeded(f"unreduced enumeration is limited to {UNREDUCED_USER_BUDGET} users, got {inst.m}")
    users = frozenset(range(inst.m))
    if inst.protocol is Algo.BTA:
        slots, dels = _bta_full(users, inst.active)
    elif len(inst.active) <= 1:
        slots, dels = Fraction(1), Fraction(len(inst.active))
    else:
        slots, dels = _ncta_full(users, inst.active)
        slots += 1
    return CrpExpectation(slots, dels)


def _subsets(u: frozenset[int]):
    items = sorted(u)
    for r in range(len(items) + 1):
        for c in combinations(items, r):
            yield frozenset(c)


@lru_cache(maxsize=None)
def _ncta_full(u: frozenset[int], s: frozenset[int]) -> tuple[Fraction, Fraction]:
    p = Fraction(1, 2 ** len(u))
    slots, dels, stay = Fraction(1), Fraction(0), Fraction(1)
    for a1 in _subsets(u):
        a2 = u - a1
        if not a1 or not a2:
            stay -= p
            continue
        for sub_u, sub_s in ((a1, s & a1), (a2, s & a2)):
            if len(sub_s) == 1:
                dels += p
            elif len(sub_s) >= 2:
                x, y = _ncta_full(sub_u, sub_s)
                slots += p * x
                dels += p * y
    return slots / stay, dels / stay


@lru_cache(maxsize=None)
def _bta_full(u: frozenset[int], s: frozenset[int]) -> tuple[Fraction, Fraction]:
    if len(s) <= 1:
        return Fraction(1), Fraction(len(s))
    p = Fraction(1, 2 ** len(u))
    slots, dels, stay = Fraction(1), Fraction(0), Fraction(1)
    for a1 in _subsets(u):
        a2 = u - a1
        if not a1 or not a2:
            stay -= p
            slots += p  # the empty sibling still gets its slot
            continue
        for sub_u in (a1, a2):
            x, y = _bta_full(sub_u, s & sub_u)
            slots += p * x
            dels += p * y
    return slots / stay, dels / stay


# -- cross-check against the protocol implementation ----------------------------


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    oracle_slots: float
    sim_slots: float
    first_divergent_slot: int | None = None
    message: str = ""

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}: oracle slots={self.oracle_slots:g} sim slots={self.sim_slots:g} {self.message}".rstrip()


def verify_against_sim(inst: CrpInstance, trials: int = 10_000, seed: int = 0) -> VerifyReport:
    """Compare the protocol resolvers against the oracle.

    Deterministic split: the simulated CRP must match slot for slot.  Fair
    coin: the mean length over ``trials`` CRPs must land within four standard
    errors of the exact expectation, and every CRP must deliver every frame.
    """
    expect = enumerate_crp(inst)
    frames = {u: Frame(u, 0, 0) for u in sorted(inst.active)}
    k = len(frames)
    if inst.split is SplitPolicy.DETERMINISTIC_HALVES:
        trace = run_crp(inst.protocol, range(inst.m), frames, inst.split)
        sim = tuple(tuple(sorted(f.user_id for f in out.deliveries)) for out in trace)
        want = tuple(tuple(sorted(x)) for x in expect.trace)
        for i, (a, b) in enumerate(zip(sim, want)):
            if a != b:
                return VerifyReport(False, float(expect.slots), len(sim), i,
                                    f"slot {i}: simulator delivered {list(a)}, oracle expects {list(b)}")
        if len(sim) != len(want):
            i = min(len(sim), len(want))
            return VerifyReport(False, float(expect.slots), len(sim), i,
                                f"slot {i}: simulator CRP has {len(sim)} slots, oracle expects {len(want)}")
        return VerifyReport(True, float(expect.slots), len(sim))

    rng = random.Random(seed)
    lengths = []
    for n in range(trials):
        trace = run_crp(inst.protocol, range(inst.m), frames, inst.split, coins=PathCoins(rng.getrandbits(64)))
        delivered = sum(len(out.deliveries) for out in trace)
        if delivered != k:
            return VerifyReport(False, float(expect.slots), len(trace), None,
                                f"trial {n} delivered {delivered} of {k} frames")
        lengths.append(len(trace))
    mean = math.fsum(lengths) / trials
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in lengths) / (trials - 1)) if trials > 1 else 0.0
    se = sd / math.sqrt(trials)
    gap = abs(mean - float(expect.slots))
    ok = gap <= 4 * se if se > 0 else gap == 0
    return VerifyReport(ok, float(expect.slots), mean, None, f"|gap|={gap:.4g} se={se:.4g} trials={trials}")
