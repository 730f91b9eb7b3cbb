"""Replication driver plus the sweep machinery built on top of it."""

from __future__ import annotations

import math
import random
import statistics
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .channel import Frame
from .errors import ModelViolation, PreconditionError
from . import kernel
from .protocols import (Algo, PathCoins, SplitPolicy, aloha_success_probability, run_crp, sample_aloha_crp,
                        tdm_step)
from .traffic import ArrivalConfig, ArrivalTrace, Population, SystemType, draw_arrivals, gate_participants

_Z95 = statistics.NormalDist().inv_cdf(0.975)

_TRAFFIC_STREAM = 0
_PROTOCOL_STREAM = {Algo.TDM: 1, Algo.ALOHA: 2, Algo.BTA: 3, Algo.NCTA: 4}


@dataclass(frozen=True)
class SimConfig:
    algo: Algo = Algo.NCTA
    system_type: SystemType = SystemType.TYPE_II
    m: int = 8
    lambda_total: float = 1.0
    horizon: int = 5000
    reps: int = 200
    seed: int = 1
    split: SplitPolicy = SplitPolicy.DETERMINISTIC_HALVES
    warmup_frac: float = 0.1

    def __post_init__(self) -> None:
        errors = []
        if self.horizon < 1:
            errors.append(f"horizon must be >= 1, got {self.horizon}")
        if self.reps < 1:
            errors.append(f"reps must be >= 1, got {self.reps}")
        if not self.lambda_total >= 0 or math.isinf(self.lambda_total):
            errors.append(f"lambda must be finite and >= 0, got {self.lambda_total}")
        if self.m < 1:
            errors.append(f"m must be >= 1, got {self.m}")
        if self.seed < 0:
            errors.append(f"seed must be >= 0, got {self.seed}")
        if not 0 <= self.warmup_frac < 1:
            errors.append(f"warmup_frac must be in [0, 1), got {self.warmup_frac}")
        if errors:
            raise PreconditionError("; ".join(errors))

    @property
    def warmup(self) -> int:
        return int(self.horizon * self.warmup_frac)

    def sort_key(self) -> tuple:
        return (self.algo.value, self.system_type.value, self.m, self.lambda_total)


class CrpRecord(NamedTuple):
    start: int
    length: int
    participants: int
    deliveries: int


@dataclass
class RunStats:
    """Counters of one replication.

    ``slots``, ``delivered`` and ``delay_sum`` cover the measurement window
    after warm-up; ``arrivals``, ``delivered_total``, ``dropped`` and
    ``buffered`` cover the whole horizon and balance exactly.
    """

    slots: int = 0
    arrivals: int = 0
    delivered: int = 0
    dropped: int = 0
    delay_sum: int = 0
    delivered_total: int = 0
    buffered: int = 0
    crp_records: list[CrpRecord] = field(default_factory=list)

    def check_conservation(self) -> None:
        if self.arrivals != self.delivered_total + self.dropped + self.buffered:
            raise ModelViolation(
                f"frame conservation broken: arrivals={self.arrivals} delivered={self.delivered_total} "
                f"dropped={self.dropped} buffered={self.buffered}")


def throughput(stats: RunStats) -> float:
    if stats.slots <= 0:
        raise PreconditionError("throughput is undefined over zero slots")
    return stats.delivered / stats.slots


def mean_delay(stats: RunStats) -> float:
    """Average delivery delay in slots; NaN when nothing was delivered."""
    if stats.delivered == 0:
        return math.nan
    return stats.delay_sum / stats.delivered


# -- seeding ------------------------------------------------------------------


def _lambda_words(lam: float) -> tuple[int, int]:
    bits = struct.unpack("<Q", struct.pack("<d", float(lam)))[0]
    return bits >> 32, bits & 0xFFFFFFFF


def traffic_seed(cfg: SimConfig, rep: int) -> np.random.SeedSequence:
    """Arrival stream: shared by every algorithm and system type at a grid point."""
    return np.random.SeedSequence([cfg.seed, _TRAFFIC_STREAM, *_lambda_words(cfg.lambda_total), cfg.m, rep])


def protocol_seed(cfg: SimConfig, rep: int) -> int:
    ss = np.random.SeedSequence([cfg.seed, _PROTOCOL_STREAM[cfg.algo], *_lambda_words(cfg.lambda_total),
                                 cfg.m, rep, cfg.system_type.value])
    return int(ss.generate_state(2, np.uint64)[0])


# -- CRP schedules --------------------------------------------------------------

# (slot offset, delivered users) per slot that delivers something, and the CRP length
Schedule = tuple[tuple[tuple[int, tuple[int, ...]], ...], int]


def _schedule_of(trace) -> Schedule:
    hits = tuple((i, tuple(f.user_id for f in out.deliveries)) for i, out in enumerate(trace) if out.deliveries)
    return hits, len(trace)


@lru_cache(maxsize=1 << 16)
def _det_schedule(algo: Algo, m: int, participants: tuple[int, ...]) -> Schedule:
    frames = {u: Frame(u, 0, 0) for u in participants}
    return _schedule_of(run_crp(algo, range(m), frames, SplitPolicy.DETERMINISTIC_HALVES))


def _audit_crp(algo: Algo, participants: Sequence[int], schedule: Schedule, shadow: Schedule | None) -> None:
    hits, length = schedule
    delivered = [u for _, us in hits for u in us]
    if sorted(delivered) != sorted(participants):
        raise ModelViolation(f"{algo.value} CRP delivered {sorted(delivered)} for participants {sorted(participants)}")
    if shadow is not None and length > shadow[1]:
        raise ModelViolation(f"NCTA CRP took {length} slots, paired BTA took {shadow[1]}")


# -- replication ----------------------------------------------------------------


class _Tape:
    """Replays a pre-drawn array of uniforms through a ``random()`` method."""

    def __init__(self, values: np.ndarray):
        self._it = iter(values.tolist())

    def random(self) -> float:
        return next(self._it)


def _aloha_tape(cfg: SimConfig, rep: int, arrivals: int) -> np.ndarray:
    # two uniforms per delivery, and deliveries never exceed arrivals
    return np.random.default_rng(protocol_seed(cfg, rep)).random(2 * arrivals + 2)


def simulate(cfg: SimConfig, rep_index: int, audit: bool = True, engine: str = "auto",
             stepwise: bool = False, keep_crps: bool = True) -> RunStats:
    """Run one replication of ``cfg.horizon`` slots.

    ``engine`` picks the compiled loop (``"fast"``, deterministic splits
    only) or the resolver-driven loop (``"reference"``); ``"auto"`` takes the
    fast one whenever it applies.  Both produce identical counters.

    Blocked ALOHA periods are drawn whole by :func:`sample_aloha_crp`;
    ``stepwise=True`` (reference engine only) flips per-slot coins through
    :func:`aloha_step` instead, which follows the same law on a different
    random stream.

    With ``audit`` on, every CRP must deliver exactly its participants, every
    NCTA CRP must be no longer than BTA on the same participants and splits,
    and frames must balance at the end.  Breaches raise :class:`ModelViolation`.
    ``keep_crps=False`` leaves ``crp_records`` empty (audits still run).
    """
    fast_ok = cfg.split is SplitPolicy.DETERMINISTIC_HALVES or cfg.algo in (Algo.TDM, Algo.ALOHA)
    if engine == "auto":
        engine = "fast" if fast_ok and not stepwise else "reference"
    if engine == "fast" and (not fast_ok or stepwise):
        raise PreconditionError("the fast engine covers deterministic splits and whole-CRP ALOHA sampling only")
    if engine not in ("fast", "reference"):
        raise PreconditionError(f"unknown engine {engine!r}")

    arr = draw_arrivals(ArrivalConfig(cfg.lambda_total, cfg.m), np.random.default_rng(traffic_seed(cfg, rep_index)),
                        cfg.horizon)
    if engine == "fast":
        stats = _simulate_fast(cfg, rep_index, arr, audit, keep_crps)
    else:
        stats = _simulate_reference(cfg, rep_index, arr, audit, stepwise)
        if not keep_crps:
            stats.crp_records.clear()
    if audit:
        stats.check_conservation()
    return stats


_KERNEL_ALGO = {Algo.TDM: kernel.ALGO_TDM, Algo.ALOHA: kernel.ALGO_ALOHA, Algo.BTA: kernel.ALGO_BTA,
                Algo.NCTA: kernel.ALGO_NCTA}


@lru_cache(maxsize=None)
def _ps_table(m: int) -> np.ndarray:
    return np.array([0.0] + [aloha_success_probability(n) for n in range(1, m + 1)])


def _simulate_fast(cfg: SimConfig, rep: int, arr: ArrivalTrace, audit: bool, keep_crps: bool) -> RunStats:
    tape = _aloha_tape(cfg, rep, arr.total) if cfg.algo is Algo.ALOHA else np.zeros(1)
    totals, crps = kernel.run_replication(arr.counts, _KERNEL_ALGO[cfg.algo], cfg.system_type is SystemType.TYPE_I,
                                          cfg.warmup, tape, _ps_table(cfg.m), audit)
    delivered, delay_sum, delivered_total, dropped, buffered, failures = totals.tolist()
    if failures:
        raise ModelViolation(f"{failures} CRP audit failures in {cfg.algo.value} replication {rep}")
    return RunStats(slots=cfg.horizon - cfg.warmup, arrivals=arr.total, delivered=delivered, dropped=dropped,
                    delay_sum=delay_sum, delivered_total=delivered_total, buffered=buffered,
                    crp_records=[CrpRecord(*row) for row in crps.tolist()] if keep_crps else [])


def _simulate_reference(cfg: SimConfig, rep: int, arr: ArrivalTrace, audit: bool, stepwise: bool) -> RunStats:
    pop = Population(arr)
    buffers = pop.buffers
    rng = random.Random(protocol_seed(cfg, rep))
    tape = _Tape(_aloha_tape(cfg, rep, arr.total)) if cfg.algo is Algo.ALOHA else None
    warm, horizon = cfg.warmup, cfg.horizon
    stats = RunStats(slots=horizon - warm, arrivals=arr.total)

    def record(frame: Frame, slot: int) -> None:
        stats.delivered_total += 1
        if slot >= warm:
            stats.delivered += 1
            stats.delay_sum += slot - frame.arrival_slot + 1

    if cfg.algo is Algo.TDM:
        for t in range(horizon):
            for frame in tdm_step(t, buffers, cfg.m).deliveries:
                record(frame, t)
    else:
        users = range(cfg.m)
        det = cfg.split is SplitPolicy.DETERMINISTIC_HALVES
        t = 0
        while t < horizon:
            parts = gate_participants(cfg.system_type, buffers, t)
            if not parts:
                nxt = pop.next_busy_slot(t)
                t = horizon if nxt is None else nxt
                continue
            shadow = None
            if cfg.algo is Algo.ALOHA and not stepwise:
                aloha_hits, length = sample_aloha_crp(parts, tape)
                schedule = tuple((i, (u,)) for i, u in aloha_hits), length
            elif cfg.algo is not Algo.ALOHA and det:
                schedule = _det_schedule(cfg.algo, cfg.m, tuple(parts))
                if audit and cfg.algo is Algo.NCTA:
                    shadow = _det_schedule(Algo.BTA, cfg.m, tuple(parts))
            else:
                frames = {u: buffers[u].held for u in parts}
                coins = PathCoins(rng.getrandbits(64)) if cfg.algo is not Algo.ALOHA else None
                schedule = _schedule_of(run_crp(cfg.algo, users, frames, cfg.split, rng, coins))
                if audit and cfg.algo is Algo.NCTA:
                    shadow = _schedule_of(run_crp(Algo.BTA, users, frames, cfg.split, coins=coins))
            if audit:
                _audit_crp(cfg.algo, parts, schedule, shadow)
            hits, length = schedule
            for offset, us in hits:
                slot = t + offset
                if slot >= horizon:
                    break
                for u in us:
                    record(buffers[u].release(slot), slot)
            stats.crp_records.append(CrpRecord(t, length, len(parts), sum(len(us) for _, us in hits)))
            t += length

    pop.advance_all(horizon - 1)
    stats.dropped = pop.dropped
    stats.buffered = pop.buffered
    return stats


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    cfg: SimConfig
    arrivals: int
    delivered: int
    dropped: int
    throughput: float
    ci_throughput: float
    mean_delay: float
    ci_delay: float


def _mean_ci(values: Sequence[float]) -> tuple[float, float]:
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, math.nan
    return mean, _Z95 * statistics.stdev(vals) / math.sqrt(len(vals))


def run_point(cfg: SimConfig) -> SweepRow:
    """All replications of one grid point, reduced to means and 95% normal CIs."""
    thr, dly = [], []
    arrivals = delivered = dropped = 0
    for rep in range(cfg.reps):
        st = simulate(cfg, rep, keep_crps=False)
        thr.append(throughput(st))
        dly.append(mean_delay(st))
        arrivals += st.arrivals
        delivered += st.delivered
        dropped += st.dropped
    t, ct = _mean_ci(thr)
    d, cd = _mean_ci(dly)
    return SweepRow(cfg, arrivals, delivered, dropped, t, ct, d, cd)


def sweep(grid: Iterable[SimConfig], reps: int | None = None, jobs: int = 1) -> list[SweepRow]:
    """Run every grid point; rows come back sorted by (algo, system_type, m, lambda)."""
    points = [replace(c, reps=reps) if reps is not None else c for c in grid]
    if not points:
        raise PreconditionError("empty sweep grid")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(run_point, points))
    else:
        rows = [run_point(c) for c in points]
    return sorted(rows, key=lambda r: r.cfg.sort_key())


def make_grid(algos: Iterable[Algo], system_types: Iterable[SystemType], ms: Iterable[int],
              lambdas: Iterable[float], **common) -> list[SimConfig]:
    return [SimConfig(algo=a, system_type=s, m=m, lambda_total=lam, **common)
            for a in algos for s in system_types for m in ms for lam in lambdas]
