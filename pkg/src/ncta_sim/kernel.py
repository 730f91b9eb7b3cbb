"""Compiled replication loop for the deterministic-split hot path.

Mirrors ``harness._simulate_reference`` slot for slot; the test suite checks
the two produce identical counters.  Deterministic halving of the sorted full
user set only ever yields contiguous index ranges, so tree nodes are
``[lo, hi)`` pairs here.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

ALGO_TDM, ALGO_ALOHA, ALGO_BTA, ALGO_NCTA = 0, 1, 2, 3


@njit(cache=True)
def _count(active, lo, hi):
    c = 0
    for u in range(lo, hi):
        c += active[u]
    return c


@njit(cache=True)
def _first(active, lo, hi):
    for u in range(lo, hi):
        if active[u]:
            return u
    return -1


@njit(cache=True)
def _ncta(active, m, k, deliver_at, t0, stack):
    """Resolve one NCTA CRP; returns its length and fills ``deliver_at``."""
    if k <= 1:
        if k == 1:
            deliver_at[_first(active, 0, m)] = t0
        return 1
    slot = 1
    sp = 0
    stack[sp, 0] = 0
    stack[sp, 1] = m
    sp += 1
    while sp > 0:
        sp -= 1
        lo, hi = stack[sp, 0], stack[sp, 1]
        mid = lo + (hi - lo + 1) // 2
        c1 = _count(active, lo, mid)
        c2 = _count(active, mid, hi)
        if c1 == 1:
            deliver_at[_first(active, lo, mid)] = t0 + slot
        if c2 == 1:
            deliver_at[_first(active, mid, hi)] = t0 + slot
        if c2 >= 2:
            stack[sp, 0] = mid
            stack[sp, 1] = hi
            sp += 1
        if c1 >= 2:
            stack[sp, 0] = lo
            stack[sp, 1] = mid
            sp += 1
        slot += 1
    return slot


@njit(cache=True)
def _bta(active, m, deliver_at, t0, stack, record):
    slot = 0
    sp = 0
    stack[sp, 0] = 0
    stack[sp, 1] = m
    sp += 1
    while sp > 0:
        sp -= 1
        lo, hi = stack[sp, 0], stack[sp, 1]
        c = _count(active, lo, hi)
        if c == 1 and record:
            deliver_at[_first(active, lo, hi)] = t0 + slot
        elif c >= 2:
            mid = lo + (hi - lo + 1) // 2
            stack[sp, 0] = mid
            stack[sp, 1] = hi
            sp += 1
            stack[sp, 0] = lo
            stack[sp, 1] = mid
            sp += 1
        slot += 1
    return slot


@njit(cache=True)
def _aloha(active, m, k, deliver_at, t0, tape, pos, ps_table, left):
    n = 0
    for u in range(m):
        if active[u]:
            left[n] = u
            n += 1
    if n <= 1:
        if n == 1:
            deliver_at[left[0]] = t0
        return 1, pos
    t = 1
    while n > 0:
        ps = ps_table[n]
        t += int(math.log(1.0 - tape[pos]) / math.log(1.0 - ps))
        pos += 1
        i = int(tape[pos] * n)
        pos += 1
        deliver_at[left[i]] = t0 + t
        for j in range(i, n - 1):
            left[j] = left[j + 1]
        n -= 1
        t += 1
    return t, pos


@njit(cache=True)
def run_replication(counts, algo, type1, warm, tape, ps_table, audit):
    """One replication.

    Returns ``(totals, crps)``: totals = [delivered, delay_sum,
    delivered_total, dropped, buffered, audit_failures]; crps rows =
    (start, length, participants, deliveries).
    """
    horizon, m = counts.shape
    held = np.full(m, -1, np.int64)
    deliver_at = np.full(m, -1, np.int64)
    active = np.zeros(m, np.int64)
    shadow_at = np.full(m, -1, np.int64)
    stack = np.zeros((2 * m + 2, 2), np.int64)
    left = np.zeros(m, np.int64)
    crps = np.zeros((horizon, 4), np.int64)
    ncrp = 0
    delivered = 0
    delay_sum = 0
    delivered_total = 0
    dropped = 0
    failures = 0
    pos = 0
    crp_end = 0

    for t in range(horizon):
        for u in range(m):
            c = counts[t, u]
            if c > 0:
                if held[u] < 0:
                    held[u] = t
                    c -= 1
                dropped += c

        if algo == ALGO_TDM:
            u = t % m
            if held[u] >= 0:
                delivered_total += 1
                if t >= warm:
                    delivered += 1
                    delay_sum += t - held[u] + 1
                held[u] = -1
            continue

        if t >= crp_end:
            k = 0
            for u in range(m):
                active[u] = 0
                if held[u] >= 0:
                    if type1 and held[u] != t:
                        held[u] = -1
                        dropped += 1
                    else:
                        active[u] = 1
                        k += 1
            if k == 0:
                continue
            if algo == ALGO_NCTA:
                length = _ncta(active, m, k, deliver_at, t, stack)
                if audit and length > _bta(active, m, shadow_at, t, stack, False):
                    failures += 1
            elif algo == ALGO_BTA:
                length = _bta(active, m, deliver_at, t, stack, True)
            else:
                length, pos = _aloha(active, m, k, deliver_at, t, tape, pos, ps_table, left)
            got = 0
            for u in range(m):
                if active[u]:
                    if deliver_at[u] < t or deliver_at[u] >= t + length:
                        failures += 1
                    else:
                        got += 1
            if got != k:
                failures += 1
            crps[ncrp, 0] = t
            crps[ncrp, 1] = length
            crps[ncrp, 2] = k
            crps[ncrp, 3] = got
            ncrp += 1
            crp_end = t + length

        for u in range(m):
            if deliver_at[u] == t:
                delivered_total += 1
                if t >= warm:
                    delivered += 1
                    delay_sum += t - held[u] + 1
                held[u] = -1
                deliver_at[u] = -1

    buffered = 0
    for u in range(m):
        if held[u] >= 0:
            buffered += 1
    totals = np.array([delivered, delay_sum, delivered_total, dropped, buffered, failures], np.int64)
    return totals, crps[:ncrp]
