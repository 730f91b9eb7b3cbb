import random
from collections import Counter
from itertools import combinations

import pytest

from ncta_sim.channel import Feedback, Frame, Signal, classify
from ncta_sim.errors import PreconditionError
from ncta_sim.protocols import (Algo, AlohaMode, PathCoins, SplitPolicy, aloha_open, aloha_probability, aloha_step,
                                bta_open, bta_step, ncta_open, ncta_step, run_crp, sample_aloha_crp, split,
                                tdm_owner, tdm_step)
from ncta_sim.traffic import UserBuffer

DET, RAND = SplitPolicy.DETERMINISTIC_HALVES, SplitPolicy.RANDOM_FAIR_COIN


class _Coins:
    def __init__(self, values):
        self.values = iter(values)

    def random(self):
        return next(self.values)


def test_split_det():
    assert split([3, 1, 0, 2], DET) == ((0, 1), (2, 3))
    assert split([5], DET) == ((5,), ())
    assert split([0, 1, 2], DET) == ((0, 1), (2,))


def test_split_rand_follows_coins():
    assert split([0, 1], RAND, _Coins([0.2, 0.7])) == ((0,), (1,))


def test_split_rejects_empty_and_missing_rng():
    with pytest.raises(PreconditionError):
        split([], DET)
    with pytest.raises(PreconditionError):
        split([0, 1], RAND)


def test_path_coins_are_keyed_by_path():
    c = PathCoins(7)
    assert c.at("01").random() == c.at("01").random()
    assert c.at("0").random() != c.at("1").random()


def test_ncta_open_cases(frames):
    out, r = ncta_open(range(8), {}, DET)
    assert out.feedback is Feedback.EMPTY and r is None
    out, r = ncta_open(range(8), frames(3), DET)
    assert [f.user_id for f in out.deliveries] == [3] and r is None
    out, r = ncta_open(range(8), frames(1, 2), DET)
    assert r.s1 == [tuple(range(8))] and r.s2 == [Signal.of(Frame(1, 0, 0), Frame(2, 0, 0))]


def test_ncta_residual_decode_delivers_two(frames):
    _, r = ncta_open(range(2), frames(0, 1), DET)
    out = ncta_step(r, None)
    assert sorted(f.user_id for f in out.deliveries) == [0, 1]
    assert r.done


def test_ncta_stacks_stay_paired_with_collisions(frames):
    _, r = ncta_open(range(8), frames(*range(8)), DET)
    while not r.done:
        assert len(r.s1) == len(r.s2)
        for subset, sig in zip(r.s1, r.s2):
            assert classify(sig) is Feedback.COLLISION
            assert sig.users <= set(subset)
        out = ncta_step(r, None)
        assert len(out.deliveries) <= 2


def test_ncta_step_on_empty_resolver(frames):
    _, r = ncta_open(range(2), frames(0, 1), DET)
    ncta_step(r)
    with pytest.raises(PreconditionError):
        ncta_step(r)


def test_bta_tree_full_load(frames):
    out, r = bta_open(range(8), frames(*range(8)), DET)
    slots = 1
    while not r.done:
        assert len(bta_step(r).deliveries) <= 1
        slots += 1
    assert slots == 15


@pytest.mark.parametrize("m", [2, 4, 8])
def test_ncta_full_load_lengths(m, frames):
    trace = run_crp(Algo.NCTA, range(m), frames(*range(m)))
    assert len(trace) == m
    assert len(run_crp(Algo.BTA, range(m), frames(*range(m)))) == 2 * m - 1


def test_ncta_never_longer_than_bta_with_paired_random_splits(frames):
    rng = random.Random(3)
    for _ in range(300):
        k = rng.randint(2, 8)
        act = frames(*rng.sample(range(8), k))
        coins = PathCoins(rng.getrandbits(64))
        n = run_crp(Algo.NCTA, range(8), act, RAND, coins=coins)
        b = run_crp(Algo.BTA, range(8), act, RAND, coins=coins)
        assert len(n) <= len(b)
        assert sorted(f.user_id for o in n for f in o.deliveries) == sorted(act)


def test_aloha_probability_and_errors():
    assert aloha_probability(1) == 0.5
    assert aloha_probability(7) == 0.125
    with pytest.raises(PreconditionError):
        aloha_probability(0)


def test_aloha_blocks_then_unblocks(frames):
    out, st = aloha_open(frames(0, 1, 2))
    assert out.feedback is Feedback.COLLISION and st.mode is AlohaMode.BLOCKED
    rng = random.Random(1)
    delivered = []
    while not st.done:
        delivered += [f.user_id for f in aloha_step(st, rng).deliveries]
    assert sorted(delivered) == [0, 1, 2] and st.mode is AlohaMode.UNBLOCKED
    with pytest.raises(PreconditionError):
        aloha_step(st, rng)


def test_aloha_sampler_matches_stepwise_law(frames):
    # mean CRP length and winner order distribution agree between the two generators
    rng = random.Random(11)
    n, trials = 4, 20000
    step_len, samp_len = [], []
    first_step, first_samp = Counter(), Counter()
    for _ in range(trials):
        trace = run_crp(Algo.ALOHA, range(8), frames(0, 1, 2, 3), rng=rng)
        step_len.append(len(trace))
        first_step[next(o.deliveries[0].user_id for o in trace if o.deliveries)] += 1
        hits, length = sample_aloha_crp([0, 1, 2, 3], rng)
        samp_len.append(length)
        first_samp[hits[0][1]] += 1
    ms, mp = sum(step_len) / trials, sum(samp_len) / trials
    var = sum((x - ms) ** 2 for x in step_len) / trials
    assert abs(ms - mp) < 4 * (2 * var / trials) ** 0.5
    for u in range(n):
        assert abs(first_step[u] - trials / n) < 5 * (trials * 0.25 * 0.75) ** 0.5
        assert abs(first_samp[u] - trials / n) < 5 * (trials * 0.25 * 0.75) ** 0.5


def test_sample_aloha_small_sets():
    assert sample_aloha_crp([], random.Random(0)) == ([], 1)
    assert sample_aloha_crp([4], random.Random(0)) == ([(0, 4)], 1)


def test_tdm_round_robin():
    bufs = [UserBuffer(u, [0], [1]) for u in range(3)]
    assert tdm_owner(4, 3) == 1
    got = [tdm_step(t, bufs, 3) for t in range(4)]
    assert [len(o.deliveries) for o in got] == [1, 1, 1, 0]
    assert got[3].feedback is Feedback.EMPTY


def test_run_crp_rejects_tdm(frames):
    with pytest.raises(PreconditionError):
        run_crp(Algo.TDM, range(2), frames(0, 1))


@pytest.mark.parametrize("algo", [Algo.NCTA, Algo.BTA])
def test_det_crp_delivers_every_subset(algo, frames):
    for k in range(1, 7):
        for act in combinations(range(6), k):
            trace = run_crp(algo, range(6), frames(*act))
            assert sorted(f.user_id for o in trace for f in o.deliveries) == list(act)
