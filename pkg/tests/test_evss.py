"""Verifiable sharing: state machine, batch runner, and their agreement.

The state-machine tests drive EvssParty instances through a scripted
router with an optional tamper hook standing in for the adversary. The
batch runner is then cross-validated by replaying its wire transcript
into the state machine and demanding identical verdicts and shares.
"""

from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compc import evss
from compc.errors import ParameterViolation
from compc.evss import (BatchInstance, EvssDeal, EvssMsg, EvssParty,
                        complaints_for, evss_deal, evss_deal_poly,
                        evss_finalize, evss_round, reveals_for,
                        run_evss_batch, vote_for)
from compc.gf import FMatrix, solve_particular
from compc.net import (BCAST, PRIV, AdversaryController, Network, Scenario,
                       Transcript, rng_for)
from compc.poly import MatPoly, vandermonde
from compc.sharing import ShareLabel, make_share_poly

P = 97


def fit_poly(points, values, degree, p):
    """Least-degree fit oracle; None when the values are inconsistent."""
    v = vandermonde(points, degree + 1, p)
    flat = np.stack([np.asarray(x) for x in values]).reshape(len(points), -1)
    sol = solve_particular(v, flat, p)
    if sol is None:
        return None
    return sol.reshape((degree + 1,) + np.asarray(values[0]).shape)


def rand_matrix(rng, rows, cols, p=P):
    return FMatrix(rng.integers(0, p, size=(rows, cols)), p)


# ---------------------------------------------------------------------------
# dealing


def test_deal_structure_and_crosspoints():
    rng = np.random.default_rng(7)
    lab = ShareLabel(2, 1, 1)
    w = rand_matrix(rng, 2, 4)
    deal = evss_deal(w, lab, np.random.default_rng(3))
    assert deal.d1 == lab.degree + 1 == 4
    q = deal.grid[0]
    assert np.array_equal(q[0], w.a[:, :2])
    assert np.array_equal(q[1], w.a[:, 2:])
    assert not q[2].any()          # the gap slot
    for i in range(1, 8):
        fc, gc = deal.polys_for(i)
        assert np.array_equal(fc[0], evss._poly_at(q, i, P))
        for j in range(1, 8):
            assert np.array_equal(evss._poly_at(fc, j, P),
                                  deal.value_at(j, i))
            assert np.array_equal(evss._poly_at(gc, j, P),
                                  deal.value_at(i, j))


def test_deal_poly_degree_bound():
    q = MatPoly(np.arange(8, dtype=np.int64).reshape(4, 2, 1), P)
    with pytest.raises(ParameterViolation):
        evss_deal_poly(q, ShareLabel(1, 1, 0), np.random.default_rng(0))


def test_deal_rng_draw_order():
    # masks first (one call per level), then the full grid in one call
    class Scripted:
        def __init__(self, vals):
            self.vals = list(vals)

        def integers(self, lo, hi, size=None):
            n = int(np.prod(size))
            out = np.array(self.vals[:n], dtype=np.int64).reshape(size)
            del self.vals[:n]
            return out

    lab = ShareLabel(1, 1, 0)
    w = FMatrix(np.array([[4]]), 5)
    rng = Scripted([2, 9, 9, 3, 1])      # R, discarded row 0, s10, s11
    deal = evss_deal(w, lab, rng)
    assert np.array_equal(deal.grid.reshape(2, 2),
                          np.array([[4, 2], [3, 1]]))


# ---------------------------------------------------------------------------
# decision rules


def _pair_for(deal, i):
    return deal.polys_for(i)


def test_complaints_missing_and_mismatched_senders():
    deal = evss_deal(FMatrix(np.array([[5]]), P), ShareLabel(1, 1, 0),
                     np.random.default_rng(1))
    polys = _pair_for(deal, 2)
    good = {j: (deal.value_at(2, j), deal.value_at(j, 2)) for j in (1, 3, 4)}
    assert complaints_for(2, polys, good, (1, 3, 4), P) == []
    assert complaints_for(2, None, good, (1, 3, 4), P) == [("self",)]
    bad = dict(good)
    bad[3] = ((bad[3][0] + 1) % P, bad[3][1])
    del bad[4]
    got = complaints_for(2, polys, bad, (1, 3, 4), P)
    assert [c[1] for c in got] == [3, 4]
    u, v = got[0][2], got[0][3]
    assert np.array_equal(u, evss._poly_at(polys[0], 3, P))
    assert np.array_equal(v, evss._poly_at(polys[1], 3, P))


def test_reveals_only_for_wrong_claims_and_self():
    deal = evss_deal(FMatrix(np.array([[5]]), P), ShareLabel(1, 1, 0),
                     np.random.default_rng(2))
    right = ("pair", 3, deal.value_at(3, 2), deal.value_at(2, 3))
    wrong = ("pair", 3, (deal.value_at(3, 4) + 1) % P, deal.value_at(4, 3))
    ans = reveals_for(deal, {2: [right], 4: [wrong], 1: [("self",)]},
                      {1, 2, 3, 4})
    assert sorted(ans) == [1, 4]
    assert np.array_equal(ans[4][0], deal.polys_for(4)[0])


def test_vote_rules():
    deal = evss_deal(FMatrix(np.array([[9]]), P), ShareLabel(1, 1, 0),
                     np.random.default_rng(3))
    d1, shape = deal.d1, deal.shape
    polys = _pair_for(deal, 1)
    cross = {j: (deal.value_at(1, j), deal.value_at(j, 1)) for j in (2, 3, 4)}

    # no complaints that matter, everything consistent
    ok, _ = vote_for(1, polys, cross, {}, {}, d1, shape, P)
    assert ok

    # unanswered self-complaint blocks
    ok, _ = vote_for(1, polys, cross, {3: [("self",)]}, {}, d1, shape, P)
    assert not ok
    # answered self-complaint with a consistent reveal passes
    ok, _ = vote_for(1, polys, cross, {3: [("self",)]},
                     {3: deal.polys_for(3)}, d1, shape, P)
    assert ok

    # bidirectional pair, mutually consistent claims: false accusation
    c23 = ("pair", 3, deal.value_at(3, 2), deal.value_at(2, 3))
    c32 = ("pair", 2, deal.value_at(2, 3), deal.value_at(3, 2))
    ok, _ = vote_for(1, polys, cross, {2: [c23], 3: [c32]}, {}, d1, shape, P)
    assert ok
    # mutually inconsistent claims, nothing revealed: withhold
    c32_bad = ("pair", 2, (deal.value_at(2, 3) + 1) % P, deal.value_at(3, 2))
    ok, _ = vote_for(1, polys, cross, {2: [c23], 3: [c32_bad]}, {},
                     d1, shape, P)
    assert not ok
    # same clash but one side revealed consistently: pair rule is off
    ok, _ = vote_for(1, polys, cross, {2: [c23], 3: [c32_bad]},
                     {3: deal.polys_for(3)}, d1, shape, P)
    assert ok

    # reveal conflicting with own pair
    rf, rg = deal.polys_for(3)
    ok, _ = vote_for(1, polys, cross, {3: [("self",)]},
                     {3: ((rf + 1) % P, rg)}, d1, shape, P)
    assert not ok

    # own reveal: adopted iff well formed, vote iff it matches crosses
    mine = deal.polys_for(1)
    ok, adopted = vote_for(1, None, cross, {1: [("self",)]}, {1: mine},
                           d1, shape, P)
    assert ok and adopted is mine
    ok, _ = vote_for(1, None, cross, {1: [("self",)]},
                     {1: ((mine[0] + 1) % P, mine[1])}, d1, shape, P)
    assert not ok


# ---------------------------------------------------------------------------
# state machine end to end


def run_machine(n, t, label, shape, p, dealer, deal, tamper=None):
    ids = sorted(set(range(1, n + 1)) | {dealer})
    parties = {i: EvssParty(i, dealer, n, t, label, shape, p,
                            deal=deal if i == dealer else None)
               for i in ids}
    pending = []
    sent = []
    for rnd in range(6):
        inboxes = {i: [] for i in ids}
        for msg in pending:
            if msg.channel == PRIV:
                if msg.body[0] in inboxes:
                    inboxes[msg.body[0]].append(msg)
            else:
                for i in ids:
                    inboxes[i].append(msg)
        pending = []
        for i in ids:
            _, out = evss_round(parties[i], inboxes[i])
            if tamper is not None:
                out = tamper(rnd, i, out)
            pending.extend(out)
            sent.extend(out)
    return {i: evss_finalize(parties[i]) for i in ids}, parties, sent


def check_shares_form_secret(verdicts, label, w, n, p):
    pts = list(range(1, n + 1))
    vals = [verdicts[i].share for i in pts]
    assert all(v is not None for v in vals)
    coeffs = fit_poly(pts, vals, label.degree, p)
    assert coeffs is not None
    m = label.m
    assert np.array_equal(coeffs[:m].transpose(1, 0, 2).reshape(w.shape[0], -1),
                          w.a)
    assert not coeffs[m:label.mask_lo].any()


@pytest.mark.parametrize("m,t,delta", [(1, 1, 0), (2, 1, 0), (1, 2, 1)])
def test_machine_honest_accepts_with_minimum_messages(m, t, delta):
    n = 3 * t + m + delta + 1
    lab = ShareLabel(m, t, delta)
    rng = np.random.default_rng(17)
    w = rand_matrix(rng, 2 * m, 2 * m)
    deal = evss_deal(w, lab, rng)
    verdicts, _, sent = run_machine(n, t, lab, (2 * m, 2), P, 1, deal)
    assert all(v.accepted for v in verdicts.values())
    check_shares_form_secret(verdicts, lab, w, n, P)
    # early accept: deals + crosses only
    assert len(sent) == (n - 1) + n * (n - 1)


def test_machine_external_source_dealer():
    n, t = 4, 1
    lab = ShareLabel(1, 1, 0)
    rng = np.random.default_rng(5)
    w = rand_matrix(rng, 2, 2)
    deal = evss_deal(w, lab, rng)
    verdicts, _, _ = run_machine(n, t, lab, (2, 2), P, n + 1, deal)
    assert all(v.accepted for v in verdicts.values())
    assert verdicts[n + 1].share is None
    check_shares_form_secret({i: verdicts[i] for i in range(1, n + 1)},
                             lab, w, n, P)


def test_machine_byzantine_crosses_and_false_complaint_still_accept():
    n, t, bad = 5, 1, 3
    lab = ShareLabel(2, 1, 0)
    rng = np.random.default_rng(23)
    w = rand_matrix(rng, 2, 2)
    deal = evss_deal(w, lab, rng)

    def tamper(rnd, sender, out):
        if sender != bad:
            return out
        if rnd == 1:    # garbage cross values
            return [EvssMsg("cross", sender, PRIV,
                            (m.body[0], (m.body[1] + 11) % P,
                             (m.body[2] + 29) % P)) for m in out]
        if rnd == 2:    # false accusation against party 1, wrong claims
            fc, gc = deal.polys_for(bad)
            return [EvssMsg("complain", sender, BCAST,
                            (("pair", 1, (evss._poly_at(fc, 1, P) + 1) % P,
                              evss._poly_at(gc, 1, P)),))]
        return out

    verdicts, _, _ = run_machine(n, t, lab, (2, 1), P, 1, deal, tamper)
    honest = [i for i in range(1, n + 1) if i != bad]
    assert all(verdicts[i].accepted for i in honest)
    pts = honest
    coeffs = fit_poly(pts, [verdicts[i].share for i in pts], lab.degree, P)
    assert coeffs is not None


def test_machine_silent_dealer_rejected_unanimously():
    n, t = 4, 1
    lab = ShareLabel(1, 1, 0)
    rng = np.random.default_rng(31)
    deal = evss_deal(rand_matrix(rng, 2, 2), lab, rng)

    def tamper(rnd, sender, out):
        return [] if sender == 1 and rnd in (0, 3) else out

    verdicts, _, _ = run_machine(n, t, lab, (2, 2), P, 1, deal, tamper)
    assert not any(v.accepted for v in verdicts.values())


def test_machine_two_faced_dealer_agreement():
    # dealer 1 deals from a second grid to parties 4 and 5
    n, t = 5, 1
    lab = ShareLabel(1, 1, 0)
    rng = np.random.default_rng(41)
    deal = evss_deal(rand_matrix(rng, 2, 2), lab, rng)
    other = evss_deal(rand_matrix(rng, 2, 2), lab, rng)

    def tamper(rnd, sender, out):
        if sender == 1 and rnd == 0:
            fresh = []
            for m in out:
                if m.body[0] in (4, 5):
                    fc, gc = other.polys_for(m.body[0])
                    m = EvssMsg("deal", sender, PRIV, (m.body[0], fc, gc))
                fresh.append(m)
            return fresh
        return out

    verdicts, _, _ = run_machine(n, t, lab, (2, 2), P, 1, deal, tamper)
    flags = {verdicts[i].accepted for i in range(1, n + 1)}
    assert flags == {False}


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2), st.integers(0, 1),
       st.integers(0, 10 ** 6))
def test_machine_honest_property(m, t, delta, seed):
    n = 3 * t + m + delta + 1
    lab = ShareLabel(m, t, delta)
    rng = np.random.default_rng(seed)
    w = rand_matrix(rng, m, m)
    deal = evss_deal(w, lab, rng)
    verdicts, _, _ = run_machine(n, t, lab, (m, 1), P, 1, deal)
    assert all(v.accepted for v in verdicts.values())
    check_shares_form_secret(verdicts, lab, w, n, P)


# ---------------------------------------------------------------------------
# batch runner


def batch_scenario(n=5, t=1, m=1, p=P, seed=0, z=2, adversaries=(),
                   inputs=()):
    return Scenario(n=n, t=t, m=m, p=p, seed=seed, z=z, program=(),
                    adversaries=adversaries, inputs=inputs).validate()


def fresh_net(scenario):
    return Network(scenario, Transcript()), AdversaryController(scenario)


def test_batch_honest_multi_dealer_early_accept():
    rng = np.random.default_rng(3)
    s = batch_scenario(inputs=(rand_matrix(rng, 2, 2),))
    net, adv = fresh_net(s)
    lab = ShareLabel(1, 1, 0)
    deals = {}
    instances = []
    for iid, dealer in (("a", 2), ("b", 4), ("c", 6)):   # 6 is a source
        deals[iid] = evss_deal(rand_matrix(rng, 2, 2), lab,
                               rng_for(s.seed, dealer, f"x:{iid}"))
        instances.append(BatchInstance(iid, dealer, lab, deals[iid]))
    out = run_evss_batch(net, adv, s, "x", instances)
    assert net.round == 3          # deal, cross, complain only
    for iid, res in out.items():
        assert res.accepted
        for i in s.workers:
            expect = evss._poly_at(deals[iid].grid[0], i, s.p)
            assert np.array_equal(res.shares[i], expect)
    # nobody complains, so only deal and cross traffic exists
    phases = {e.phase for e in net.transcript.envelopes}
    assert phases == {"x:deal", "x:cross"}


def test_batch_validates_instances():
    s = batch_scenario()
    net, adv = fresh_net(s)
    lab = ShareLabel(1, 1, 0)
    rng = np.random.default_rng(0)
    d1 = evss_deal(rand_matrix(rng, 2, 2), lab, rng)
    d2 = evss_deal(rand_matrix(rng, 2, 1), lab, rng)
    with pytest.raises(ParameterViolation):
        run_evss_batch(net, adv, s, "x",
                       [BatchInstance("a", 1, lab, d1),
                        BatchInstance("a", 2, lab, d1)])
    with pytest.raises(ParameterViolation):
        run_evss_batch(net, adv, s, "x",
                       [BatchInstance("a", 1, lab, d1),
                        BatchInstance("b", 2, lab, d2)])


def test_batch_deterministic_transcript():
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(9)
        s = batch_scenario(adversaries=((3, "RandomByzantine"),))
        net, adv = fresh_net(s)
        lab = ShareLabel(1, 1, 0)
        instances = [
            BatchInstance(f"i{d}", d, lab,
                          evss_deal(rand_matrix(rng, 2, 2), lab,
                                    rng_for(s.seed, d, "x:deal")))
            for d in (1, 2, 3)]
        run_evss_batch(net, adv, s, "x", instances)
        outs.append(net.transcript.serialize())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# batch runner vs state machine on identical wire traffic

KIND_BY_PHASE = {"deal": "deal", "cross": "cross", "complain": "complain",
                 "resolve": "reveal", "vote": "vote"}


def replay_single_instance(envelopes, iid, n, t, label, shape, p,
                           dealer, deal):
    """Feed a batch transcript through EvssParty instances."""
    rounds = {}
    for e in envelopes:
        kind = KIND_BY_PHASE[e.phase.rsplit(":", 1)[1]]
        body = None
        try:
            if kind == "deal":
                _, iids, fs, gs = e.payload
                if iid in iids:
                    k = iids.index(iid)
                    body = (e.recipient, fs[k], gs[k])
            elif kind == "cross":
                _, iids, us, vs = e.payload
                if iid in iids:
                    k = iids.index(iid)
                    body = (e.recipient, us[k], vs[k])
            elif kind == "complain":
                items = tuple(it[1:] for it in e.payload[1] if it[0] == iid)
                body = items or None
            elif kind == "reveal":
                items = tuple(it[1:] for it in e.payload[1]
                              if len(it) == 4 and it[0] == iid)
                body = items or None
            elif kind == "vote":
                bits = [it[1] for it in e.payload[1] if it[0] == iid]
                body = (bits[0],) if bits else None
        except (TypeError, ValueError, IndexError):
            continue
        if body is not None:
            rounds.setdefault(e.round, []).append(
                EvssMsg(kind, e.sender, e.channel, body))

    ids = sorted(set(range(1, n + 1)) | {dealer})
    parties = {i: EvssParty(i, dealer, n, t, label, shape, p,
                            deal=deal if i == dealer else None)
               for i in ids}
    for rnd in range(6):
        for i in ids:
            inbox = [m for m in rounds.get(rnd - 1, ())
                     if m.channel == BCAST or m.body[0] == i]
            evss_round(parties[i], inbox)
    return {i: evss_finalize(parties[i]) for i in ids}


CASES = [((2, "Silent"), 2), ((2, "InconsistentEvssDealer"), 2),
         ((2, "RandomByzantine"), 2), ((3, "RandomByzantine"), 1),
         ((2, "WrongSubshareConstant"), 2), (None, 1)]


@pytest.mark.parametrize("adversary,dealer", CASES)
@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_batch_agrees_with_state_machine(adversary, dealer, seed):
    lab = ShareLabel(1, 1, 0)
    s = batch_scenario(n=4, t=1, m=1, p=13, seed=seed, z=2,
                       adversaries=(adversary,) if adversary else ())
    net, adv = fresh_net(s)
    rng = np.random.default_rng(seed + 100)
    deal = evss_deal(rand_matrix(rng, 2, 2, 13), lab,
                     rng_for(s.seed, dealer, "x:deal"))
    out = run_evss_batch(net, adv, s, "x",
                         [BatchInstance("q", dealer, lab, deal)],
                         kinds={"q": "subshare"})["q"]

    verdicts = replay_single_instance(
        net.transcript.envelopes, "q", s.n, s.t, lab, (2, 2), 13,
        dealer, deal)
    bad = adversary[0] if adversary else None
    for i in range(1, s.n + 1):
        assert verdicts[i].accepted == out.accepted
        if i == bad:
            continue    # a deviating dealer's own holdings may differ
        a, b = verdicts[i].share, out.shares[i]
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a, b)


def test_batch_inconsistent_dealer_rejected():
    s = batch_scenario(n=4, t=1, m=1, p=P, seed=5, z=2,
                       adversaries=((2, "InconsistentEvssDealer"),))
    net, adv = fresh_net(s)
    lab = ShareLabel(1, 1, 0)
    rng = np.random.default_rng(2)
    deal = evss_deal(rand_matrix(rng, 2, 2), lab, rng_for(s.seed, 2, "x:deal"))
    out = run_evss_batch(net, adv, s, "x",
                         [BatchInstance("q", 2, lab, deal)])["q"]
    assert not out.accepted
    assert net.round == 5


# ---------------------------------------------------------------------------
# privacy: a single observer's view carries nothing about the secret


def test_single_view_distribution_independent_of_secret():
    # exhaustive over the dealer's state space at m=1, t=1, GF(5):
    # grid = [[w, R], [s10, s11]] with (R, s10, s11) free
    lab = ShareLabel(1, 1, 0)
    observer, others = 2, (1, 3, 4)
    dists = []
    for w in (0, 3):
        c = Counter()
        for r, s10, s11 in product(range(5), repeat=3):
            grid = np.array([[w, r], [s10, s11]],
                            dtype=np.int64).reshape(2, 2, 1, 1)
            deal = EvssDeal(grid, lab, 5)
            view = []
            fc, gc = deal.polys_for(observer)
            view += [int(x) for x in np.concatenate([fc, gc]).ravel()]
            for j in others:
                fj, gj = deal.polys_for(j)
                view.append(int(evss._poly_at(fj, observer, 5)[0, 0]))
                view.append(int(evss._poly_at(gj, observer, 5)[0, 0]))
            c[tuple(view)] += 1
        dists.append(c)
    assert dists[0] == dists[1]
    assert sum(dists[0].values()) == 5 ** 3
