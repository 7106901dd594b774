"""Deterministic synchronous network simulator with adversary hooks.

Parties exchange messages in rounds. Each round, the protocol driver
computes every party's honest outbox, the adversary controller mutates
the outboxes of corrupted parties, and the network delivers: private
payloads to their recipient, broadcasts to everyone. Deliveries are
sorted canonically (round, sender, channel kind, recipient) so the
transcript is a pure function of the scenario.

Randomness discipline: every honest draw comes from a stream keyed by
(seed, party, phase tag), and the number of draws per phase depends
only on the scenario. Adversary behavior therefore cannot perturb
honest randomness, which the privacy audits rely on.

Party numbering: 0 is the master, 1..N are workers (party n evaluates
at alpha_n = n), N+1.. are input sources.
"""

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParameterViolation
from .gf import check_prime

BCAST = "bcast"
PRIV = "priv"

STRATEGY_NAMES = (
    "SemiHonest", "InconsistentEvssDealer", "WrongSubshareConstant",
    "BadGapCoefficient", "CorruptProductPoly", "FalseComplainer",
    "RandomByzantine", "Silent",
)


def rng_for(seed, party, phase):
    """Independent deterministic stream per (seed, party, phase)."""
    digest = hashlib.sha256(f"{seed}|{party}|{phase}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Scenario:
    n: int
    t: int
    m: int
    p: int
    seed: int
    z: int
    program: tuple
    adversaries: tuple = ()     # ((party, strategy), ...)
    inputs: tuple = ()          # FMatrix per source
    sub_threshold: bool = False

    def validate(self):
        check_prime(self.p)
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterViolation("seed must fit in 64 bits")
        if self.p <= self.n:
            raise ParameterViolation("need p > N for distinct worker points")
        if self.m < 1 or self.z % self.m:
            raise ParameterViolation("m must divide the matrix dimension")
        if len(self.adversaries) > self.t:
            raise ParameterViolation("more adversaries than the bound t")
        if self.n < 3 * self.t + 2 * self.m - 1 and not self.sub_threshold:
            raise ParameterViolation(
                f"N={self.n} below recovery threshold {3 * self.t + 2 * self.m - 1}")
        seen = set()
        for party, strat in self.adversaries:
            if not 1 <= party <= self.n or party in seen:
                raise ParameterViolation(f"bad adversary id {party}")
            seen.add(party)
            if strat not in STRATEGY_NAMES:
                raise ParameterViolation(f"unknown strategy {strat!r}")
        for x in self.inputs:
            if x.p != self.p or x.shape != (self.z, self.z):
                raise ParameterViolation("inputs must be z x z over the scenario prime")
        return self

    @property
    def workers(self):
        return tuple(range(1, self.n + 1))

    @property
    def adversary_ids(self):
        return frozenset(a for a, _ in self.adversaries)


class Envelope(NamedTuple):
    round: int
    sender: int
    channel: str        # BCAST or PRIV
    recipient: int      # -1 for broadcast
    phase: str
    payload: tuple


def _ser(obj):
    """Canonical, unambiguous text form for payload trees."""
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return obj
    if obj is None:
        return "~"
    if isinstance(obj, np.ndarray):
        dims = ",".join(str(d) for d in obj.shape)
        body = ",".join(str(int(v)) for v in obj.ravel())
        return f"[{dims}:{body}]"
    if isinstance(obj, (tuple, list)):
        return "(" + ";".join(_ser(x) for x in obj) + ")"
    if isinstance(obj, bool):
        return "1" if obj else "0"
    raise TypeError(f"unserializable payload element {type(obj)}")


@dataclass
class Transcript:
    envelopes: list = field(default_factory=list)
    events: list = field(default_factory=list)
    master_output: object = None
    abort: object = None

    def add_event(self, *fields):
        self.events.append(tuple(fields))

    def serialize(self):
        lines = []
        for e in self.envelopes:
            to = "*" if e.channel == BCAST else str(e.recipient)
            lines.append(f"E|{e.round}|{e.sender}|{to}|{e.phase}|{_ser(e.payload)}")
        for ev in self.events:
            lines.append("V|" + "|".join(_ser(x) for x in ev))
        if self.abort is not None:
            lines.append(f"A|{self.abort[0]}|{self.abort[1]}")
        if self.master_output is not None:
            lines.append(f"M|{_ser(self.master_output.a)}")
        return "\n".join(lines) + "\n"


class Network:
    """Collects outboxes, applies canonical ordering, delivers."""

    def __init__(self, scenario, transcript):
        self.s = scenario
        self.transcript = transcript
        self.round = 0
        self.parties = (0,) + scenario.workers + tuple(
            scenario.n + 1 + i for i in range(len(scenario.inputs)))

    def exchange(self, phase, outboxes):
        """outboxes: {sender: [(channel, recipient, payload), ...]}.

        Returns {party: [(sender, channel, payload), ...]} in delivery
        order. Also appends every send to the transcript.
        """
        sends = []
        for sender in sorted(outboxes):
            for channel, recipient, payload in outboxes[sender]:
                if channel == BCAST:
                    recipient = -1
                elif recipient not in self.parties:
                    raise ParameterViolation(f"unknown recipient {recipient}")
                sends.append(Envelope(self.round, sender, channel,
                                      recipient, phase, payload))
        sends.sort(key=lambda e: (e.sender, e.channel, e.recipient))
        inboxes = {party: [] for party in self.parties}
        for e in sends:
            self.transcript.envelopes.append(e)
            if e.channel == BCAST:
                for party in self.parties:
                    inboxes[party].append((e.sender, BCAST, e.payload))
            else:
                inboxes[e.recipient].append((e.sender, PRIV, e.payload))
        self.round += 1
        return inboxes


class Strategy:
    """Base adversary: follow the protocol (semi-honest)."""

    def __init__(self, party, rng, shared):
        self.party = party
        self.rng = rng
        self.shared = shared

    def act(self, ctx, outbox):
        return outbox


class SemiHonest(Strategy):
    pass


class Silent(Strategy):
    def act(self, ctx, outbox):
        return []


class RandomByzantine(Strategy):
    """Drops or perturbs messages while keeping them well-typed."""

    def _mutate(self, obj):
        p = self.shared["p"]
        if isinstance(obj, np.ndarray):
            if self.rng.random() < 0.5:
                return (obj + self.rng.integers(1, p, size=obj.shape)) % p
            return obj
        if isinstance(obj, tuple):
            return tuple(self._mutate(x) for x in obj)
        return obj

    def act(self, ctx, outbox):
        out = []
        for channel, recipient, payload in outbox:
            roll = self.rng.random()
            if roll < 0.2:
                continue
            if roll < 0.7:
                payload = self._mutate(payload)
            out.append((channel, recipient, payload))
        return out


class InconsistentEvssDealer(Strategy):
    """Deals mutually inconsistent polynomials, never answers complaints.

    Deal payloads are ("evd", iids, F, G) with F and G stacked over the
    instances the sender deals; rows for this party's instances are
    replaced with fresh uniform garbage, independently per recipient.
    """

    def act(self, ctx, outbox):
        if ctx["phase"].endswith(":deal"):
            p = self.shared["p"]
            out = []
            for channel, recipient, payload in outbox:
                if payload[0] == "evd":
                    tag, iids, fs, gs = payload
                    fs, gs = fs.copy(), gs.copy()
                    for k, iid in enumerate(iids):
                        if ctx["instances"][iid]["dealer"] == self.party:
                            fs[k] = self.rng.integers(0, p, size=fs[k].shape)
                            gs[k] = self.rng.integers(0, p, size=gs[k].shape)
                    payload = (tag, iids, fs, gs)
                out.append((channel, recipient, payload))
            return out
        if ctx["phase"].endswith(":resolve"):
            return []
        return outbox


class _DealOffsetStrategy(Strategy):
    """Shared machinery: consistently deal a shifted polynomial.

    Adds c * x^e to the dealt bivariate along the share variable, i.e.
    recipient j's pair becomes f_j(0) += c * alpha_j^e, g_j coefficient
    e += c, and the dealer's own adopted pair is shifted the same way,
    so nobody complains and the sharing encodes the wrong polynomial.
    """

    def _wants(self, meta):
        raise NotImplementedError

    def _exp(self, meta):
        raise NotImplementedError

    def act(self, ctx, outbox):
        if not ctx["phase"].endswith(":deal"):
            return outbox
        p = self.shared["p"]
        offsets = {}
        exps = {}
        for iid, meta in ctx["instances"].items():
            if meta["dealer"] == self.party and self._wants(meta):
                key = ("offset", iid)
                if key not in self.shared:
                    self.shared[key] = int(self.rng.integers(1, p))
                offsets[iid] = self.shared[key]
                exps[iid] = self._exp(meta)
        if not offsets:
            return outbox
        out = []
        for channel, recipient, payload in outbox:
            if payload[0] == "evd" and channel == PRIV:
                tag, iids, fs, gs = payload
                fs, gs = fs.copy(), gs.copy()
                for k, iid in enumerate(iids):
                    if iid in offsets:
                        c, e = offsets[iid], exps[iid]
                        fs[k, 0] = (fs[k, 0] + c * pow(recipient, e, p)) % p
                        gs[k, e] = (gs[k, e] + c) % p
                payload = (tag, iids, fs, gs)
            out.append((channel, recipient, payload))
        # keep own adopted polynomials consistent with the mutation
        own = ctx["own_state"]
        for iid, c in offsets.items():
            if iid not in own:
                continue
            e = exps[iid]
            fc, gc = own[iid]
            fc, gc = fc.copy(), gc.copy()
            fc[0] = (fc[0] + c * pow(self.party, e, p)) % p
            gc[e] = (gc[e] + c) % p
            own[iid] = (fc, gc)
        return out


class WrongSubshareConstant(_DealOffsetStrategy):
    """Subshares F(alpha_n) + c instead of F(alpha_n)."""

    def _wants(self, meta):
        return meta.get("kind") == "subshare"

    def _exp(self, meta):
        return 0


class BadGapCoefficient(_DealOffsetStrategy):
    """Puts a nonzero value into the first gap slot; honest when the
    instance labels carry no gap."""

    def _wants(self, meta):
        return meta.get("kind") == "subshare" and meta["label"].delta >= 1

    def _exp(self, meta):
        return meta["label"].m


class CorruptProductPoly(_DealOffsetStrategy):
    """Deals a consistent sharing of a wrong product polynomial."""

    def _wants(self, meta):
        return meta.get("kind") == "cdeal"

    def _exp(self, meta):
        lab = meta["label"]
        key = ("cexp", meta["dealer"])
        if key not in self.shared:
            self.shared[key] = int(self.rng.integers(0, lab.degree + 1))
        return self.shared[key]


class FalseComplainer(Strategy):
    """Honest everywhere except the product point checks, where it
    accuses an honest origin."""

    def act(self, ctx, outbox):
        if ctx["phase"].endswith("mul:check"):
            victims = ctx.get("check_victims", ())
            extra = [(BCAST, -1, ("mulcomplaint", v)) for v in victims]
            kept = [s for s in outbox if s[2][0] != "mulcomplaint"]
            return kept + extra
        return outbox


_STRATEGY_CLASSES = {
    "SemiHonest": SemiHonest,
    "InconsistentEvssDealer": InconsistentEvssDealer,
    "WrongSubshareConstant": WrongSubshareConstant,
    "BadGapCoefficient": BadGapCoefficient,
    "CorruptProductPoly": CorruptProductPoly,
    "FalseComplainer": FalseComplainer,
    "RandomByzantine": RandomByzantine,
    "Silent": Silent,
}


class AdversaryController:
    """Owns strategy instances and their shared (colluding) state."""

    def __init__(self, scenario):
        self.shared = {"p": scenario.p, "views": {}}
        self.strategies = {}
        for party, name in scenario.adversaries:
            rng = rng_for(scenario.seed, party, f"adversary:{name}")
            self.strategies[party] = _STRATEGY_CLASSES[name](
                party, rng, self.shared)

    def filter(self, ctx, outboxes):
        for party, strat in self.strategies.items():
            if party in outboxes:
                ctx = dict(ctx)
                ctx["own_state"] = ctx.get("states", {}).get(party, {})
                outboxes[party] = strat.act(ctx, outboxes[party])
        return outboxes

    def observe(self, phase, inboxes):
        # colluders pool everything they receive
        for party in self.strategies:
            if party in inboxes and inboxes[party]:
                self.shared["views"].setdefault(phase, {})[party] = \
                    inboxes[party]


def adversary_act(strategy, ctx, outbox):
    """Single-strategy hook, mainly for tests."""
    return strategy.act(ctx, outbox)


def run_scenario(scenario):
    """Execute the scenario's program end to end; returns a Transcript."""
    from . import mpc
    return mpc.execute(scenario.validate())
