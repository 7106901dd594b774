"""Programs over block-shared matrices with verified multiplication.

A secret enters the pool split into m column blocks: block j rides
coefficient j of the share polynomial (flipped order for reverse
sharings) and t uniform masks sit above the data. Multiplication pairs
a direct left operand with a reverse right operand, because
coefficient m-1 of the pointwise product of their share polynomials is
the full matrix product. Each worker re-shares its two points with
calibrated interior gaps, multiplies the re-sharing polynomials, and
subtracts masked powers so that its published product polynomial keeps
degree m+t-1 while its low coefficients carry exactly the column
blocks of the local product. One public coefficient-extraction
combination then turns the workers' product polynomials into a fresh
direct sharing of the product.

Under active corruption every re-sharing runs through the verified
subshare phases (constant syndrome plus gap parity), the mask and
product polynomials are dealt through the consistency layer, and each
worker checks the product relation at its own point. Complaints are
resolved by publicly evaluating everything the accused dealt at the
complainer's point: a relation that fails publicly eliminates the
dealer, a false accusation costs the accused nothing. Extraction
weights are recomputed over the survivors, so at least 2m+2t-1 of the
product polynomials must remain usable.

Direction swaps and transposition re-share each point under one leg
per output position (gap m-1-j for position j) and recombine the legs
with extraction weights; with m = 1 both are local share rewrites.
"""

from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .errors import (DegreeMismatch, ParameterViolation, ProtocolAbort,
                     TooFewSurvivors)
from .evss import BatchInstance, evss_deal, evss_deal_poly, run_evss_batch
from .gf import FMatrix, mat_mul
from .net import (BCAST, PRIV, AdversaryController, Network, Transcript,
                  rng_for)
from .poly import MatPoly, coeff_extraction_combo, interpolate
from .sharing import (DIRECT, REVERSE, Share, ShareLabel, make_share_poly,
                      robust_reconstruct)
from .subroutines import (BAD_PRODUCT, EVSS_REJECTED, ActiveSet,
                          _record_eliminations, eval_shared_poly,
                          subshare_of_shares, verify_gap_form)


def recovery_threshold(m, t):
    """Smallest worker count that tolerates t cheaters at block count m."""
    if m < 1 or t < 0:
        raise ParameterViolation(f"bad parameters m={m}, t={t}")
    return 3 * t + 2 * m - 1


class MaskSet(NamedTuple):
    o_polys: tuple      # m+t-1 polynomials of degree at most t


class SharedMatrix(NamedTuple):
    """A value the pool holds jointly: party -> share polynomial point."""
    label: ShareLabel
    shares: dict        # party -> (z, z/m) int64 ndarray
    z: int


class ProgramOp(NamedTuple):
    kind: str           # share | mul | add | transpose | d2r | r2d | reveal
    args: tuple = ()
    dest: str = ""


def _held(sv, party):
    v = sv.shares.get(party)
    if v is None:
        return np.zeros((sv.z, sv.z // sv.label.m), dtype=np.int64)
    return v


def build_masks(a_n, b_n, m, t, rng):
    """Masks O_0..O_{m+t-2} cancelling the high product coefficients.

    Each mask has degree at most t with uniform lower coefficients.
    Subtracting x^(m+l) O_l from a_n * b_n^T removes every coefficient
    above m+t-1 without touching coefficients 0..m-1: the top mask
    coefficients are fixed by a descending recursion where each one
    absorbs the product coefficient at its power minus whatever the
    masks above it already inject there.
    """
    p = a_n.p
    dmax = m + t - 1
    if a_n.degree > dmax or b_n.degree > dmax:
        raise DegreeMismatch(
            f"operand degrees {a_n.degree}, {b_n.degree} exceed {dmax}")
    prod = a_n.mul(b_n.transpose_coeffs())
    shape = prod.shape
    d = np.zeros((2 * dmax + 1,) + shape, dtype=np.int64)
    d[:prod.c.shape[0]] = prod.c
    count = m + t - 1
    o = np.zeros((count, t + 1) + shape, dtype=np.int64)
    for l in range(count):
        for q in range(t):
            o[l, q] = rng.integers(0, p, size=shape)
    for e in range(2 * dmax, dmax, -1):
        lead = e - m - t
        acc = d[e].copy()
        for l in range(lead + 1, min(count - 1, e - m) + 1):
            acc = (acc - o[l, e - m - l]) % p
        o[lead, t] = acc
    return MaskSet(tuple(MatPoly(o[l], p) for l in range(count)))


def masked_product(a_n, b_n, masks, m):
    """C_n = a_n * b_n^T - sum_l x^(m+l) O_l."""
    out = a_n.mul(b_n.transpose_coeffs())
    for l, o in enumerate(masks.o_polys):
        out = out - o.shift(m + l)
    return out


def multiply_semi_honest(a, b, m, t, n, rng=None):
    """One multiplication under passive corruption, simulated locally.

    Shares a directly and b in reverse, builds every worker's masked
    product polynomial, and recombines with the coefficient-(m-1)
    extraction weights. Returns {worker: Share} carrying a direct
    (m, t) sharing of a * b^T; needs n >= 2m+2t-1 workers and m | z.
    """
    p = a.p
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ParameterViolation("operands must be square and equal-sized")
    z = a.shape[0]
    if m < 1 or z % m:
        raise ParameterViolation("m must divide the matrix dimension")
    if n < 2 * m + 2 * t - 1:
        raise ParameterViolation(f"{n} workers below {2 * m + 2 * t - 1}")
    if rng is None:
        rng = np.random.default_rng(0)
    w = z // m
    points = list(range(1, n + 1))
    va = make_share_poly(a, ShareLabel(m, t, 0, DIRECT), rng).eval_many(points)
    vb = make_share_poly(b, ShareLabel(m, t, 0, REVERSE), rng).eval_many(points)
    cpolys = []
    for ix in range(n):
        qa = make_share_poly(FMatrix(va[ix], p), ShareLabel(1, t, m - 1), rng)
        qb = MatPoly.zero(w, w, p)
        for j in range(m):
            piece = FMatrix(vb[ix][j * w:(j + 1) * w], p)
            qb = qb + make_share_poly(
                piece, ShareLabel(1, t, m - 1 - j), rng).shift(j)
        cpolys.append(masked_product(qa, qb, build_masks(qa, qb, m, t, rng), m))
    lam = coeff_extraction_combo(points, 2 * m + 2 * t - 2, m - 1, p)
    out_label = ShareLabel(m, t, 0, DIRECT)
    out = {}
    for j in points:
        acc = np.zeros((z, w), dtype=np.int64)
        for ix in range(n):
            acc = (acc + lam[ix] * cpolys[ix].eval_raw(j)) % p
        out[j] = Share(out_label, j, j, FMatrix(acc, p))
    return out


def _padded(values_by_party, roster, zero):
    """Shares over the roster with missing or discarded entries zeroed."""
    return {i: zero if values_by_party.get(i) is None else values_by_party[i]
            for i in roster}


def _points_poly(bundle, honest, p):
    """The polynomial a dealer actually re-shared, fitted through the
    first degree+1 honest holders (consistent once the deal was
    accepted, so any such subset gives the same answer)."""
    need = bundle.degree_claim + 1
    pts = [i for i in honest if i in bundle.values][:need]
    return interpolate(pts, [bundle.values[i] for i in pts], p)


def _leg_families(network, adv, scenario, prefix, active, m, value_at):
    """m verified re-sharing families; family j re-shares
    value_at(j, party) with interior gap m-1-j."""
    dmax = m + scenario.t - 1
    out = []
    for j in range(m):
        vals = {i: value_at(j, i) for i in active.active}
        bnd, active = subshare_of_shares(
            network, adv, scenario, f"{prefix}{j}", active, vals, dmax, m - j)
        if m - j >= 2:
            active = verify_gap_form(
                network, adv, scenario, f"{prefix}{j}v", active, bnd)
        out.append(bnd)
    return out, active


def multiply_malicious(network, adv, scenario, prefix, active, sa, sb):
    """Verified multiplication; returns (SharedMatrix, active).

    sa must be a zero-gap direct and sb a zero-gap reverse sharing
    under one (m, t). Worker points are re-shared and verified (left
    value with gap m-1, right row piece j with gap m-1-j), every
    worker deals its masks and masked product polynomial through the
    consistency layer, and the product relation is checked at every
    point. The complaint broadcast runs in phase <prefix>:check and
    adversary strategies key on the "mul:check" suffix, so callers
    pass a prefix ending in "mul". Complaints are settled by public
    evaluation at the complainer's point; dealers confirmed by fewer
    than 2m+2t-1 live workers are dropped, and fewer than 2m+2t-1
    usable dealers raises TooFewSurvivors.
    """
    s, p = scenario, scenario.p
    lab = sa.label
    m, t = lab.m, lab.t
    if lab.dir != DIRECT or sb.label.dir != REVERSE:
        raise ParameterViolation("multiply needs a direct lhs and a reverse rhs")
    if (sb.label.m, sb.label.t) != (m, t) or lab.delta or sb.label.delta:
        raise ParameterViolation("operand labels disagree")
    if sa.z != sb.z:
        raise ParameterViolation("operand sizes disagree")
    z = sa.z
    w = z // m
    dmax = m + t - 1
    floor = 2 * m + 2 * t - 1
    zero_zw = np.zeros((z, w), dtype=np.int64)
    zero_ww = np.zeros((w, w), dtype=np.int64)

    a_vals = {i: _held(sa, i) for i in active.active}
    a_bundles, active = subshare_of_shares(
        network, adv, s, f"{prefix}:a", active, a_vals, dmax, m)
    active = verify_gap_form(network, adv, s, f"{prefix}:av", active, a_bundles)

    b_bundles, active = _leg_families(
        network, adv, s, f"{prefix}:b", active, m,
        lambda j, i: _held(sb, i)[j * w:(j + 1) * w])

    # what each surviving dealer actually re-shared, and the masks and
    # product polynomial it derives from that locally
    honest = [i for i in active.active if i not in adv.strategies]
    dealers = list(active.active)
    qa = {n: _points_poly(a_bundles[n], honest, p) for n in dealers}
    qb = {}
    for n in dealers:
        poly = MatPoly.zero(w, w, p)
        for j in range(m):
            poly = poly + _points_poly(b_bundles[j][n], honest, p).shift(j)
        qb[n] = poly
    masksets = {n: build_masks(qa[n], qb[n], m, t,
                               rng_for(s.seed, n, f"{prefix}:mask"))
                for n in dealers}
    cpoly = {n: masked_product(qa[n], qb[n], masksets[n], m) for n in dealers}

    # mask deals; at t = 0 the masks are identically zero, skip them
    o_count = m + t - 1 if t else 0
    o_shares = {}
    if o_count:
        olab = ShareLabel(1, t, 0)
        tags = [(n, l) for n in dealers for l in range(o_count)]
        instances = [
            BatchInstance(f"o{n:03d}x{l:02d}", n, olab,
                          evss_deal_poly(masksets[n].o_polys[l], olab,
                                         rng_for(s.seed, n,
                                                 f"{prefix}:o{l:02d}")))
            for n, l in tags]
        outcomes = run_evss_batch(network, adv, s, f"{prefix}:o", instances,
                                  kinds={b.iid: "odeal" for b in instances})
        before = set(active.eliminated)
        for (n, l), b in zip(tags, instances):
            res = outcomes[b.iid]
            if res.accepted:
                o_shares[(n, l)] = res.shares
            else:
                active.eliminate(n, EVSS_REJECTED)
        _record_eliminations(network, f"{prefix}:o", before, active)
        dealers = [n for n in dealers if n in active.active]

    clab = ShareLabel(m, t, 0, DIRECT)
    instances = [
        BatchInstance(f"c{n:03d}", n, clab,
                      evss_deal_poly(cpoly[n], clab,
                                     rng_for(s.seed, n, f"{prefix}:c")))
        for n in dealers]
    outcomes = run_evss_batch(network, adv, s, f"{prefix}:c", instances,
                              kinds={b.iid: "cdeal" for b in instances})
    before = set(active.eliminated)
    c_shares = {}
    for n, b in zip(dealers, instances):
        res = outcomes[b.iid]
        if res.accepted:
            c_shares[n] = res.shares
        else:
            active.eliminate(n, EVSS_REJECTED)
    _record_eliminations(network, f"{prefix}:c", before, active)
    dealers = [n for n in dealers if n in active.active]

    def relation_at(j, point_values):
        av, pieces, ovals, cv = point_values
        bv = zero_ww
        for k in range(m):
            bv = (bv + pow(j, k, p) * pieces[k]) % p
        rhs = mat_mul(av, bv.T, p)
        for l, ov in enumerate(ovals):
            rhs = (rhs - pow(j, m + l, p) * ov) % p
        return bool(np.array_equal(cv, rhs % p))

    def held_values(j, n):
        av = a_bundles[n].values.get(j, zero_zw)
        pieces = [b_bundles[k][n].values.get(j, zero_ww) for k in range(m)]
        ovals = [o_shares.get((n, l), {}).get(j) for l in range(o_count)]
        ovals = [zero_zw if v is None else v for v in ovals]
        cv = c_shares[n].get(j)
        return av, pieces, ovals, zero_zw if cv is None else cv

    outboxes = {}
    for j in active.active:
        items = []
        for n in dealers:
            if not relation_at(j, held_values(j, n)):
                items.append((BCAST, -1, ("mulcomplaint", n)))
        outboxes[j] = items
    victims = tuple(i for i in active.active if i not in adv.strategies)[:1]
    check_phase = f"{prefix}:check"
    outboxes = adv.filter({"phase": check_phase, "check_victims": victims},
                          outboxes)
    inboxes = network.exchange(check_phase, outboxes)
    complaints = set()
    for sender, channel, payload in inboxes[0]:
        if (channel == BCAST and isinstance(payload, tuple)
                and len(payload) == 2 and payload[0] == "mulcomplaint"
                and sender in active.active):
            try:
                accused = int(payload[1])
            except (TypeError, ValueError):
                continue
            if accused in dealers:
                complaints.add((sender, accused))

    # public settlement: evaluate everything the accused dealt at the
    # complainer's point and re-run the relation in the open
    by_accused = {}
    for complainer, accused in sorted(complaints):
        by_accused.setdefault(accused, []).append(complainer)
    rx = 0
    for accused in sorted(by_accused):
        for j in by_accused[accused]:
            if accused not in active.active:
                break
            tag = f"{prefix}:res{rx:02d}"
            rx += 1
            live = active.active
            av = eval_shared_poly(
                network, adv, s, f"{tag}a", active,
                _padded(a_bundles[accused].values, live, zero_zw), dmax, j)
            pieces = [
                eval_shared_poly(
                    network, adv, s, f"{tag}b{k}", active,
                    _padded(b_bundles[k][accused].values, live, zero_ww),
                    dmax - k, j)
                for k in range(m)]
            ovals = [
                eval_shared_poly(
                    network, adv, s, f"{tag}o{l:02d}", active,
                    _padded(o_shares[(accused, l)], live, zero_zw), t, j)
                for l in range(o_count)]
            cv = eval_shared_poly(
                network, adv, s, f"{tag}c", active,
                _padded(c_shares[accused], live, zero_zw), dmax, j)
            if not relation_at(j, (av, pieces, ovals, cv)):
                before = set(active.eliminated)
                active.eliminate(accused, BAD_PRODUCT)
                _record_eliminations(network, f"{prefix}:res", before, active)

    contested = {n: {c for c, a in complaints if a == n} for n in dealers}
    confirmed = []
    for n in dealers:
        if n not in active.active:
            continue
        quiet = sum(1 for i in active.active if i not in contested[n])
        if quiet >= floor:
            confirmed.append(n)
    if len(confirmed) < floor:
        raise TooFewSurvivors(
            f"{len(confirmed)} usable product dealers below {floor}")
    lam = coeff_extraction_combo(confirmed, 2 * m + 2 * t - 2, m - 1, p)
    out = {}
    for j in active.active:
        acc = np.zeros((z, w), dtype=np.int64)
        for ix, n in enumerate(confirmed):
            cv = c_shares[n].get(j)
            if cv is not None:
                acc = (acc + lam[ix] * cv) % p
        out[j] = acc
    return SharedMatrix(clab, out, z), active


def _swap_direction(network, adv, scenario, prefix, active, sv, dfrom, dto):
    s, p = scenario, scenario.p
    lab = sv.label
    if lab.dir != dfrom or lab.delta:
        raise ParameterViolation(f"expected a zero-gap {dfrom} sharing")
    m, t = lab.m, lab.t
    out_label = ShareLabel(m, t, 0, dto)
    if m == 1:
        # one block: both orders read the same polynomial
        return SharedMatrix(out_label, dict(sv.shares), sv.z), active
    z, w = sv.z, sv.z // m
    bundles, active = _leg_families(
        network, adv, s, f"{prefix}:l", active, m, lambda j, i: _held(sv, i))
    live = active.active
    if len(live) < m + t:
        raise TooFewSurvivors(
            f"{len(live)} survivors cannot rebuild degree {m + t - 1}")
    lam = [coeff_extraction_combo(live, m + t - 1, k, p) for k in range(m)]
    out = {}
    for i in live:
        acc = np.zeros((z, w), dtype=np.int64)
        for j in range(m):
            g = np.zeros((z, w), dtype=np.int64)
            for nx, origin in enumerate(live):
                g = (g + lam[m - 1 - j][nx] * bundles[j][origin].values[i]) % p
            acc = (acc + pow(i, j, p) * g) % p
        out[i] = acc
    return SharedMatrix(out_label, out, sv.z), active


def direct_to_reverse(network, adv, scenario, prefix, active, sv):
    """Reverse sharing of the same secret. Position j of the output
    combines the legs extracting input coefficient m-1-j."""
    return _swap_direction(network, adv, scenario, prefix, active, sv,
                           DIRECT, REVERSE)


def reverse_to_direct(network, adv, scenario, prefix, active, sv):
    return _swap_direction(network, adv, scenario, prefix, active, sv,
                           REVERSE, DIRECT)


def transpose_shares(network, adv, scenario, prefix, active, sv):
    """Direct sharing of the transposed secret.

    Output block r stacks the transposed row pieces taken across the
    input blocks, so leg family i re-shares each worker's transposed
    row piece i and the output piece (r, i) extracts coefficient r
    from family i. With m = 1 transposing the share is enough.
    """
    s, p = scenario, scenario.p
    lab = sv.label
    if lab.dir != DIRECT or lab.delta:
        raise ParameterViolation("expected a zero-gap direct sharing")
    m, t = lab.m, lab.t
    if m == 1:
        out = {i: _held(sv, i).T.copy() for i in active.active}
        return SharedMatrix(lab, out, sv.z), active
    z, w = sv.z, sv.z // m
    bundles, active = _leg_families(
        network, adv, s, f"{prefix}:l", active, m,
        lambda j, i: _held(sv, i)[j * w:(j + 1) * w].T.copy())
    live = active.active
    if len(live) < m + t:
        raise TooFewSurvivors(
            f"{len(live)} survivors cannot rebuild degree {m + t - 1}")
    lam = [coeff_extraction_combo(live, m + t - 1, r, p) for r in range(m)]
    out = {}
    for i in live:
        rows = []
        for r in range(m):
            accr = np.zeros((w, w), dtype=np.int64)
            for fam in range(m):
                g = np.zeros((w, w), dtype=np.int64)
                for nx, origin in enumerate(live):
                    g = (g + lam[r][nx] * bundles[fam][origin].values[i]) % p
                accr = (accr + pow(i, fam, p) * g) % p
            rows.append(accr)
        out[i] = np.concatenate(rows, axis=0)
    return SharedMatrix(lab, out, sv.z), active


def add_shares(sa, sb, active, p):
    """Pointwise share addition; labels must match exactly."""
    if sa.label != sb.label or sa.z != sb.z:
        raise ParameterViolation("addition needs matching labels")
    out = {i: (_held(sa, i) + _held(sb, i)) % p for i in active.active}
    return SharedMatrix(sa.label, out, sa.z)


def _share_input(network, adv, scenario, prefix, active, src_ix, direction):
    s = scenario
    if not 0 <= src_ix < len(s.inputs):
        raise ParameterViolation(f"no input {src_ix}")
    lab = ShareLabel(s.m, s.t, 0, direction)
    source = s.n + 1 + src_ix
    deal = evss_deal(s.inputs[src_ix], lab,
                     rng_for(s.seed, source, f"{prefix}:deal"))
    out = run_evss_batch(network, adv, s, prefix,
                         [BatchInstance("inp", source, lab, deal)])["inp"]
    if not out.accepted:
        # sources are honest, so a rejection means the run is hopeless
        raise ProtocolAbort("InputRejected", f"source {source}")
    shares = {j: v for j, v in out.shares.items() if v is not None}
    return SharedMatrix(lab, shares, s.z), active


def _reveal(network, adv, scenario, prefix, active, sv, transcript):
    s, p = scenario, scenario.p
    lab = sv.label
    z, w = sv.z, sv.z // lab.m
    phase = f"{prefix}:send"
    outboxes = {j: [(PRIV, 0, ("out", _held(sv, j)))] for j in active.active}
    outboxes = adv.filter({"phase": phase}, outboxes)
    inboxes = network.exchange(phase, outboxes)
    recs = []
    seen = set()
    for sender, channel, payload in inboxes[0]:
        if (channel != PRIV or not isinstance(payload, tuple)
                or len(payload) != 2 or payload[0] != "out"):
            continue
        v = payload[1]
        if (sender in seen or sender not in active.active
                or not isinstance(v, np.ndarray) or v.shape != (z, w)
                or v.dtype != np.int64 or (v < 0).any() or (v >= p).any()):
            continue
        seen.add(sender)
        recs.append(Share(lab, sender, sender, FMatrix(v, p)))
    # withholding removes an error along with its point, so shrink the
    # budget to what the received count can actually correct
    t_eff = min(active.budget(s.t), max(0, (len(recs) - lab.threshold) // 2))
    secret, _ = robust_reconstruct(recs, lab, t_eff)
    transcript.master_output = secret
    return secret


def execute(scenario):
    """Run the scenario's program over a fresh network; returns the
    Transcript (master_output set by the last reveal op)."""
    s = scenario
    transcript = Transcript()
    network = Network(s, transcript)
    adv = AdversaryController(s)
    active = ActiveSet(s.workers)
    regs = {}

    def reg(name):
        if name not in regs:
            raise ParameterViolation(f"undefined register {name!r}")
        return regs[name]

    for ix, op in enumerate(s.program):
        if not isinstance(op, ProgramOp):
            op = ProgramOp(*op)
        if op.kind == "share":
            src_ix, direction = op.args
            regs[op.dest], active = _share_input(
                network, adv, s, f"r{ix}shr", active, src_ix, direction)
        elif op.kind == "mul":
            regs[op.dest], active = multiply_malicious(
                network, adv, s, f"r{ix}mul", active,
                reg(op.args[0]), reg(op.args[1]))
        elif op.kind == "add":
            regs[op.dest] = add_shares(reg(op.args[0]), reg(op.args[1]),
                                       active, s.p)
        elif op.kind == "transpose":
            regs[op.dest], active = transpose_shares(
                network, adv, s, f"r{ix}tr", active, reg(op.args[0]))
        elif op.kind == "d2r":
            regs[op.dest], active = direct_to_reverse(
                network, adv, s, f"r{ix}rev", active, reg(op.args[0]))
        elif op.kind == "r2d":
            regs[op.dest], active = reverse_to_direct(
                network, adv, s, f"r{ix}dir", active, reg(op.args[0]))
        elif op.kind == "reveal":
            _reveal(network, adv, s, f"r{ix}out", active, reg(op.args[0]),
                    transcript)
        else:
            raise ParameterViolation(f"unknown op kind {op.kind!r}")
    return transcript


def run_program(program, inputs, scenario):
    """Execute with the given program and inputs swapped into the
    scenario; returns the master's revealed matrix."""
    s = replace(scenario, program=tuple(program), inputs=tuple(inputs))
    return execute(s.validate()).master_output
