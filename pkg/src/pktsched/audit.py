"""Replay of the charging arguments on concrete runs.

Each packet of the (canonical) optimum is charged to slots of the online
schedule by a first-match rule list. The verifiers then check that charge is
conserved and that every slot, or designated pair of slots, receives at most
``bound`` times the weight the algorithm sent there.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .algorithms import PHI2, LcConstants, Trace, lc_constants
from .core import PHI
from .offline import OptResult, earliest_deadline_violations

TOGGLEH_RULES = ("special-up", "special-back", "full-up", "regular-up", "regular-back")
LCALPHA_RULES = ("full-back", "full-up", "close-split", "distant-split", "chain-single-up",
                 "chain-single-fwd", "chain-begin", "chain-end", "chain-fwd", "chain-link")
SPLIT_RULES = ("close-split", "distant-split")
REL_TOL = 1e-9


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class ChargeEntry:
    from_opt_slot: int
    to_alg_slot: int
    amount: float
    rule: str
    pair: Optional[tuple] = None


@dataclass
class ChargeLedger:
    scheme: str
    entries: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    opt_packets: dict = field(default_factory=dict)   # slot -> (id, weight)
    alg_packets: dict = field(default_factory=dict)   # slot -> (id or None, weight)
    chaining: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)

    def add(self, src, dst, amount, rule, pair=None):
        self.entries.append(ChargeEntry(src, dst, amount, rule, pair))

    def totals(self) -> dict:
        acc = defaultdict(list)
        for e in self.entries:
            acc[e.to_alg_slot].append(e.amount)
        return {t: math.fsum(v) for t, v in acc.items()}

    def outgoing(self) -> dict:
        acc = defaultdict(list)
        for e in self.entries:
            acc[e.from_opt_slot].append(e.amount)
        return {t: math.fsum(v) for t, v in acc.items()}

    def conservation_residual(self) -> float:
        out = self.outgoing()
        worst = 0.0
        for t, (_, w) in self.opt_packets.items():
            worst = max(worst, abs(out.get(t, 0.0) - w) / max(w, 1e-300))
        return worst

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "entries": [
                {"from": e.from_opt_slot, "to": e.to_alg_slot, "amount": e.amount, "rule": e.rule,
                 **({"pair": list(e.pair)} if e.pair else {})}
                for e in self.entries
            ],
            "pairs": [list(p) for p in self.pairs],
            "chaining": list(self.chaining),
        }


@dataclass
class AuditReport:
    bound: float
    slot_totals: dict
    pair_totals: list
    conservation_residual: float
    passed: bool
    witness: Optional[int] = None
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "verdict": "pass" if self.passed else "fail",
            "witness": self.witness,
            "failures": self.failures,
            "conservation_residual": self.conservation_residual,
            "slot_totals": {str(t): v for t, v in sorted(self.slot_totals.items())},
            "pair_totals": [{"slots": list(p), "charge": c, "limit": lim} for p, c, lim in self.pair_totals],
        }


def _within(charge: float, limit: float) -> bool:
    return charge <= limit + REL_TOL * max(1.0, abs(limit))


def _snapshots(trace: Trace, opt: OptResult):
    inst = trace.instance.by_id
    opt_packets = {t: (pid, inst[pid].weight) for t, pid in opt.schedule.assignments.items()}
    alg_packets = {r.slot: (r.packet_id, r.weight if r.packet_id is not None else 0.0) for r in trace.records}
    return opt_packets, alg_packets


# ---------------------------------------------------------------------------
# ToggleH


def toggleh_charges(trace: Trace, opt: OptResult) -> ChargeLedger:
    if not opt.canonical:
        raise AuditError("the optimum must be canonical")
    for r in trace.records:
        if r.kind not in ("f", "e") or "h_weight" not in r.detail:
            raise AuditError(f"slot {r.slot}: trace lacks ToggleH snapshots")
    opt_packets, alg_packets = _snapshots(trace, opt)
    ledger = ChargeLedger("toggleh", opt_packets=opt_packets, alg_packets=alg_packets)
    alg_slot = {pid: t for t, (pid, _) in alg_packets.items() if pid is not None}
    for t, (j, wj) in sorted(opt_packets.items()):
        rec = trace.record_at(t)
        if rec is None:
            ledger.anomalies.append(f"slot {t}: optimum sends packet {j} outside the traced range")
            continue
        h_id = rec.detail["roles"]["h"]
        wh = rec.detail["h_weight"]
        if rec.kind == "e" and j == h_id:
            ledger.add(t, t, wh / PHI, "special-up")
            ledger.add(t, t - 1, wh / PHI2, "special-back")
        elif j in rec.pending:
            ledger.add(t, t, wj, "full-up")
        else:
            u = alg_slot.get(j)
            if u is None or u >= t:
                ledger.anomalies.append(f"slot {t}: packet {j} neither pending nor sent earlier")
                continue
            ledger.add(t, t, wh / PHI2, "regular-up")
            ledger.add(t, u, wj - wh / PHI2, "regular-back")
    return ledger


def verify_toggleh(ledger: ChargeLedger, trace: Trace) -> AuditReport:
    """Left-to-right scan: a slot passes alone, or together with the next slot."""
    totals = ledger.totals()
    failures = list(ledger.anomalies)
    residual = ledger.conservation_residual()
    if residual >= REL_TOL:
        failures.append(f"conservation residual {residual:.3g}")
    failures.extend(_exclusivity(ledger, ({"special-up", "special-back"}, {"full-up"},
                                          {"regular-up", "regular-back"})))

    by_slot = defaultdict(list)
    for e in ledger.entries:
        by_slot[e.to_alg_slot].append(e)
    for r in trace.records:
        got = by_slot.get(r.slot, [])
        if r.kind == "f" and any(e.rule == "regular-back" for e in got):
            up = math.fsum(e.amount for e in got if e.from_opt_slot == r.slot)
            if not up < r.detail["h_weight"] / PHI:
                failures.append(f"slot {r.slot}: f-step with a regular back charge has up charge {up}")

    slots = sorted(set(totals) | set(ledger.alg_packets))
    weight = {t: ledger.alg_packets.get(t, (None, 0.0))[1] for t in slots}
    pairs, pair_totals = [], []
    witness = None
    consumed = set()
    for t in slots:
        if t in consumed:
            continue
        c = totals.get(t, 0.0)
        if _within(c, PHI * weight[t]):
            continue
        both = c + totals.get(t + 1, 0.0)
        limit = PHI * (weight[t] + weight.get(t + 1, 0.0))
        if t + 1 not in consumed and _within(both, limit):
            consumed.add(t + 1)
            pairs.append((t, t + 1))
            pair_totals.append(((t, t + 1), both, limit))
            continue
        failures.append(f"slot {t}: charge {c} exceeds phi * {weight[t]} even paired with slot {t + 1}")
        if witness is None:
            witness = t
    ledger.pairs = pairs
    if failures and witness is None:
        witness = _first_slot(failures)
    return AuditReport(PHI, totals, pair_totals, residual, not failures, witness, failures)


# ---------------------------------------------------------------------------
# CompareWithBias


def lcalpha_charges(trace: Trace, opt: OptResult, consts: Optional[LcConstants] = None) -> ChargeLedger:
    consts = consts or lc_constants()
    if not opt.canonical:
        raise AuditError("the optimum must be canonical")
    for r in trace.records:
        if "plan_weights" not in r.detail:
            raise AuditError(f"slot {r.slot}: trace lacks plan snapshots")
    alpha, delta, R = consts.alpha, consts.delta, consts.ratio
    opt_packets, alg_packets = _snapshots(trace, opt)
    ledger = ChargeLedger("lcalpha", opt_packets=opt_packets, alg_packets=alg_packets)
    alg_slot = {pid: t for t, (pid, _) in alg_packets.items() if pid is not None}
    opt_slot = {pid: t for t, (pid, _) in opt_packets.items()}

    def alg_w(t):
        return alg_packets.get(t, (None, 0.0))[1]

    chaining = {}
    for t, (j, wj) in sorted(opt_packets.items()):
        rec = trace.record_at(t)
        if rec is None:
            ledger.anomalies.append(f"slot {t}: optimum sends packet {j} outside the traced range")
            continue
        f, wf = alg_packets[t]
        g = alg_packets.get(t + 1, (None, 0.0))[0]
        wg = alg_w(t + 1)
        if alg_slot.get(j) == t - 1:
            ledger.add(t, t - 1, wj, "full-back")
        elif wf >= wj and (f is None or opt_slot.get(f) != t + 1):
            ledger.add(t, t, wj, "full-up")
        elif wf > wj:
            g_full_back = g is not None and opt_slot.get(g) == t + 2
            p1 = rec.detail["plan_weights"][0] or 0.0
            if 2 * alpha * wj < wf + wg or (not g_full_back and 2 * alpha * (p1 - wg) < wf + wg):
                ledger.add(t, t, wj, "close-split", (t, t + 1))
                ledger.pairs.append((t, t + 1))
            else:
                ledger.add(t, t, wj, "distant-split", (t, t + 2))
                ledger.pairs.append((t, t + 2))
        elif wf < wj and j in rec.pending:
            chaining[t] = (wj, wf)
        else:
            ledger.anomalies.append(f"slot {t}: packet {j} fits no charging rule")

    ledger.chaining = sorted(chaining)
    for chain in _runs(ledger.chaining):
        last = len(chain) - 1
        for pos, t in enumerate(chain):
            wj, wf = chaining[t]
            if last == 0:
                ledger.add(t, t, min(wj, R * wf), "chain-single-up")
                if wj > R * wf:
                    ledger.add(t, t + 1, wj - R * wf, "chain-single-fwd")
            elif pos == 0:
                ledger.add(t, t, 2 * delta * wj, "chain-begin")
                ledger.add(t, t + 1, (1 - 2 * delta) * wj, "chain-begin")
            elif pos == last:
                ledger.add(t, t - 1, delta * wj, "chain-end")
                ledger.add(t, t, (R - 1 + 2 * delta) * wf, "chain-end")
                ledger.add(t, t + 1, (1 - delta) * wj - (R - 1 + 2 * delta) * wf, "chain-fwd")
            else:
                ledger.add(t, t - 1, delta * wj, "chain-link")
                ledger.add(t, t, delta * wj, "chain-link")
                ledger.add(t, t + 1, (1 - 2 * delta) * wj, "chain-link")
    return ledger


def verify_lcalpha(ledger: ChargeLedger, trace: Trace, consts: Optional[LcConstants] = None) -> AuditReport:
    consts = consts or lc_constants()
    R = consts.ratio
    totals = ledger.totals()
    failures = list(ledger.anomalies)
    residual = ledger.conservation_residual()
    if residual >= REL_TOL:
        failures.append(f"conservation residual {residual:.3g}")
    failures.extend(_exclusivity(ledger, ({"full-back"}, {"full-up"}, {"close-split"}, {"distant-split"},
                                          {"chain-single-up", "chain-single-fwd"}, {"chain-begin"},
                                          {"chain-end", "chain-fwd"}, {"chain-link"})))

    def weight(t):
        return ledger.alg_packets.get(t, (None, 0.0))[1]

    in_pair = {}
    for p in ledger.pairs:
        for t in p:
            if t in in_pair:
                failures.append(f"slot {t}: in split-charge pairs {in_pair[t]} and {p}")
            in_pair.setdefault(t, p)

    full = defaultdict(int)
    for e in ledger.entries:
        if e.rule in ("full-back", "full-up"):
            full[e.to_alg_slot] += 1
    failures.extend(f"slot {t}: {n} full charges" for t, n in sorted(full.items()) if n > 1)

    for t in ledger.chaining:
        if full.get(t) or t in in_pair:
            failures.append(f"slot {t}: chaining step receives a full or split charge")

    for e in ledger.entries:
        if e.rule in SPLIT_RULES:
            t = e.from_opt_slot
            f = ledger.alg_packets.get(t, (None, 0.0))[0]
            if f is None or ledger.opt_packets.get(t + 1, (None,))[0] != f:
                failures.append(f"slot {t}: split charge but the optimum does not send f at {t + 1}")

    chain_set = set(ledger.chaining)
    for t in ledger.chaining:
        if t + 1 in chain_set and ledger.alg_packets.get(t + 1, (None,))[0] != ledger.opt_packets[t][0]:
            failures.append(f"slot {t}: consecutive chaining steps but the algorithm does not send j at {t + 1}")

    witness = None
    pair_totals = []
    for p in ledger.pairs:
        charge = math.fsum(totals.get(t, 0.0) for t in p)
        limit = R * math.fsum(weight(t) for t in p)
        pair_totals.append((p, charge, limit))
        if not _within(charge, limit):
            failures.append(f"pair {p}: charge {charge} exceeds R * weight = {limit}")
            witness = p[0] if witness is None else witness
    for t in sorted(set(totals) | set(ledger.alg_packets)):
        if t in in_pair:
            continue
        c = totals.get(t, 0.0)
        if not _within(c, R * weight(t)):
            failures.append(f"slot {t}: charge {c} exceeds R * {weight(t)}")
            witness = t if witness is None else min(witness, t)
    if failures and witness is None:
        witness = _first_slot(failures)
    return AuditReport(R, totals, pair_totals, residual, not failures, witness, failures)


# ---------------------------------------------------------------------------


def _runs(slots):
    run = []
    for t in slots:
        if run and t != run[-1] + 1:
            yield run
            run = []
        run.append(t)
    if run:
        yield run


def _exclusivity(ledger, families):
    rules = defaultdict(set)
    for e in ledger.entries:
        rules[e.from_opt_slot].add(e.rule)
    bad = []
    for t, used in sorted(rules.items()):
        if not any(used <= fam for fam in families):
            bad.append(f"slot {t}: packet charged by several rules {sorted(used)}")
    return bad


def _first_slot(failures):
    for msg in failures:
        m = re.search(r"slot (-?\d+)", msg)
        if m:
            return int(m.group(1))
    return None


def audit_run(trace: Trace, opt: OptResult, consts: Optional[LcConstants] = None) -> AuditReport:
    """Build and verify the ledger matching the policy that produced ``trace``."""
    if earliest_deadline_violations(trace.instance, opt.schedule):
        raise AuditError("optimum lacks the earliest-deadline property")
    if trace.policy == "toggleh":
        return verify_toggleh(toggleh_charges(trace, opt), trace)
    if trace.policy == "lcalpha":
        ledger = lcalpha_charges(trace, opt, consts)
        return verify_lcalpha(ledger, trace, consts)
    raise AuditError(f"no charging scheme for policy {trace.policy!r}")
