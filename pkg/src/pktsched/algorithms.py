"""Online execution engine and the scheduling policies.

A policy sees, at slot ``t``, the pending packets and (with 1-lookahead) the
packets released at ``t + 1``. It returns one pending packet to transmit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .core import PHI, Instance, Packet, Schedule, canonical_key, heavy_key
from .offline import edf_assignment, max_weight_feasible_set

PHI2 = PHI * PHI


class PolicyError(RuntimeError):
    pass


class NotTwoBounded(ValueError):
    pass


# ---------------------------------------------------------------------------
# constants for the lookahead algorithm


@dataclass(frozen=True)
class LcConstants:
    alpha: float
    delta: float
    ratio: float

    def equation_residuals(self) -> tuple:
        a, d, r = self.alpha, self.delta, self.ratio
        return (
            2 - d - (r + 2 * d - 1) / a - r,
            1 - 2 * d + 2 * a * d - r,
            1 + 1 / (2 * a) - r,
        )

    def properties(self) -> dict:
        a, d, r = self.alpha, self.delta, self.ratio
        return {
            "2-R-3delta": 2 - r - 3 * d,
            "2-R-2delta": 2 - r - 2 * d,
            "1-delta-(R-1+2delta)/(2alpha)": 1 - d - (r - 1 + 2 * d) / (2 * a),
            "1-R/(2alpha)": 1 - r / (2 * a),
            "R-3alpha*delta": r - 3 * a * d,
            "R-(2-R/alpha)": r - (2 - r / a),
        }

    def check(self, tol: float = 1e-12) -> None:
        res = self.equation_residuals()
        if any(abs(x) >= tol for x in res):
            raise ValueError(f"constants violate defining equations: {res}")
        props = self.properties()
        if abs(props["2-R-3delta"]) >= tol:
            raise ValueError("2 - R - 3 delta must vanish")
        bad = [k for k, v in props.items() if k != "2-R-3delta" and not v > 0]
        if bad:
            raise ValueError(f"strict inequalities fail: {bad}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "delta": self.delta, "ratio": self.ratio}


def lc_constants() -> LcConstants:
    root13 = math.sqrt(13)
    consts = LcConstants(alpha=(root13 + 3) / 4, delta=(5 - root13) / 6, ratio=(root13 - 1) / 2)
    consts.check()
    return consts


# ---------------------------------------------------------------------------
# trace records


@dataclass
class StepRecord:
    slot: int
    packet: Optional[Packet]
    kind: str = ""
    pending: tuple = ()
    lookahead: tuple = ()
    detail: dict = field(default_factory=dict)

    @property
    def packet_id(self) -> Optional[int]:
        if self.packet is None or self.packet.synthetic:
            return None
        return self.packet.id

    @property
    def weight(self) -> float:
        return 0.0 if self.packet is None else self.packet.weight

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "packet": self.packet_id,
            "kind": self.kind,
            "pending": [p for p in self.pending if p >= 0],
            "lookahead": list(self.lookahead),
            **self.detail,
        }


@dataclass
class Trace:
    policy: str
    lookahead: int
    instance: Instance
    records: list = field(default_factory=list)

    @property
    def schedule(self) -> Schedule:
        return Schedule({r.slot: r.packet_id for r in self.records if r.packet_id is not None})

    @property
    def weight(self) -> float:
        return math.fsum(r.packet.weight for r in self.records if r.packet_id is not None)

    def record_at(self, t: int) -> Optional[StepRecord]:
        if not self.records:
            return None
        i = t - self.records[0].slot
        if 0 <= i < len(self.records):
            return self.records[i]
        return None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "lookahead": self.lookahead,
            "weight": self.weight,
            "steps": [r.to_dict() for r in self.records],
        }


# ---------------------------------------------------------------------------
# policies


def greedy_step(pending) -> Optional[Packet]:
    if not pending:
        return None
    return min(pending, key=heavy_key)


def edf_alpha_step(pending, alpha: float) -> Optional[Packet]:
    if not pending:
        return None
    h = min(pending, key=heavy_key)
    threshold = h.weight / alpha
    return min((p for p in pending if p.weight >= threshold), key=canonical_key)


def toggleh_step(marked: Optional[int], pending, t: int):
    """One ToggleH decision.

    Returns ``(packet, new_mark, kind, roles)`` where kind is ``"f"`` or ``"e"``
    and roles maps h/s/f/e to the packets chosen for those roles.
    """
    by_weight = sorted(pending, key=heavy_key)
    h = by_weight[0]
    s = by_weight[1] if len(by_weight) > 1 else None
    f = min((p for p in pending if p.weight >= h.weight / PHI), key=canonical_key)
    e = min((p for p in pending if p.weight >= h.weight / PHI2), key=canonical_key)
    roles = {"h": h, "s": s, "f": f, "e": e}
    heavy_second = s is not None and s.weight >= h.weight / PHI
    if marked != h.id or heavy_second or e.deadline > t:
        new_mark = h.id if (h.deadline == t + 3 and f.deadline == t + 2) else None
        return f, new_mark, "f", roles
    return e, None, "e", roles


@dataclass(frozen=True)
class Plan:
    p1: Optional[Packet] = None
    p2: Optional[Packet] = None
    p3: Optional[Packet] = None

    def ids(self) -> list:
        return [None if p is None else p.id for p in (self.p1, self.p2, self.p3)]

    def weight(self) -> float:
        return math.fsum(p.weight for p in (self.p1, self.p2, self.p3) if p is not None)


def compute_plan(pending, lookahead_set, t: int) -> Plan:
    """Best schedule of the visible packets over slots t, t+1, t+2, laid out in canonical order."""
    visible = list(pending) + list(lookahead_set)
    for p in visible:
        if p.deadline - p.release > 1:
            raise NotTwoBounded(f"packet {p.id} has a window longer than 2 slots")
    originals = {p.id: p for p in visible}
    clamped = [replace(p, release=max(p.release, t)) for p in visible if p.deadline >= t]
    sch = edf_assignment(max_weight_feasible_set(clamped))
    slots = [sch.packet_at(t + i) for i in range(3)]
    return Plan(*[None if pid is None else originals[pid] for pid in slots])


def lcalpha_step(plan: Plan, t: int, consts: LcConstants) -> Optional[Packet]:
    p1, p2, p3 = plan.p1, plan.p2, plan.p3
    if p1 is not None and p2 is not None and p3 is not None and p2.release == t:
        bias = (p2.weight + p3.weight) / (2 * consts.alpha)
        if p1.weight < min(p2.weight, p3.weight, bias):
            return p2
    return p1


class Policy:
    """Base policy. ``min_lookahead`` is the information the policy needs."""

    name = "policy"
    min_lookahead = 0

    def reset(self) -> None:
        pass

    def step(self, t: int, pending: list, lookahead: list):
        raise NotImplementedError

    def get_params(self) -> dict:
        return {}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({params})"


class Greedy(Policy):
    name = "greedy"

    def step(self, t, pending, lookahead):
        return greedy_step(pending), "", {}


class EdfAlpha(Policy):
    def __init__(self, alpha: float = PHI):
        if not alpha >= 1:
            raise ValueError("alpha must be >= 1")
        self.alpha = alpha

    @property
    def name(self):
        return f"edf:{self.alpha!r}"

    def get_params(self):
        return {"alpha": self.alpha}

    def step(self, t, pending, lookahead):
        return edf_alpha_step(pending, self.alpha), "", {}


class ToggleH(Policy):
    name = "toggleh"

    def __init__(self):
        self.marked = None

    def reset(self):
        self.marked = None

    def step(self, t, pending, lookahead):
        ids = {p.id for p in pending}
        if self.marked is not None and self.marked not in ids:
            self.marked = None
        before = self.marked
        packet, self.marked, kind, roles = toggleh_step(self.marked, pending, t)
        detail = {
            "mark_before": before,
            "mark_after": self.marked,
            "roles": {k: None if p is None else p.id for k, p in roles.items()},
            "h_weight": roles["h"].weight,
        }
        return packet, kind, detail


class CompareWithBias(Policy):
    """Plan-based policy for 2-bounded inputs with 1-lookahead."""

    name = "lcalpha"
    min_lookahead = 1

    def __init__(self, alpha: Optional[float] = None):
        base = lc_constants()
        self.consts = base if alpha is None else replace(base, alpha=alpha)

    def get_params(self):
        return {"alpha": self.consts.alpha}

    def step(self, t, pending, lookahead):
        plan = compute_plan(pending, lookahead, t)
        packet = lcalpha_step(plan, t, self.consts)
        if packet is None:
            packet = greedy_step(pending)
        kind = "p2" if packet is not None and packet is plan.p2 else "p1"
        return packet, kind, {"plan": plan.ids(), "plan_weights": [None if p is None else p.weight
                                                                   for p in (plan.p1, plan.p2, plan.p3)]}


def make_policy(spec: str) -> Policy:
    """Parse ``greedy``, ``edf:ALPHA`` (ALPHA may be ``phi`` or ``sqrt3``), ``toggleh``, ``lcalpha[:ALPHA]``."""
    name, _, arg = spec.partition(":")
    named = {"phi": PHI, "sqrt3": math.sqrt(3)}

    def number(text):
        return named[text] if text in named else float(text)

    try:
        if name == "greedy" and not arg:
            return Greedy()
        if name == "edf":
            return EdfAlpha(number(arg) if arg else PHI)
        if name == "toggleh" and not arg:
            return ToggleH()
        if name == "lcalpha":
            return CompareWithBias(number(arg) if arg else None)
    except ValueError as exc:
        raise ValueError(f"bad algorithm spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown algorithm spec {spec!r}")


# ---------------------------------------------------------------------------
# engine


class Engine:
    """Slot-by-slot driver. Packets may be released incrementally, which the
    adaptive adversary relies on; a packet must be announced before the first
    slot at which the policy could see it."""

    def __init__(self, policy: Policy, lookahead: int = 0):
        if lookahead not in (0, 1):
            raise ValueError("lookahead must be 0 or 1")
        if policy.min_lookahead > lookahead:
            raise ValueError(f"{policy.name} needs lookahead {policy.min_lookahead}")
        self.policy = policy
        self.lookahead = lookahead
        self.known = {}
        self.waiting = []
        self.done = set()
        self.last_slot = None
        self.records = []
        policy.reset()

    def release(self, packets) -> None:
        for p in packets:
            if p.id in self.known:
                raise ValueError(f"duplicate packet id {p.id}")
            if self.last_slot is not None and p.release <= self.last_slot + self.lookahead:
                raise ValueError(f"packet {p.id} released at {p.release} after it became visible")
            self.known[p.id] = p
            self.waiting.append(p)

    def step(self, t: int) -> StepRecord:
        if self.last_slot is not None and t != self.last_slot + 1:
            raise ValueError(f"slots must advance one at a time, got {t} after {self.last_slot}")
        self.waiting = [p for p in self.waiting if p.deadline >= t and p.id not in self.done]
        pending = sorted((p for p in self.waiting if p.release <= t), key=canonical_key)
        ahead = [p for p in self.waiting if p.release == t + 1] if self.lookahead else []
        if not pending:
            pending = [Packet(-(t + 1), t, t, 0.0, synthetic=True)]
        packet, kind, detail = self.policy.step(t, pending, ahead)
        if packet is not None and not any(packet is p or packet.id == p.id for p in pending):
            raise PolicyError(f"slot {t}: {self.policy.name} chose packet {packet.id}, which is not pending")
        if packet is not None:
            self.done.add(packet.id)
        rec = StepRecord(t, packet, kind, tuple(p.id for p in pending), tuple(p.id for p in ahead), detail)
        self.records.append(rec)
        self.last_slot = t
        return rec

    def finish(self) -> None:
        """Step until every known packet has expired or been sent."""
        if self.last_slot is None:
            return
        last = max((p.deadline for p in self.known.values()), default=self.last_slot)
        for t in range(self.last_slot + 1, last + 1):
            self.step(t)

    def trace(self) -> Trace:
        inst = Instance(sorted(self.known.values(), key=lambda p: p.id))
        return Trace(self.policy.name, self.lookahead, inst, list(self.records))


def run(policy: Policy, inst: Instance, lookahead: int = 0) -> Trace:
    engine = Engine(policy, lookahead)
    engine.release(inst.packets)
    if inst.horizon is not None:
        lo, hi = inst.horizon
        for t in range(lo, hi + 1):
            engine.step(t)
    trace = engine.trace()
    trace.instance = inst
    return trace
