"""Offline optimum, an exhaustive oracle for tiny instances, and canonicalization."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

from .core import Instance, InvalidSchedule, Schedule, canonical_key, canonical_less, heavy_key, schedule_weight, validate_schedule

BRUTE_FORCE_LIMIT = 16


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OptResult:
    schedule: Schedule
    weight: float
    canonical: bool = True

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "canonical": self.canonical,
            "slots": {str(t): pid for t, pid in self.schedule.assignments.items()},
        }


def _augment(p, owner, by_id, seen) -> bool:
    for t in range(p.release, p.deadline + 1):
        if t in seen:
            continue
        seen.add(t)
        q = owner.get(t)
        if q is None or _augment(by_id[q], owner, by_id, seen):
            owner[t] = p.id
            return True
    return False


def max_weight_feasible_set(packets) -> list:
    """Heaviest feasible subset of ``packets``.

    Feasible packet sets form a matroid, so adding packets heaviest-first and
    keeping each one that still admits a slot assignment is exact. Feasibility
    of the extension is decided by an augmenting path over slots.
    """
    by_id = {p.id: p for p in packets}
    owner = {}
    chosen = []
    for p in sorted(packets, key=heavy_key):
        if p.weight <= 0:
            break
        if _augment(p, owner, by_id, set()):
            chosen.append(p)
    return chosen


def edf_assignment(packets) -> Schedule:
    """Lay out a feasible set slot by slot, always sending the earliest-deadline packet.

    The result is left-justified and already has the earliest-deadline property.
    """
    if not packets:
        return Schedule({})
    arrivals = sorted(packets, key=lambda p: p.release)
    heap = []
    out = {}
    i = 0
    t = arrivals[0].release
    while i < len(arrivals) or heap:
        if not heap and arrivals[i].release > t:
            t = arrivals[i].release
        while i < len(arrivals) and arrivals[i].release <= t:
            heapq.heappush(heap, (canonical_key(arrivals[i]), arrivals[i]))
            i += 1
        _, p = heapq.heappop(heap)
        if p.deadline < t:
            raise ValueError(f"packet set is infeasible: {p.id} misses deadline")
        out[t] = p.id
        t += 1
    return Schedule(out)


def optimal_schedule(inst: Instance) -> OptResult:
    chosen = max_weight_feasible_set(inst.packets)
    sch = edf_assignment(chosen)
    return OptResult(sch, schedule_weight(inst, sch), True)


def _assign_all(packets, taken, i, out) -> bool:
    if i == len(packets):
        return True
    p = packets[i]
    for t in range(p.release, p.deadline + 1):
        if t not in taken:
            taken.add(t)
            out[t] = p.id
            if _assign_all(packets, taken, i + 1, out):
                return True
            taken.discard(t)
            del out[t]
    return False


def brute_force_optimal(inst: Instance) -> OptResult:
    """Exhaustive search over packet subsets and slot injections (tiny inputs only)."""
    n = len(inst.packets)
    if n == 0:
        return OptResult(Schedule({}), 0.0, True)
    lo, hi = inst.horizon
    if n > BRUTE_FORCE_LIMIT or hi - lo + 1 > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(
            f"brute force limited to {BRUTE_FORCE_LIMIT} packets and slots, got {n} packets over {hi - lo + 1} slots"
        )
    subsets = []
    for mask in range(1 << n):
        members = [inst.packets[b] for b in range(n) if mask >> b & 1]
        subsets.append((-math.fsum(p.weight for p in members), len(members), mask, members))
    subsets.sort(key=lambda s: s[:3])
    for _, _, _, members in subsets:
        if len(members) > hi - lo + 1:
            continue
        out = {}
        if _assign_all(sorted(members, key=lambda p: p.deadline), set(), 0, out):
            sch = canonicalize(inst, Schedule(out))
            return OptResult(sch, schedule_weight(inst, sch), True)
    raise AssertionError("the empty subset is always feasible")


def _violating_pair(inst_by_id, slots):
    for a, b in itertools.combinations(range(len(slots)), 2):
        (t, pid), (u, qid) = slots[a], slots[b]
        p, q = inst_by_id[pid], inst_by_id[qid]
        if q.release <= t and u <= p.deadline and not canonical_less(p, q):
            return a, b
    return None


def earliest_deadline_violations(inst: Instance, sch: Schedule) -> list:
    """All pairs (t, u) of swappable scheduled packets that are out of canonical order."""
    by_id = inst.by_id
    items = sorted(sch.assignments.items())
    bad = []
    for (t, pid), (u, qid) in itertools.combinations(items, 2):
        p, q = by_id[pid], by_id[qid]
        if q.release <= t and u <= p.deadline and not canonical_less(p, q):
            bad.append((t, u))
    return bad


def canonicalize(inst: Instance, sch: Schedule) -> Schedule:
    """Swap out-of-order swappable pairs until the earliest-deadline property holds.

    Each swap removes an inversion among swappable pairs, so this terminates.
    """
    violations = validate_schedule(inst, sch)
    if violations:
        raise InvalidSchedule(violations)
    by_id = inst.by_id
    slots = sorted(sch.assignments.items())
    while True:
        hit = _violating_pair(by_id, slots)
        if hit is None:
            return Schedule(dict(slots))
        a, b = hit
        (t, pid), (u, qid) = slots[a], slots[b]
        slots[a], slots[b] = (t, qid), (u, pid)
