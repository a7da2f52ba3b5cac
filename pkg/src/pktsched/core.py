"""Packets, instances, schedules and the orderings every policy relies on."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

PHI = (1 + math.sqrt(5)) / 2


class InvalidInstance(ValueError):
    pass


class InvalidSchedule(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Packet:
    id: int
    release: int
    deadline: int
    weight: float
    synthetic: bool = False

    def __post_init__(self):
        if self.deadline < self.release:
            raise InvalidInstance(f"packet {self.id}: deadline {self.deadline} < release {self.release}")
        if not self.weight >= 0 or math.isinf(self.weight):
            raise InvalidInstance(f"packet {self.id}: weight must be finite and >= 0, got {self.weight}")
        if self.id < 0 and not self.synthetic:
            raise InvalidInstance(f"packet id must be non-negative, got {self.id}")

    @property
    def span(self) -> int:
        return self.deadline - self.release + 1

    def is_tight(self) -> bool:
        return self.release == self.deadline

    def is_pending(self, t: int) -> bool:
        return self.release <= t <= self.deadline


def canonical_key(p: Packet):
    """Sort key realizing the earliest-deadline order: deadline, then heavier first, then id."""
    return (p.deadline, -p.weight, p.id)


def heavy_key(p: Packet):
    """Sort key putting the heaviest packet first; ties go to the smaller id."""
    return (-p.weight, p.id)


def canonical_less(x: Packet, y: Packet) -> bool:
    return canonical_key(x) < canonical_key(y)


def heavier(x: Packet, y: Packet) -> bool:
    return heavy_key(x) < heavy_key(y)


@dataclass(frozen=True)
class Instance:
    packets: tuple
    s_bound: Optional[int] = None
    distinct_weights: bool = False

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        ids = [p.id for p in self.packets]
        if len(set(ids)) != len(ids):
            raise InvalidInstance("packet ids must be distinct")
        if self.s_bound is not None:
            if self.s_bound < 1:
                raise InvalidInstance("s_bound must be a positive integer")
            for p in self.packets:
                if p.deadline > p.release + self.s_bound - 1:
                    raise InvalidInstance(f"packet {p.id} violates the {self.s_bound}-bounded window")
        if self.distinct_weights:
            ws = [p.weight for p in self.packets]
            if len(set(ws)) != len(ws):
                raise InvalidInstance("weights are not pairwise distinct")

    def __len__(self):
        return len(self.packets)

    @property
    def by_id(self) -> dict:
        return {p.id: p for p in self.packets}

    @property
    def horizon(self) -> tuple:
        """Inclusive (first, last) slot range, or None for an empty instance."""
        if not self.packets:
            return None
        return (min(p.release for p in self.packets), max(p.deadline for p in self.packets))

    def max_span(self) -> int:
        return max((p.span for p in self.packets), default=0)


@dataclass(frozen=True)
class Schedule:
    assignments: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(sorted(self.assignments.items())))

    def slot_of(self) -> dict:
        return {pid: t for t, pid in self.assignments.items()}

    def packet_at(self, t: int) -> Optional[int]:
        return self.assignments.get(t)

    def __len__(self):
        return len(self.assignments)


def validate_schedule(inst: Instance, sch: Schedule) -> list:
    """Return the list of violations; an empty list means the schedule is valid."""
    by_id = inst.by_id
    violations = []
    seen = {}
    for t, pid in sch.assignments.items():
        p = by_id.get(pid)
        if p is None:
            violations.append(f"slot {t}: unknown packet {pid}")
            continue
        if pid in seen:
            violations.append(f"packet {pid} assigned to slots {seen[pid]} and {t}")
        seen[pid] = t
        if t < p.release:
            violations.append(f"slot {t}: packet {pid} scheduled before release {p.release}")
        elif t > p.deadline:
            violations.append(f"slot {t}: packet {pid} scheduled after deadline {p.deadline}")
    return violations


def schedule_weight(inst: Instance, sch: Schedule) -> float:
    violations = validate_schedule(inst, sch)
    if violations:
        raise InvalidSchedule(violations)
    by_id = inst.by_id
    # fixed summation order keeps equal packet sets bit-identical
    return math.fsum(by_id[pid].weight for pid in sorted(sch.assignments.values()))


def perturb(inst: Instance, eta: Optional[float] = None) -> Instance:
    """Add ``i * eta`` to the weight of the i-th packet so all weights become distinct."""
    if eta is None:
        top = max((p.weight for p in inst.packets), default=0.0)
        eta = 1e-9 * (top if top > 0 else 1.0)
    packets = [replace(p, weight=p.weight + i * eta) for i, p in enumerate(inst.packets)]
    ws = [p.weight for p in packets]
    return Instance(packets, inst.s_bound, distinct_weights=len(set(ws)) == len(ws))


# JSON round-trip. Python's float repr is the shortest string that parses back
# to the same double, so decimal literals survive unchanged.

def instance_to_dict(inst: Instance) -> dict:
    out = {}
    if inst.s_bound is not None:
        out["s_bound"] = inst.s_bound
    out["packets"] = [
        {"id": p.id, "r": p.release, "d": p.deadline, "w": p.weight} for p in inst.packets
    ]
    return out


def instance_from_dict(data: Mapping) -> Instance:
    try:
        packets = [
            Packet(int(q["id"]), int(q["r"]), int(q["d"]), float(q["w"])) for q in data["packets"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidInstance(f"malformed instance: {exc}") from exc
    ws = [p.weight for p in packets]
    return Instance(packets, data.get("s_bound"), distinct_weights=len(set(ws)) == len(ws))


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst))


def loads_instance(text: str) -> Instance:
    return instance_from_dict(json.loads(text))


def load_instance(path) -> Instance:
    with open(path) as fh:
        return loads_instance(fh.read())


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst) + "\n")


def schedule_to_dict(sch: Schedule) -> dict:
    return {"slots": {str(t): pid for t, pid in sch.assignments.items()}}


def schedule_from_dict(data: Mapping) -> Schedule:
    return Schedule({int(t): int(pid) for t, pid in data["slots"].items()})


def make_instance(triples: Iterable, s_bound: Optional[int] = None) -> Instance:
    """Build an instance from ``(release, deadline, weight)`` triples, numbering ids from 0."""
    packets = [Packet(i, r, d, float(w)) for i, (r, d, w) in enumerate(triples)]
    ws = [p.weight for p in packets]
    return Instance(packets, s_bound, distinct_weights=len(set(ws)) == len(ws))
