"""Instance generators: the adaptive lower-bound game for 1-lookahead policies
and seeded random s-bounded instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import Engine, Policy
from .core import PHI, Instance, Packet, heavy_key, perturb
from .offline import optimal_schedule

ROOT17 = math.sqrt(17)
LB_RATIO = (1 + ROOT17) / 4


@dataclass(frozen=True)
class LbParams:
    n: int = 50
    delta: float = 1e-3

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")

    alpha = (3 + ROOT17) / 4
    beta = (5 + ROOT17) / 4
    gamma = LB_RATIO
    ratio = LB_RATIO


def weight_sequence(n: int, delta: float) -> list:
    """Closed-form weights w_0..w_n. Unlike :func:`lb_weights` this accepts delta = 0."""
    a, b, g = LbParams.alpha, LbParams.beta, LbParams.gamma
    ws = [1.0]
    for i in range(1, n + 1):
        ws.append((g + 1) * a ** (i - 1) * (a - 1) + delta * (b ** (i - 1) * (b - 1) - a ** (i - 1) * (a - 1)))
    return ws


def lb_weights(params: LbParams) -> list:
    return weight_sequence(params.n, params.delta)


def partial_sums(weights) -> list:
    out, acc = [], 0.0
    for w in weights:
        acc += w
        out.append(acc)
    return out


def recurrence_residuals(weights, ratio: float = LB_RATIO) -> list:
    """Relative residuals of (2R-2)S_{k+1} - (R+1)S_k + (R+1)S_{k-1} + (2-R) for k = 1..n-1."""
    s = partial_sums(weights)
    out = []
    for k in range(1, len(weights) - 1):
        lhs = (2 * ratio - 2) * s[k + 1] - (ratio + 1) * s[k] + (ratio + 1) * s[k - 1]
        out.append(abs(lhs + (2 - ratio)) / max(1.0, abs(s[k + 1])))
    return out


def ratio_case1(k: int, weights) -> float:
    """Ratio when the policy sends b_k at slot 2k+1 and the game stops after phase k."""
    if not 0 <= k < len(weights) - 1:
        raise ValueError(f"k={k} out of range for {len(weights)} weights")
    s = partial_sums(weights)
    w0 = weights[0]
    return (2 * s[k + 1] + weights[k] - 2 * w0) / (2 * s[k + 1] - weights[k] - w0)


def ratio_case2(n: int, weights) -> float:
    """Ratio when the policy always sends an expiring packet and all n phases are played."""
    if not 0 <= n < len(weights):
        raise ValueError(f"n={n} out of range for {len(weights)} weights")
    s = partial_sums(weights)
    w0 = weights[0]
    return (2 * s[n] + weights[n] - 2 * w0) / (2 * s[n] - w0)


def case1_profits(k: int, weights) -> tuple:
    s = partial_sums(weights)
    w0 = weights[0]
    return 2 * s[k + 1] - weights[k] - w0, 2 * s[k + 1] - 2 * w0 + weights[k]


def case2_profits(n: int, weights) -> tuple:
    s = partial_sums(weights)
    w0 = weights[0]
    return 2 * s[n] - w0, 2 * s[n] - 2 * w0 + weights[n]


@dataclass
class AdversaryOutcome:
    k: int
    stopped_early: bool
    alg_weight: float
    opt_weight: float
    ratio: float
    transcript: list = field(default_factory=list)
    instance: Instance = None
    trace: object = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "stopped_early": self.stopped_early,
            "alg_weight": self.alg_weight,
            "opt_weight": self.opt_weight,
            "ratio": self.ratio,
            "transcript": self.transcript,
        }


def phase_packets(i: int, weights) -> list:
    """a_i tight at 2i+1, b_i over [2i+1, 2i+2], c_i over [2i+2, 2i+3]."""
    return [
        Packet(3 * i, 2 * i + 1, 2 * i + 1, weights[i]),
        Packet(3 * i + 1, 2 * i + 1, 2 * i + 2, weights[i + 1]),
        Packet(3 * i + 2, 2 * i + 2, 2 * i + 3, weights[i + 1]),
    ]


def run_lb_adversary(policy: Policy, params: LbParams) -> AdversaryOutcome:
    """Play the phase game against ``policy`` with 1-lookahead.

    Phase i+1 is announced only after the policy's choice at slot 2i+1 is
    known, and before slot 2i+2 where the lookahead would reveal it.
    """
    weights = lb_weights(params)
    n = params.n
    engine = Engine(policy, lookahead=1)
    engine.release(phase_packets(0, weights))
    transcript = []
    k = n
    for i in range(n):
        rec = engine.step(2 * i + 1)
        chosen = rec.packet
        expiring = chosen is not None and not chosen.synthetic and chosen.deadline == 2 * i + 1
        transcript.append({"phase": i, "slot": 2 * i + 1, "packet": rec.packet_id, "expiring": expiring})
        if not expiring:
            k = i
            break
        if i + 1 < n:
            engine.release(phase_packets(i + 1, weights))
        else:
            engine.release([Packet(3 * n, 2 * n + 1, 2 * n + 1, weights[n])])
        engine.step(2 * i + 2)
    engine.finish()
    trace = engine.trace()
    inst = trace.instance
    alg = trace.weight
    opt = optimal_schedule(inst).weight
    return AdversaryOutcome(k, k < n, alg, opt, opt / alg, transcript, inst, trace)


class LatestDeadlineFirst(Policy):
    """Sends the pending packet with the latest deadline; at slot 2i+1 of the game this is b_i."""

    name = "latest-deadline"
    min_lookahead = 0

    def step(self, t, pending, lookahead):
        return max(pending, key=lambda p: (p.deadline, p.weight, -p.id)), "", {}


class ExpiringFirst(Policy):
    """Sends the heaviest expiring packet when there is one, else the heaviest."""

    name = "expiring-first"
    min_lookahead = 0

    def step(self, t, pending, lookahead):
        expiring = [p for p in pending if p.deadline == t]
        return min(expiring or pending, key=heavy_key), "", {}


# ---------------------------------------------------------------------------
# random instances

WEIGHT_DISTS = ("uniform", "exponential", "lognormal", "pareto", "phi-powers")


def _draw_weights(rng, count, dist):
    if dist == "uniform":
        return 1.0 - rng.random(count)
    if dist == "exponential":
        return rng.exponential(1.0, count)
    if dist == "lognormal":
        return rng.lognormal(0.0, 1.0, count)
    if dist == "pareto":
        return 1.0 + rng.pareto(1.5, count)
    if dist == "phi-powers":
        # clusters just around the policies' thresholds w_h/phi and w_h/phi^2
        return PHI ** rng.integers(-3, 4, count).astype(float) * (1 + 0.02 * (rng.random(count) - 0.5))
    raise ValueError(f"unknown weight distribution {dist!r}; choose from {WEIGHT_DISTS}")


def gen_random_sbounded(seed: int, count: int, s: int, horizon: int, weight_dist: str = "uniform") -> Instance:
    if s < 1:
        raise ValueError("s must be >= 1")
    if horizon < 1 and count > 0:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    releases = rng.integers(0, horizon, count)
    slack = rng.integers(0, s, count)
    weights = _draw_weights(rng, count, weight_dist)
    packets = [
        Packet(i, int(r), int(r + x), float(w)) for i, (r, x, w) in enumerate(zip(releases, slack, weights))
    ]
    inst = Instance(packets, s)
    if len({p.weight for p in packets}) != len(packets):
        inst = perturb(inst)
    return Instance(inst.packets, s, distinct_weights=True)


def fuzz_instance(seed: int, s: int, max_count: int = 30) -> Instance:
    """One instance of a seeded mix: size, density and weight distribution all vary with the seed."""
    rng = np.random.default_rng([seed, s, max_count])
    count = int(rng.integers(2, max_count + 1))
    horizon = max(1, count // int(rng.integers(1, 5)))
    dist = WEIGHT_DISTS[seed % len(WEIGHT_DISTS)]
    return gen_random_sbounded(int(rng.integers(0, 2**63 - 1)), count, s, horizon, dist)


def search_ratio_violation(policy_factory, bound: float, s: int, seed: int = 0, tries: int = 10000,
                           count: int = 6, horizon: int = 4, lookahead: int = 0,
                           weight_dist: str = "uniform"):
    """Randomized search for an instance on which a policy's ratio exceeds ``bound``.

    Returns ``(instance, ratio)`` for the first hit, or ``None``.
    """
    from .algorithms import run

    for i in range(tries):
        inst = gen_random_sbounded(seed + i, count, s, horizon, weight_dist)
        alg = run(policy_factory(), inst, lookahead).weight
        opt = optimal_schedule(inst).weight
        if alg > 0 and opt / alg > bound:
            return inst, opt / alg
    return None


__all__ = [
    "LB_RATIO", "LbParams", "AdversaryOutcome", "weight_sequence", "lb_weights", "partial_sums",
    "recurrence_residuals", "ratio_case1", "ratio_case2", "case1_profits", "case2_profits",
    "phase_packets", "run_lb_adversary", "LatestDeadlineFirst", "ExpiringFirst",
    "gen_random_sbounded", "fuzz_instance", "search_ratio_violation", "WEIGHT_DISTS",
]
