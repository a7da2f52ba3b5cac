"""Online bounded-delay packet scheduling: policies, offline optimum,
adaptive lower-bound game and charging-scheme audits."""

from .core import (
    PHI,
    Instance,
    InvalidInstance,
    InvalidSchedule,
    Packet,
    Schedule,
    canonical_less,
    heavier,
    make_instance,
    perturb,
    schedule_weight,
    validate_schedule,
)
from .offline import OptResult, brute_force_optimal, canonicalize, optimal_schedule
from .algorithms import (
    CompareWithBias,
    EdfAlpha,
    Engine,
    Greedy,
    LcConstants,
    Plan,
    ToggleH,
    Trace,
    compute_plan,
    lc_constants,
    make_policy,
    run,
)
from .adversary import LbParams, gen_random_sbounded, lb_weights, run_lb_adversary
from .audit import audit_run, lcalpha_charges, toggleh_charges, verify_lcalpha, verify_toggleh

__version__ = "0.1.0"
