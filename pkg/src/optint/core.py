"""Parameter tables and the policy-gradient math shared by every learner.

Everything here is environment-agnostic: Boltzmann meta-policy over the
options available in a state, sigmoid termination probabilities, n-step
backward returns over one option segment, and the per-segment gradient
accumulation that the trainers apply to the tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

StateId = int
OptionId = int
ActionId = int

# Segment end causes.
NATURAL_COMPLETION = "natural_completion"
INTERRUPTED = "interrupted"
TERMINAL = "terminal"
STEP_CAP = "step_cap"
EXITED_DOMAIN = "exited_domain"

END_CAUSES = (NATURAL_COMPLETION, INTERRUPTED, TERMINAL, STEP_CAP, EXITED_DOMAIN)


@dataclass
class Hyperparams:
    """Learning configuration shared by the trainers.

    ``termination_td`` selects how the termination-logit advantage is
    computed: ``"n-step"`` uses the segment's backward return, ``"one-step"``
    uses the per-step TD error.
    """

    gamma: float = 0.99
    alpha_theta: float = 0.25
    alpha_v: float = 0.5
    alpha_vartheta: float = 0.25
    temperature: float = 1.0
    t_max: int = 1000
    episodes: int = 1000
    termination_td: str = "n-step"

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0,1], got {self.gamma}")
        for name in ("alpha_theta", "alpha_v", "alpha_vartheta", "temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")
        if self.termination_td not in ("n-step", "one-step"):
            raise ValueError(f"unknown termination_td mode {self.termination_td!r}")


class ParamTables:
    """Learnable tables: meta-policy preferences ``theta[s, w]``, termination
    logits ``vartheta[w, s]`` and critic weights ``theta_v[s]``.

    All tables start at zero, which makes the initial meta-policy uniform
    over available options and every termination probability 0.5.
    """

    def __init__(self, state_count: int, option_count: int):
        if state_count < 1 or option_count < 1:
            raise ValueError("state_count and option_count must be positive")
        self.state_count = state_count
        self.option_count = option_count
        self.theta = np.zeros((state_count, option_count))
        self.vartheta = np.zeros((option_count, state_count))
        self.theta_v = np.zeros(state_count)

    def value(self, s: StateId) -> float:
        return float(self.theta_v[s])

    def copy(self) -> "ParamTables":
        dup = ParamTables(self.state_count, self.option_count)
        dup.theta = self.theta.copy()
        dup.vartheta = self.vartheta.copy()
        dup.theta_v = self.theta_v.copy()
        return dup


@dataclass
class SegmentTrace:
    """One call-and-return execution of an option.

    ``states`` has one more entry than ``actions``/``rewards``; the last
    entry is the state the segment ended in.  ``available`` records the
    option ids the meta-policy could choose from at the start state.
    """

    option: OptionId
    t_start: int
    states: list[StateId]
    actions: list[ActionId]
    rewards: list[float]
    end_cause: str
    available: tuple[OptionId, ...]

    @property
    def duration(self) -> int:
        return len(self.actions)

    def validate(self) -> None:
        tau = len(self.actions)
        if tau < 1:
            raise ValueError("segment must contain at least one step")
        if len(self.rewards) != tau or len(self.states) != tau + 1:
            raise ValueError("segment lengths are inconsistent")
        if self.end_cause not in END_CAUSES:
            raise ValueError(f"unknown end cause {self.end_cause!r}")


@dataclass
class SegmentDeltas:
    """Sparse parameter deltas accumulated over one segment.

    ``d_theta_row`` touches only the segment's start state,
    ``d_vartheta_row`` only the executed option's row.  The termination
    delta is a raw gradient; the trainer applies it with a negative sign.
    """

    meta_state: StateId
    d_theta_row: np.ndarray
    d_theta_v: np.ndarray
    option: OptionId
    d_vartheta_row: np.ndarray


def meta_policy_probs(
    tables: ParamTables,
    s: StateId,
    available,
    temperature: float,
) -> np.ndarray:
    """Boltzmann distribution over the available options in state ``s``.

    Returns a vector of length ``option_count``; ids outside ``available``
    get probability exactly 0.  The softmax subtracts the max preference
    before exponentiating.
    """
    avail = sorted(available)
    if not avail:
        raise ValueError("no option available in state")
    row = tables.theta[s]
    zs = [float(row[w]) / temperature for w in avail]
    m = max(zs)
    es = [math.exp(z - m) for z in zs]
    tot = sum(es)
    probs = np.zeros(tables.option_count)
    for w, e in zip(avail, es):
        probs[w] = e / tot
    return probs


def grad_log_meta_policy(
    tables: ParamTables,
    s: StateId,
    available,
    chosen: OptionId,
    temperature: float,
) -> np.ndarray:
    """Gradient of ``ln pi(chosen | s)`` with respect to ``theta[s, :]``.

    Entry for an available option w is ``(1{w == chosen} - pi(w|s)) / T``;
    entries outside ``available`` are zero.
    """
    avail = set(available)
    if chosen not in avail:
        raise ValueError(f"chosen option {chosen} not in available set")
    probs = meta_policy_probs(tables, s, avail, temperature)
    grad = np.zeros(tables.option_count)
    for w in avail:
        grad[w] = ((1.0 if w == chosen else 0.0) - probs[w]) / temperature
    return grad


def termination_prob(tables: ParamTables, w: OptionId, s: StateId) -> float:
    """Sigmoid of the termination logit; strictly inside (0, 1)."""
    return sigmoid(float(tables.vartheta[w, s]))


def sigmoid(x: float) -> float:
    # Split on sign to avoid overflow in exp for large |x|.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def n_step_returns(trace: SegmentTrace, gamma: float, bootstrap: float) -> list[float]:
    """Backward-accumulated return for every step of the segment.

    ``bootstrap`` must be 0 when the segment ended in a terminal state and
    the critic's value of the end state otherwise.  Element i is the
    discounted sum of rewards from step i plus the discounted bootstrap.
    """
    trace.validate()
    returns = [0.0] * len(trace.rewards)
    r = bootstrap
    for i in range(len(trace.rewards) - 1, -1, -1):
        r = trace.rewards[i] + gamma * r
        returns[i] = r
    return returns


def accumulate_updates(
    tables: ParamTables,
    trace: SegmentTrace,
    returns: list[float],
    hyper: Hyperparams,
) -> SegmentDeltas:
    """Gradient contributions of one segment, before learning rates.

    Per action step i the critic delta is ``R_i - V(s_i)`` and the
    termination delta is ``beta (1 - beta) * advantage`` where the
    advantage is ``R_i - V(s_i)`` in n-step mode and the one-step TD error
    in one-step mode.  The meta-policy delta uses only the start state:
    ``grad ln pi(option | s_start) * (R_0 - V(s_start))``.
    """
    trace.validate()
    tau = len(trace.actions)
    if len(returns) != tau:
        raise ValueError("returns are not aligned with the segment steps")

    theta_v = tables.theta_v
    w = trace.option
    vrow = tables.vartheta[w]
    gamma = hyper.gamma
    one_step = hyper.termination_td == "one-step"

    d_theta_v = np.zeros(tables.state_count)
    d_vartheta = np.zeros(tables.state_count)
    for i in range(tau):
        s_i = trace.states[i]
        v_i = float(theta_v[s_i])
        d_theta_v[s_i] += returns[i] - v_i
        if one_step:
            if i == tau - 1:
                v_next = 0.0 if trace.end_cause == TERMINAL else float(theta_v[trace.states[i + 1]])
            else:
                v_next = float(theta_v[trace.states[i + 1]])
            advantage = trace.rewards[i] + gamma * v_next - v_i
        else:
            advantage = returns[i] - v_i
        beta = sigmoid(float(vrow[s_i]))
        d_vartheta[s_i] += beta * (1.0 - beta) * advantage

    s0 = trace.states[0]
    adv0 = returns[0] - float(theta_v[s0])
    d_theta_row = grad_log_meta_policy(tables, s0, trace.available, w, hyper.temperature)
    d_theta_row *= adv0

    return SegmentDeltas(
        meta_state=s0,
        d_theta_row=d_theta_row,
        d_theta_v=d_theta_v,
        option=w,
        d_vartheta_row=d_vartheta,
    )


def apply_updates(tables: ParamTables, deltas: SegmentDeltas, hyper: Hyperparams) -> None:
    """Apply one segment's deltas: ascent for theta and theta_v, descent
    (explicit minus) for the termination logits."""
    tables.theta[deltas.meta_state] += hyper.alpha_theta * deltas.d_theta_row
    tables.theta_v += hyper.alpha_v * deltas.d_theta_v
    tables.vartheta[deltas.option] -= hyper.alpha_vartheta * deltas.d_vartheta_row


def sample_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Draw an index from a probability vector using a single uniform."""
    u = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p <= 0.0:
            continue
        acc += p
        last = i
        if u < acc:
            return i
    return last
