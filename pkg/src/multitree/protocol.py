"""Local link-update rules run when one node samples another.

Each public function mutates the state in place and reports what it did.
The rule bodies live in :mod:`multitree.kernels`; the same code serves as the
read-only predicate used by the convergence detector (``apply=False``), so
the mutating rule and its probe cannot drift apart.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import kernels as K
from .graph import GraphState


class DepthMode(enum.Enum):
    INSTANTANEOUS = "instantaneous"
    DISTRIBUTED = "distributed"

    @property
    def inst(self) -> bool:
        return self is DepthMode.INSTANTANEOUS


class Rule(enum.Enum):
    NONE = "none"
    ADD = "add"
    INSERT = "insert"
    JUMP = "jump"
    LEAFSWAP = "leafswap"
    MIXSWAP = "mixswap"


_CODE_RULE = {
    K.R_NONE: Rule.NONE,
    K.R_ADD: Rule.ADD,
    K.R_INSERT: Rule.INSERT,
    K.R_JUMP: Rule.JUMP,
    K.R_LEAFSWAP: Rule.LEAFSWAP,
    K.R_MIX_A: Rule.MIXSWAP,
    K.R_MIX_B: Rule.MIXSWAP,
}

RULE_BITS = {
    Rule.ADD: K.B_ADD,
    Rule.INSERT: K.B_INSERT,
    Rule.JUMP: K.B_JUMP,
    Rule.LEAFSWAP: K.B_LEAFSWAP,
    Rule.MIXSWAP: K.B_MIX,
}
ALL_RULES = K.B_ALL

BUILT = "built"
REMOVED = "removed"


@dataclass(frozen=True)
class RuleOutcome:
    rule: Rule
    affected: tuple = ()
    clause: str | None = None  # "a" or "b" for MIXSWAP

    @property
    def changed(self) -> bool:
        return self.rule is not Rule.NONE

    @classmethod
    def from_code(cls, r) -> RuleOutcome:
        code, a, b, c, d, i, j = (int(x) for x in r)
        rule = _CODE_RULE[code]
        i1, j1 = i + 1, j + 1
        a, b, c, d = a + 1, b + 1, c + 1, d + 1
        if rule is Rule.NONE:
            return NONE_OUTCOME
        if rule is Rule.ADD:  # v=a, u=b
            links = (((a, b, i1), BUILT),)
        elif rule is Rule.INSERT:  # v=a, u=b, displaced child c
            links = (((a, c, i1), REMOVED), ((a, b, i1), BUILT), ((b, c, i1), BUILT))
        elif rule is Rule.JUMP:  # u=a, v=b, old parent c
            links = (((c, a, i1), REMOVED), ((b, a, i1), BUILT))
        elif rule is Rule.LEAFSWAP:  # u=a, v=b, pu=c, pv=d
            links = (((c, a, i1), REMOVED), ((d, b, i1), REMOVED),
                     ((c, b, i1), BUILT), ((d, a, i1), BUILT))
        else:  # uc=a, v=b, u=c, vc=d
            links = (((c, a, i1), REMOVED), ((b, d, j1), REMOVED),
                     ((c, d, j1), BUILT), ((b, a, i1), BUILT))
        clause = None
        if code == K.R_MIX_A:
            clause = "a"
        elif code == K.R_MIX_B:
            clause = "b"
        return cls(rule, links, clause)


NONE_OUTCOME = RuleOutcome(Rule.NONE)


def _ids(state, *nodes):
    for u in nodes:
        state._check_node(u)
    if len(set(nodes)) != len(nodes):
        raise ValueError(f"sampler and target must differ, got {nodes}")
    return [u - 1 for u in nodes]


def depth_update(state: GraphState, u: int, i: int, mode: DepthMode) -> None:
    """Refresh node ``u``'s buffered depth for color ``i``."""
    state._check_node(u)
    state._check_color(i)
    K.depth_update(state.arrays, u - 1, i - 1, mode.inst)


def greedy_cover(state: GraphState, u: int, v: int,
                 mode: DepthMode = DepthMode.DISTRIBUTED, rules: int = ALL_RULES) -> RuleOutcome:
    a, b = _ids(state, u, v)
    return RuleOutcome.from_code(K.greedy_cover(state.arrays, a, b, rules, mode.inst, True))


def single_tree_balance(state: GraphState, u: int, v: int, mode: DepthMode,
                        rules: int = ALL_RULES) -> RuleOutcome:
    a, b = _ids(state, u, v)
    return RuleOutcome.from_code(K.single_tree_balance(state.arrays, a, b, rules, mode.inst, True))


def mix_swap(state: GraphState, u_c: int, v: int, mode: DepthMode,
             rules: int = ALL_RULES) -> RuleOutcome:
    a, b = _ids(state, u_c, v)
    return RuleOutcome.from_code(K.mix_swap(state.arrays, a, b, rules, mode.inst, True))


def on_sample(state: GraphState, u: int, v: int, mode: DepthMode,
              rules: int = ALL_RULES) -> RuleOutcome:
    """Full reaction to ``u`` sampling ``v``: depth refresh, then the first
    of cover / balance / mix-swap that fires."""
    a, b = _ids(state, u, v)
    return RuleOutcome.from_code(K.on_sample(state.arrays, a, b, rules, mode.inst))


def probe(state: GraphState, u: int, v: int, mode: DepthMode,
          rules: int = ALL_RULES) -> RuleOutcome:
    """Which rule would fire for ``(u, v)`` on the current buffers; no mutation."""
    a, b = _ids(state, u, v)
    return RuleOutcome.from_code(K.try_rules(state.arrays, a, b, rules, mode.inst, False))
