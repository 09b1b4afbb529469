"""
Counterexample machinery: trace classification, maximum-weight compatible
subsets and candidate verification by weight-ordered enumeration
"""
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from django.conf import settings

from ..exceptions import BudgetExhausted, InvariantViolation
from .automata import empty_general, enumerate_by_weight
from .core import (
    AssignStatement, Assume, Pcfa, ProbL, ProbR, Trace, Valuation, eval_trace, format_trace, path_condition,
    trace_key, trace_weight,
)
from .logic import Logic, Predicate, path_wp_trace, simplify
from .mdp import mc_accepting_mass
from .surface import TRUE, And, BExpr, bexpr_vars, expr_vars

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violating:
    path_cond: Predicate
    witness: Valuation

    violating = True


@dataclass(frozen=True)
class NonViolating:
    infeasible: bool

    violating = False


TraceClass = Union[Violating, NonViolating]


@dataclass
class Counterexample:
    traces: Tuple[Trace, ...]
    total_weight: Fraction
    joint_path_cond: Predicate
    witness: Valuation


@dataclass
class SpuriousReport:
    violating: List[Trace] = field(default_factory=list)
    non_violating: List[Trace] = field(default_factory=list)
    max_subset: Tuple[Trace, ...] = ()
    split_predicate: Predicate = TRUE
    best_weight: Fraction = Fraction(0)
    remaining: Fraction = Fraction(0)


class Budget:
    """
    Wall-clock deadline and per-candidate trace allowance
    """

    def __init__(self, deadline: Optional[float] = None, max_traces: Optional[int] = None):
        self.deadline = deadline
        self.max_traces = max_traces or settings.VERIFIER_MAX_TRACES

    @classmethod
    def from_timeout(cls, seconds: float, max_traces: Optional[int] = None) -> 'Budget':
        return cls(time.monotonic() + seconds, max_traces)

    def check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExhausted('wall-clock budget exhausted')


def trace_vars(trace: Sequence) -> set:
    names = set()
    for s in trace:
        if isinstance(s, AssignStatement):
            names |= {s.var} | expr_vars(s.expr)
        elif isinstance(s, Assume):
            names |= bexpr_vars(s.cond)
    return names


def complete_model(model: Valuation, names) -> Valuation:
    """
    Variables the formula does not constrain get the value 0
    """
    values = model.as_dict()
    for name in names:
        values.setdefault(name, 0)
    return Valuation(values)


def classify_trace(logic: Logic, trace: Trace, pre: BExpr, post: BExpr) -> TraceClass:
    cond = path_condition(trace, pre, post)
    result = logic.check_sat(cond)
    if result.sat:
        names = trace_vars(trace) | bexpr_vars(pre) | bexpr_vars(post)
        return Violating(cond, complete_model(result.model, names))
    feasible = logic.is_sat(And((pre, path_wp_trace(trace, TRUE))))
    return NonViolating(infeasible=not feasible)


def structurally_compatible(t1: Trace, t2: Trace) -> bool:
    """
    The traces diverge right after their common prefix on the two branches
    of one distribution tag
    """
    k = 0
    while k < len(t1) and k < len(t2) and t1[k] == t2[k]:
        k += 1
    if k == len(t1) or k == len(t2):
        return False
    a, b = t1[k], t2[k]
    if isinstance(a, ProbL) and isinstance(b, ProbR):
        return a.tag == b.tag
    if isinstance(a, ProbR) and isinstance(b, ProbL):
        return a.tag == b.tag
    return False


def max_weight_compatible_subset(logic: Logic, traces: Sequence[Trace], pre: BExpr, post: BExpr,
                                 budget: Optional[Budget] = None):
    """
    Branch and bound over traces sorted by weight; pruning uses the
    structural conflict graph and incremental unsatisfiability of the joint
    path condition. Returns (subset, weight, joint condition).
    """
    items = sorted(set(traces), key=lambda t: (-trace_weight(t), trace_key(t)))
    if not items:
        return (), Fraction(0), TRUE
    n = len(items)
    weights = [trace_weight(t) for t in items]
    conds = [path_condition(t, pre, post) for t in items]
    suffix = [Fraction(0)] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + weights[i]
    conflicts = [
        {j for j in range(n) if j != i and not structurally_compatible(items[i], items[j])}
        for i in range(n)
    ]

    session = logic.session
    best_weight, best_subset = Fraction(0), ()
    chosen: List[int] = []
    stack = [('visit', 0, Fraction(0))]
    visits = 0
    while stack:
        action, i, weight = stack.pop()
        if action == 'undo':
            chosen.pop()
            session.pop()
            continue
        visits += 1
        if budget is not None and visits % 64 == 0:
            try:
                budget.check_time()
            except BudgetExhausted:
                while chosen:
                    chosen.pop()
                    session.pop()
                raise
        if weight > best_weight:
            best_weight, best_subset = weight, tuple(chosen)
        if i == n or weight + suffix[i] <= best_weight:
            continue
        stack.append(('visit', i + 1, weight))
        if conflicts[i] & set(chosen):
            continue
        session.push()
        session.assert_formula(conds[i])
        if session.check():
            chosen.append(i)
            stack.append(('undo', i, Fraction(0)))
            stack.append(('visit', i + 1, weight + weights[i]))
        else:
            session.pop()

    subset = tuple(items[i] for i in best_subset)
    if not subset:
        return (), Fraction(0), TRUE
    cond = simplify(And(tuple(conds[i] for i in best_subset)))
    return subset, best_weight, cond


def check_counterexample(cex: Counterexample, pre: BExpr, post: BExpr, beta: Fraction,
                         logic: Optional[Logic] = None):
    """
    Independent re-verification of a counterexample; raises InvariantViolation
    """
    traces = cex.traces
    if not traces:
        raise InvariantViolation("counterexample without traces")
    for i, t1 in enumerate(traces):
        for t2 in traces[i + 1:]:
            if not structurally_compatible(t1, t2):
                raise InvariantViolation(
                    f"incompatible traces {format_trace(t1)} and {format_trace(t2)}"
                )
    total = sum((trace_weight(t) for t in traces), Fraction(0))
    if total != cex.total_weight or total <= beta:
        raise InvariantViolation(f"counterexample weight {total} does not exceed {beta}")
    if not cex.witness.satisfies(pre):
        raise InvariantViolation("witness violates the pre-condition")
    for trace in traces:
        final = eval_trace(trace, cex.witness)
        if final.is_bottom or final.satisfies(post):
            raise InvariantViolation(f"witness does not drive {format_trace(trace)} to a violation")
    if logic is not None and not logic.is_sat(cex.joint_path_cond):
        raise InvariantViolation("joint path condition is unsatisfiable")


def build_counterexample(logic: Logic, subset, weight: Fraction, cond: Predicate,
                         pre: BExpr, post: BExpr, beta: Fraction) -> Counterexample:
    model = logic.check_sat(cond).model
    names = set(bexpr_vars(pre)) | set(bexpr_vars(post))
    for t in subset:
        names |= trace_vars(t)
    cex = Counterexample(tuple(subset), weight, cond, complete_model(model, names))
    check_counterexample(cex, pre, post, beta, logic)
    return cex


def verify_candidate(logic: Logic, cand: Pcfa, pre: BExpr, post: BExpr, beta: Fraction,
                     budget: Optional[Budget] = None) -> Union[Counterexample, SpuriousReport]:
    """
    Enumerate the candidate's traces by weight until either a compatible
    violating subset exceeds beta or the unenumerated mass cannot lift the
    best subset above beta
    """
    budget = budget or Budget()
    batch = settings.VERIFIER_MAXSMT_BATCH
    mass = mc_accepting_mass(cand)
    report = SpuriousReport(remaining=mass)
    if mass <= beta:
        logger.debug("candidate mass %s <= %s, spurious without enumeration", mass, beta)
        return report

    best = ((), Fraction(0), TRUE)
    stale, fresh = False, 0
    violating_mass = Fraction(0)

    def refresh():
        nonlocal best, stale, fresh
        best = max_weight_compatible_subset(logic, report.violating, pre, post, budget)
        stale, fresh = False, 0

    def outcome():
        subset, weight, cond = best
        if weight > beta:
            return build_counterexample(logic, subset, weight, cond, pre, post, beta)
        if weight + report.remaining <= beta:
            report.max_subset, report.best_weight, report.split_predicate = subset, weight, cond
            return report
        return None

    enumerated = 0
    for trace, weight in enumerate_by_weight(cand, empty_general()):
        enumerated += 1
        if enumerated > budget.max_traces:
            raise BudgetExhausted(f"more than {budget.max_traces} traces enumerated")
        budget.check_time()
        report.remaining -= weight
        verdict = classify_trace(logic, trace, pre, post)
        if verdict.violating:
            report.violating.append(trace)
            violating_mass += weight
            stale, fresh = True, fresh + 1
        else:
            report.non_violating.append(trace)

        if stale and (fresh >= batch or report.remaining < beta):
            refresh()
            result = outcome()
            if result is not None:
                return result
        if best[1] + report.remaining <= beta or violating_mass + report.remaining <= beta:
            if stale:
                refresh()
            result = outcome()
            if result is not None:
                return result

    if stale:
        refresh()
    report.remaining = Fraction(0)
    result = outcome()
    return result if result is not None else report
