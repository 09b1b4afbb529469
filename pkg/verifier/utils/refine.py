"""
Refinement automata: Floyd-Hoare generalization, ordered generalization of
violating traces, refinement updates, pre-condition splitting and value
analysis
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from ..exceptions import BudgetExhausted, ContractError, InvariantViolation
from .automata import complement, union, union_all
from .cexcheck import Budget, trace_vars
from .core import (
    AssignStatement, Assume, BOTTOM, GeneralPcfa, Pcfa, Statement, Trace, Valuation,
    bexpr_key, eval_bexpr, eval_statement, trace_key,
)
from .logic import Logic, Predicate, TaggedTrace, hoare_wp, simplify
from .surface import FALSE, TRUE, And, Cmp, Const, Not, Or, Var, bexpr_vars, expr_vars, format_bexpr

logger = logging.getLogger(__name__)


@dataclass
class FloydHoareAutomaton:
    base: GeneralPcfa
    labels: Dict[int, Predicate]


@dataclass
class OrderedFloydHoareAutomaton(FloydHoareAutomaton):
    priorities: Dict[int, int] = field(default_factory=dict)


@dataclass
class RefinementState:
    """
    Refinement automaton whose initial edges are the split conditions
    """
    v: GeneralPcfa
    splits: Tuple[Predicate, ...]


@dataclass
class SplitOutcome:
    state: RefinementState
    relabeled: Dict[Trace, Trace]
    cand: Optional[Pcfa]
    noop: bool = False
    positive: Optional[Predicate] = None
    negative: Optional[Predicate] = None


@dataclass
class Exhausted:
    reason: str
    partial: Optional[RefinementState] = None


# ---------------------------------------------------------------------------
# Initial state and synchronisation
# ---------------------------------------------------------------------------

def initial_refinement(alphabet: Iterable[Statement], pre: Predicate) -> RefinementState:
    sigma = frozenset(alphabet) | {Assume(pre)}
    v = GeneralPcfa(
        locations=frozenset([0, 1]),
        alphabet=sigma,
        delta=frozenset({(0, Assume(pre), 1)} | {(1, s, 1) for s in sigma}),
        init=0,
        ends=frozenset([1]),
    )
    return RefinementState(v, (pre,))


def sync_program(a: Pcfa, splits: Sequence[Predicate]) -> Pcfa:
    """
    Prefix the program with a fresh initial location and one assume edge per
    split condition
    """
    fresh = max(a.locations) + 1
    delta = dict(a.delta)
    for split in splits:
        delta[(fresh, Assume(split))] = a.init
    return Pcfa(
        locations=a.locations | {fresh},
        alphabet=a.alphabet | {Assume(s) for s in splits},
        delta=delta,
        init=fresh,
        end=a.end,
    )


def check_split_set(logic: Logic, splits: Sequence[Predicate], pre: Predicate):
    for i, s1 in enumerate(splits):
        for s2 in splits[i + 1:]:
            if logic.is_sat(And((s1, s2))):
                raise InvariantViolation("split conditions overlap")
    if not logic.equivalent(Or(tuple(splits)) if len(splits) > 1 else splits[0], pre):
        raise InvariantViolation("split conditions do not cover the pre-condition")


# ---------------------------------------------------------------------------
# Generalization
# ---------------------------------------------------------------------------

class _ImplicationOracle:
    """
    Decides label(src) ⇒ condition. Counter-models of refuted implications
    are kept per source label and refute later candidates without a solver
    call.
    """
    SAMPLE_LIMIT = 32

    def __init__(self, logic: Logic, labels: Dict[int, Predicate], names: Set[str]):
        self.logic = logic
        self.labels = labels
        self.names = names
        self.samples: Dict[int, List[Valuation]] = {}
        self.memo: Dict[tuple, bool] = {}

    def remember(self, src: int, model: Valuation):
        values = dict.fromkeys(self.names, 0)
        values.update(model.as_dict())
        states = self.samples.setdefault(src, [])
        states.append(Valuation(values))
        if len(states) > self.SAMPLE_LIMIT:
            del states[0]

    def implies(self, src: int, cond: Predicate) -> bool:
        key = (src, bexpr_key(cond))
        if key not in self.memo:
            if any(not eval_bexpr(cond, v) for v in self.samples.get(src, ())):
                self.memo[key] = False
            else:
                model = self.logic.counter_model(self.labels[src], cond)
                if model is not None:
                    self.remember(src, model)
                self.memo[key] = model is None
        return self.memo[key]


def _saturate(logic: Logic, labels: Dict[int, Predicate], alphabet: Iterable[Statement],
              allowed=lambda src, dst: True, budget: Optional[Budget] = None) -> Set[Tuple[int, Statement, int]]:
    """
    Every valid Hoare triple over the labels. A statement that writes none of
    the target's variables is valid exactly when the source implies the
    target, or for an assume when the source and its guard do.
    """
    sigma = sorted(set(alphabet), key=lambda s: s.sort_key())
    names = set(trace_vars(sigma))
    for p in labels.values():
        names |= bexpr_vars(p)
    oracle = _ImplicationOracle(logic, labels, names)
    keys = {loc: bexpr_key(p) for loc, p in labels.items()}
    delta = set()
    for src, p in labels.items():
        if budget is not None:
            budget.check_time()
        for dst, q in labels.items():
            if not allowed(src, dst):
                continue
            if p == FALSE or q == TRUE:
                delta.update((src, s, dst) for s in sigma)
                continue
            free = bexpr_vars(q)
            entails = True if keys[src] == keys[dst] else None
            for s in sigma:
                if isinstance(s, AssignStatement) and s.var in free:
                    valid = oracle.implies(src, hoare_wp(s, q))
                else:
                    if entails is None:
                        entails = oracle.implies(src, q)
                    valid = entails or (isinstance(s, Assume) and oracle.implies(src, hoare_wp(s, q)))
                if valid:
                    delta.add((src, s, dst))
    return delta


def generalize_nonviolating(logic: Logic, tt: TaggedTrace, alphabet: Iterable[Statement],
                            budget: Optional[Budget] = None) -> FloydHoareAutomaton:
    """
    One location per distinct interpolant plus a False location; every valid
    Hoare triple over the alphabet becomes a transition. The False location
    accepts: a word that reaches it is infeasible.
    """
    index: Dict[tuple, int] = {bexpr_key(FALSE): 0}
    labels: Dict[int, Predicate] = {0: FALSE}
    positions = []
    for p in tt.predicates:
        p = simplify(p)
        key = bexpr_key(p)
        if key not in index:
            index[key] = len(index)
            labels[index[key]] = p
        positions.append(index[key])
    sigma = frozenset(alphabet) | frozenset(tt.statements)
    delta = _saturate(logic, labels, sigma, budget=budget)
    base = GeneralPcfa(
        locations=frozenset(labels),
        alphabet=sigma,
        delta=frozenset(delta),
        init=positions[0],
        ends=frozenset([positions[-1], 0]),
    )
    return FloydHoareAutomaton(base, labels)


def violating_tagging(trace: Sequence[Statement], pre: Predicate, post: Predicate) -> List[Predicate]:
    """
    Backward wp chain anchored at the negated post-condition
    """
    preds = [simplify(Not(post))]
    for s in reversed(trace):
        preds.append(hoare_wp(s, preds[-1]))
    preds.reverse()
    preds[0] = simplify(And((pre, preds[0])))
    return preds


def generalize_violating_finite(logic: Logic, trace: Trace, pre: Predicate, post: Predicate,
                                alphabet: Iterable[Statement],
                                budget: Optional[Budget] = None) -> OrderedFloydHoareAutomaton:
    """
    Acyclic automaton with one location per trace position; transitions must
    be valid Hoare triples and strictly increase the priority
    """
    preds = violating_tagging(trace, pre, post)
    labels = dict(enumerate(preds))
    sigma = frozenset(alphabet) | frozenset(trace)
    delta = _saturate(logic, labels, sigma, allowed=lambda src, dst: src < dst, budget=budget)
    base = GeneralPcfa(
        locations=frozenset(labels),
        alphabet=sigma,
        delta=frozenset(delta),
        init=0,
        ends=frozenset([len(trace)]),
    )
    return OrderedFloydHoareAutomaton(base, labels, priorities={i: i for i in labels})


def ordered_members(ofh: OrderedFloydHoareAutomaton, a: Pcfa, limit: int,
                    budget: Optional[Budget] = None) -> List[Trace]:
    """
    Words accepted by both the ordered automaton and the program, in
    shortlex order; finite because priorities strictly increase. More than
    `limit` members raises BudgetExhausted instead of dropping any.
    """
    g = ofh.base
    words: Set[Trace] = set()
    frontier = {(g.init, a.init, ())}
    while frontier:
        if budget is not None:
            budget.check_time()
        layer = set()
        for n, (loc, aloc, word) in enumerate(frontier):
            if budget is not None and n % 1024 == 1023:
                budget.check_time()
            if loc in g.ends and aloc == a.end and word:
                words.add(word)
                if len(words) > limit:
                    raise BudgetExhausted(f"ordered automaton has more than {limit} members")
            program_edges = dict(a.successors(aloc))
            for stmt, dst in g.out_edges.get(loc, []):
                if ofh.priorities[dst] <= ofh.priorities[loc]:
                    raise InvariantViolation("ordered automaton has a non-increasing edge")
                if stmt in program_edges:
                    layer.add((dst, program_edges[stmt], word + (stmt,)))
        frontier = layer
    return sorted(words, key=trace_key)


# ---------------------------------------------------------------------------
# Refinement updates
# ---------------------------------------------------------------------------

def update_refinement(state: RefinementState, qs: Iterable[FloydHoareAutomaton],
                      budget: Optional[Budget] = None) -> RefinementState:
    """
    V <- complement(complement(V) ∪ Q1 ∪ ... ∪ Qk)
    """
    qs = list(qs)
    if not qs:
        return state
    sigma = set(state.v.alphabet)
    for q in qs:
        sigma |= q.base.alphabet
    covered = union(complement(state.v, sigma, budget), union_all((q.base for q in qs), sigma))
    return RefinementState(complement(covered, sigma, budget), state.splits)


def _replace_initial_edges(g: GeneralPcfa, old: Statement, new: Sequence[Statement]) -> GeneralPcfa:
    """
    Fresh initial location copying the old one's edges, with the edge on
    `old` duplicated onto each statement in `new`
    """
    fresh = max(g.locations) + 1
    delta = set(g.delta)
    for stmt, dst in g.out_edges.get(g.init, []):
        if stmt == old:
            for s in new:
                delta.add((fresh, s, dst))
        else:
            delta.add((fresh, stmt, dst))
    return GeneralPcfa(
        locations=g.locations | {fresh},
        alphabet=g.alphabet | set(new),
        delta=frozenset(delta),
        init=fresh,
        ends=g.ends,
    )


def apply_split(logic: Logic, state: RefinementState, split: Predicate, condition: Predicate,
                subset: Iterable[Trace], others: Iterable[Trace],
                cand: Optional[Pcfa] = None) -> SplitOutcome:
    """
    Replace split by split∧E and split∧¬E in the split set, in V's initial
    edges and in the candidate; relabel traces accordingly
    """
    if split not in state.splits:
        raise ContractError("split predicate is not a member of the split set")
    positive = simplify(And((split, condition)))
    negative = simplify(And((split, Not(condition))))
    if not logic.is_sat(positive) or not logic.is_sat(negative):
        return SplitOutcome(state, {}, cand, noop=True)

    old = Assume(split)
    pos_stmt, neg_stmt = Assume(positive), Assume(negative)
    splits = []
    for s in state.splits:
        splits.extend([positive, negative] if s == split else [s])
    v = _replace_initial_edges(state.v, old, [pos_stmt, neg_stmt])

    relabeled: Dict[Trace, Trace] = {}
    for trace in subset:
        if trace and trace[0] == old:
            relabeled[trace] = (pos_stmt,) + trace[1:]
    for trace in others:
        if trace and trace[0] == old and trace not in relabeled:
            relabeled[trace] = (neg_stmt,) + trace[1:]

    new_cand = None
    if cand is not None:
        delta = {}
        for (src, stmt), dst in cand.delta.items():
            if src == cand.init and stmt == old:
                delta[(src, pos_stmt)] = dst
                delta[(src, neg_stmt)] = dst
            else:
                delta[(src, stmt)] = dst
        new_cand = Pcfa(cand.locations, cand.alphabet | {pos_stmt, neg_stmt}, delta, cand.init, cand.end)

    logger.info("split %s on %s", format_bexpr(split), format_bexpr(condition))
    return SplitOutcome(RefinementState(v, tuple(splits)), relabeled, new_cand,
                        positive=positive, negative=negative)


# ---------------------------------------------------------------------------
# Value analysis
# ---------------------------------------------------------------------------

def _uses(s: Statement) -> FrozenSet[str]:
    if isinstance(s, AssignStatement):
        return expr_vars(s.expr)
    if isinstance(s, Assume):
        return bexpr_vars(s.cond)
    return frozenset()


def live_variables(a: Pcfa, post: Predicate) -> Dict[int, FrozenSet[str]]:
    """
    Variables read before being written on some path, counting the
    post-condition as read at the ending location
    """
    live = {loc: frozenset() for loc in a.locations}
    live[a.end] = bexpr_vars(post)
    changed = True
    while changed:
        changed = False
        for loc in sorted(a.locations):
            if loc == a.end:
                continue
            result = frozenset()
            for stmt, dst in a.successors(loc):
                out = live[dst]
                if isinstance(stmt, AssignStatement):
                    out = out - {stmt.var}
                result |= out | _uses(stmt)
            if result != live[loc]:
                live[loc] = result
                changed = True
    return live


def initial_valuations(logic: Logic, pre: Predicate, names: Sequence[str],
                       limit: int) -> Optional[List[Valuation]]:
    """
    Models of pre projected onto the given variables; None once more than
    limit distinct projections exist
    """
    names = sorted(names)
    found: List[Valuation] = []
    query = pre
    while True:
        result = logic.check_sat(query)
        if not result.sat:
            return found
        values = {n: result.model.get(n, 0) for n in names}
        found.append(Valuation(values))
        if len(found) > limit:
            return None
        if not names:
            return found
        pin = And(tuple(Cmp('=', Var(n), Const(values[n])) for n in names))
        query = And((query, Not(pin)))


def valuation_predicate(v: Valuation) -> Predicate:
    parts = tuple(Cmp('=', Var(n), Const(value)) for n, value in v.items())
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else And(parts)


def value_analysis_refine(logic: Logic, a: Pcfa, pre: Predicate, post: Predicate,
                          state_limit: int, keep_partial: bool = False):
    """
    Explicit-valuation analysis of the program. Returns a RefinementState
    whose splits pin the live initial variables, or Exhausted.
    """
    live = live_variables(a, post)[a.init]
    seeds = initial_valuations(logic, pre, live, state_limit)
    if seeds is None:
        return Exhausted(f"pre-condition admits more than {state_limit} initial valuations")

    reached: Dict[int, Set[Valuation]] = {loc: set() for loc in a.locations}
    reached[a.init] = set(seeds)
    distinct = set(seeds)
    exhausted = False
    changed = True
    while changed and not exhausted:
        changed = False
        for loc in sorted(a.locations):
            for v in list(reached[loc]):
                for stmt, dst in a.successors(loc):
                    nxt = eval_statement(stmt, v)
                    if nxt is BOTTOM or nxt in reached[dst]:
                        continue
                    reached[dst].add(nxt)
                    distinct.add(nxt)
                    changed = True
                    if len(distinct) > state_limit:
                        exhausted = True
                        break
                if exhausted:
                    break
            if exhausted:
                break

    if exhausted and not keep_partial:
        return Exhausted(f"more than {state_limit} valuations reached")

    state = _valuation_automaton(a, pre, post, seeds, reached, partial=exhausted)
    if exhausted:
        return Exhausted(f"more than {state_limit} valuations reached", partial=state)
    logger.info("value analysis converged with %d valuations", len(distinct))
    return state


def _valuation_automaton(a: Pcfa, pre: Predicate, post: Predicate, seeds: List[Valuation],
                         reached: Dict[int, Set[Valuation]], partial: bool) -> RefinementState:
    ids: Dict[Tuple[int, Valuation], int] = {}

    def node(loc, v):
        if (loc, v) not in ids:
            ids[(loc, v)] = len(ids) + 1
        return ids[(loc, v)]

    top = -1
    delta = set()
    splits = []
    for seed in sorted(seeds, key=lambda v: v.items()):
        split = simplify(And((pre, valuation_predicate(seed))))
        splits.append(split)
        delta.add((0, Assume(split), node(a.init, seed)))
    for loc in sorted(a.locations):
        for v in sorted(reached[loc], key=lambda v: v.items()):
            for stmt, dst in a.successors(loc):
                nxt = eval_statement(stmt, v)
                if nxt is BOTTOM:
                    continue
                if nxt in reached[dst]:
                    delta.add((node(loc, v), stmt, node(dst, nxt)))
                elif partial:
                    delta.add((node(loc, v), stmt, top))
    ends = {node(a.end, v) for v in reached[a.end] if not v.satisfies(post)}
    sigma = set(a.alphabet) | {Assume(s) for s in splits}
    locations = {0} | set(ids.values())
    if partial:
        locations.add(top)
        ends.add(top)
        delta |= {(top, s, top) for s in sigma}
    v = GeneralPcfa(
        locations=frozenset(locations),
        alphabet=frozenset(sigma),
        delta=frozenset(delta),
        init=0,
        ends=frozenset(ends),
    )
    return RefinementState(v, tuple(splits))
