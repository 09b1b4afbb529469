"""
Statements, valuations, PCFA representation and program-to-PCFA compilation
"""
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx

from ..exceptions import ContractError, InvariantViolation
from .surface import (
    And, Assign, BExpr, BinOp, BoolConst, Cmp, Const, Expr, Ite, NondetChoice, Not, Or,
    ProbChoice, Program, Seq, Skip, Var, While, format_bexpr, format_expr,
)


# ---------------------------------------------------------------------------
# Statement alphabet
# ---------------------------------------------------------------------------

def expr_key(e: Expr) -> tuple:
    if isinstance(e, Const):
        return (0, e.value)
    if isinstance(e, Var):
        return (1, e.name)
    return (2, e.op, expr_key(e.left), expr_key(e.right))


def bexpr_key(b: BExpr) -> tuple:
    if isinstance(b, BoolConst):
        return (0, b.value)
    if isinstance(b, Cmp):
        return (1, b.op, expr_key(b.left), expr_key(b.right))
    if isinstance(b, Not):
        return (2, bexpr_key(b.arg))
    rank = 3 if isinstance(b, And) else 4
    return (rank, tuple(bexpr_key(a) for a in b.args))


@dataclass(frozen=True)
class SkipStatement:
    def sort_key(self) -> tuple:
        return (0,)

    def __str__(self):
        return 'skip'


@dataclass(frozen=True)
class AssignStatement:
    var: str
    expr: Expr

    def sort_key(self) -> tuple:
        return (1, self.var, expr_key(self.expr))

    def __str__(self):
        return f"{self.var} := {format_expr(self.expr)}"


@dataclass(frozen=True)
class Assume:
    cond: BExpr

    def sort_key(self) -> tuple:
        return (2, bexpr_key(self.cond))

    def __str__(self):
        return f"assume {format_bexpr(self.cond)}"


@dataclass(frozen=True)
class ProbL:
    tag: int

    def sort_key(self) -> tuple:
        return (3, self.tag)

    def __str__(self):
        return f"probL({self.tag})"


@dataclass(frozen=True)
class ProbR:
    tag: int

    def sort_key(self) -> tuple:
        return (4, self.tag)

    def __str__(self):
        return f"probR({self.tag})"


@dataclass(frozen=True)
class Nondet:
    tag: int

    def sort_key(self) -> tuple:
        return (5, self.tag)

    def __str__(self):
        return f"nondet({self.tag})"


Statement = Union[SkipStatement, AssignStatement, Assume, ProbL, ProbR, Nondet]
Trace = Tuple[Statement, ...]

SKIP = SkipStatement()


def is_probabilistic(s: Statement) -> bool:
    return isinstance(s, (ProbL, ProbR))


def trace_key(trace: Sequence[Statement]) -> tuple:
    """
    Shortlex key: length first, then the fixed statement order
    """
    return (len(trace), tuple(s.sort_key() for s in trace))


def format_trace(trace: Sequence[Statement]) -> str:
    return '[' + ', '.join(str(s) for s in trace) + ']'


# ---------------------------------------------------------------------------
# Valuations and evaluation
# ---------------------------------------------------------------------------

class Valuation:
    """
    Immutable map from variable names to integers. Variables missing from the
    map are unset; reading one is a contract error.
    """
    is_bottom = False

    __slots__ = ('_map', '_items')

    def __init__(self, mapping: Optional[Mapping[str, int]] = None):
        self._map = dict(mapping or {})
        self._items = tuple(sorted(self._map.items()))

    def __getitem__(self, name: str) -> int:
        try:
            return self._map[name]
        except KeyError:
            raise ContractError(f"variable {name} is unset")

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def get(self, name: str, default=None):
        return self._map.get(name, default)

    def items(self):
        return self._items

    def as_dict(self) -> Dict[str, int]:
        return dict(self._map)

    def updated(self, name: str, value: int) -> 'Valuation':
        new_map = dict(self._map)
        new_map[name] = value
        return Valuation(new_map)

    def satisfies(self, b: BExpr) -> bool:
        return eval_bexpr(b, self)

    def __eq__(self, other):
        return isinstance(other, Valuation) and self._items == other._items

    def __hash__(self):
        return hash(self._items)

    def __repr__(self):
        return '{' + ', '.join(f"{k}={v}" for k, v in self._items) + '}'


class BottomValuation:
    """
    The absorbing non-sense state; satisfies no predicate
    """
    is_bottom = True

    def satisfies(self, b: BExpr) -> bool:
        return False

    def __repr__(self):
        return '⊥'


BOTTOM = BottomValuation()


def eval_expr(e: Expr, v: Valuation) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return v[e.name]
    left = eval_expr(e.left, v)
    right = eval_expr(e.right, v)
    if e.op == '+':
        return left + right
    if e.op == '-':
        return left - right
    return left * right


CMP_FUNCS = {
    '=': lambda a, b: a == b,
    '!=': lambda a, b: a != b,
    '<': lambda a, b: a < b,
    '<=': lambda a, b: a <= b,
    '>': lambda a, b: a > b,
    '>=': lambda a, b: a >= b,
}


def eval_bexpr(b: BExpr, v: Valuation) -> bool:
    if isinstance(b, BoolConst):
        return b.value
    if isinstance(b, Cmp):
        return CMP_FUNCS[b.op](eval_expr(b.left, v), eval_expr(b.right, v))
    if isinstance(b, Not):
        return not eval_bexpr(b.arg, v)
    if isinstance(b, And):
        return all(eval_bexpr(a, v) for a in b.args)
    return any(eval_bexpr(a, v) for a in b.args)


def eval_statement(s: Statement, v):
    """
    One-step semantics; bottom absorbs and a failed assume yields bottom
    """
    if v.is_bottom:
        return BOTTOM
    if isinstance(s, AssignStatement):
        return v.updated(s.var, eval_expr(s.expr, v))
    if isinstance(s, Assume):
        return v if eval_bexpr(s.cond, v) else BOTTOM
    return v


def eval_trace(trace: Sequence[Statement], v):
    if not trace:
        raise ContractError("traces are non-empty")
    for s in trace:
        v = eval_statement(s, v)
        if v.is_bottom:
            return BOTTOM
    return v


def trace_weight(trace: Iterable[Statement]) -> Fraction:
    coins = sum(1 for s in trace if is_probabilistic(s))
    return Fraction(1, 2 ** coins)


# ---------------------------------------------------------------------------
# Automata
# ---------------------------------------------------------------------------

def _sorted_edges(edges: Iterable[Tuple[Statement, int]]) -> List[Tuple[Statement, int]]:
    return sorted(edges, key=lambda e: (e[0].sort_key(), e[1]))


@dataclass(frozen=True)
class Pcfa:
    """
    Deterministic control-flow automaton with a single ending location
    """
    locations: FrozenSet[int]
    alphabet: FrozenSet[Statement]
    delta: Mapping[Tuple[int, Statement], int]
    init: int
    end: int

    @classmethod
    def empty(cls, alphabet: Iterable[Statement] = ()) -> 'Pcfa':
        return cls(frozenset([0, 1]), frozenset(alphabet), {}, 0, 1)

    @cached_property
    def out_edges(self) -> Dict[int, List[Tuple[Statement, int]]]:
        edges: Dict[int, List[Tuple[Statement, int]]] = {loc: [] for loc in self.locations}
        for (src, stmt), dst in self.delta.items():
            edges[src].append((stmt, dst))
        return {loc: _sorted_edges(out) for loc, out in edges.items()}

    def successors(self, loc: int) -> List[Tuple[Statement, int]]:
        return self.out_edges.get(loc, [])

    def accepts(self, trace: Sequence[Statement]) -> bool:
        if not trace:
            return False
        loc = self.init
        for s in trace:
            nxt = self.delta.get((loc, s))
            if nxt is None:
                return False
            loc = nxt
        return loc == self.end

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.locations)
        g.add_edges_from((src, dst) for (src, _), dst in self.delta.items())
        return g

    def is_empty(self) -> bool:
        return self.end not in nx.descendants(self.graph, self.init)

    @property
    def transition_count(self) -> int:
        return len(self.delta)

    def as_general(self) -> 'GeneralPcfa':
        return GeneralPcfa(
            locations=self.locations,
            alphabet=self.alphabet,
            delta=frozenset((src, stmt, dst) for (src, stmt), dst in self.delta.items()),
            init=self.init,
            ends=frozenset([self.end]),
        )

    def check(self):
        """
        Raise InvariantViolation unless the automaton is a well-formed PCFA
        """
        if self.init not in self.locations or self.end not in self.locations:
            raise InvariantViolation("initial and ending locations must be locations")
        for (src, stmt), dst in self.delta.items():
            if src == self.end:
                raise InvariantViolation(f"ending location has out-edge {stmt}")
            if src not in self.locations or dst not in self.locations:
                raise InvariantViolation("transition leaves the location set")
            if stmt not in self.alphabet:
                raise InvariantViolation(f"statement {stmt} outside the alphabet")


@dataclass(frozen=True)
class GeneralPcfa:
    """
    Unrestricted nondeterministic automaton over statements
    """
    locations: FrozenSet[int]
    alphabet: FrozenSet[Statement]
    delta: FrozenSet[Tuple[int, Statement, int]]
    init: int
    ends: FrozenSet[int]

    @cached_property
    def out_edges(self) -> Dict[int, List[Tuple[Statement, int]]]:
        edges: Dict[int, List[Tuple[Statement, int]]] = {loc: [] for loc in self.locations}
        for src, stmt, dst in self.delta:
            edges[src].append((stmt, dst))
        return {loc: _sorted_edges(out) for loc, out in edges.items()}

    @cached_property
    def edge_index(self) -> Dict[int, Dict[Statement, FrozenSet[int]]]:
        index: Dict[int, Dict[Statement, Set[int]]] = {}
        for src, stmt, dst in self.delta:
            index.setdefault(src, {}).setdefault(stmt, set()).add(dst)
        return {src: {s: frozenset(d) for s, d in out.items()} for src, out in index.items()}

    def step(self, states: FrozenSet[int], stmt: Statement) -> FrozenSet[int]:
        index = self.edge_index
        return frozenset().union(*(index.get(src, {}).get(stmt, ()) for src in states))

    def accepts(self, trace: Sequence[Statement]) -> bool:
        if not trace:
            return False
        states = frozenset([self.init])
        for s in trace:
            states = self.step(states, s)
            if not states:
                return False
        return bool(states & self.ends)

    def is_empty(self) -> bool:
        g = nx.DiGraph()
        g.add_nodes_from(self.locations)
        g.add_edges_from((src, dst) for src, _, dst in self.delta)
        reachable = nx.descendants(g, self.init)
        return not (reachable & self.ends)

    @property
    def transition_count(self) -> int:
        return len(self.delta)


# ---------------------------------------------------------------------------
# Program to PCFA
# ---------------------------------------------------------------------------

class PcfaBuilder:
    """
    Recursive conversion threading the distribution and nondeterminism tag
    counters through the program in evaluation order
    """

    def __init__(self):
        self.counter = itertools.count()
        self.delta: Dict[Tuple[int, Statement], int] = {}
        self.locations = set()

    def new_loc(self) -> int:
        loc = next(self.counter)
        self.locations.add(loc)
        return loc

    def add(self, src: int, stmt: Statement, dst: int):
        if (src, stmt) in self.delta and self.delta[(src, stmt)] != dst:
            raise InvariantViolation(f"conversion produced a nondeterministic edge on {stmt}")
        self.delta[(src, stmt)] = dst

    def conv(self, start: int, end: int, p: Program, i_d: int, i_n: int) -> Tuple[int, int]:
        if isinstance(p, Skip):
            self.add(start, SKIP, end)
            return i_d, i_n
        if isinstance(p, Assign):
            self.add(start, AssignStatement(p.var, p.expr), end)
            return i_d, i_n
        if isinstance(p, (ProbChoice, NondetChoice)):
            left, right = self.new_loc(), self.new_loc()
            i_d, i_n = self.conv(left, end, p.left, i_d, i_n)
            i_d, i_n = self.conv(right, end, p.right, i_d, i_n)
            if isinstance(p, ProbChoice):
                self.add(start, ProbL(i_d), left)
                self.add(start, ProbR(i_d), right)
                return i_d + 1, i_n
            self.add(start, Nondet(i_n), left)
            self.add(start, Nondet(i_n + 1), right)
            return i_d, i_n + 2
        if isinstance(p, Seq):
            middle = self.new_loc()
            i_d, i_n = self.conv(start, middle, p.first, i_d, i_n)
            return self.conv(middle, end, p.second, i_d, i_n)
        if isinstance(p, Ite):
            then_loc, else_loc = self.new_loc(), self.new_loc()
            i_d, i_n = self.conv(then_loc, end, p.then, i_d, i_n)
            i_d, i_n = self.conv(else_loc, end, p.orelse, i_d, i_n)
            self.add(start, Assume(p.cond), then_loc)
            self.add(start, Assume(Not(p.cond)), else_loc)
            return i_d, i_n
        if isinstance(p, While):
            body = self.new_loc()
            i_d, i_n = self.conv(body, start, p.body, i_d, i_n)
            self.add(start, Assume(p.cond), body)
            self.add(start, Assume(Not(p.cond)), end)
            return i_d, i_n
        raise ContractError(f"unknown program node {type(p).__name__}")


def program_to_pcfa(p: Program) -> Pcfa:
    builder = PcfaBuilder()
    init, end = builder.new_loc(), builder.new_loc()
    builder.conv(init, end, p, 0, 0)
    pcfa = Pcfa(
        locations=frozenset(builder.locations),
        alphabet=frozenset(stmt for (_, stmt) in builder.delta),
        delta=dict(builder.delta),
        init=init,
        end=end,
    )
    pcfa.check()
    return pcfa


# ---------------------------------------------------------------------------
# Path conditions
# ---------------------------------------------------------------------------

def path_condition(trace: Sequence[Statement], pre: BExpr, post: BExpr) -> BExpr:
    """
    pre ∧ pathwp(trace, ¬post): satisfiable exactly when the trace can violate
    """
    from .logic import path_wp_trace, simplify

    if not trace:
        raise ContractError("traces are non-empty")
    return simplify(And((pre, path_wp_trace(trace, Not(post)))))


def path_condition_set(traces: Iterable[Sequence[Statement]], pre: BExpr, post: BExpr) -> BExpr:
    from .logic import simplify

    conds = tuple(path_condition(t, pre, post) for t in traces)
    if not conds:
        raise ContractError("path condition of an empty trace set")
    return simplify(And(conds)) if len(conds) > 1 else conds[0]
