"""
Predicates, weakest-precondition transformers, Hoare-triple checking and
interpolation strategies
"""
import logging
from dataclasses import dataclass
from functools import reduce
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

from ..exceptions import ContractError, SolverError
from .core import AssignStatement, Assume, Statement, Valuation, bexpr_key, format_trace
from .smt import SatResult, SmtSession
from .surface import (
    FALSE, TRUE, And, BExpr, BinOp, BoolConst, Cmp, Const, Expr, Not, Or, Var,
    bexpr_vars, expr_vars, format_bexpr,
)

logger = logging.getLogger(__name__)

Predicate = BExpr


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute_expr(e: Expr, var: str, repl: Expr) -> Expr:
    if isinstance(e, Var):
        return repl if e.name == var else e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute_expr(e.left, var, repl), substitute_expr(e.right, var, repl))
    return e


def substitute(b: BExpr, var: str, repl: Expr) -> BExpr:
    """
    b[var / repl]
    """
    if isinstance(b, Cmp):
        return Cmp(b.op, substitute_expr(b.left, var, repl), substitute_expr(b.right, var, repl))
    if isinstance(b, Not):
        return Not(substitute(b.arg, var, repl))
    if isinstance(b, And):
        return And(tuple(substitute(a, var, repl) for a in b.args))
    if isinstance(b, Or):
        return Or(tuple(substitute(a, var, repl) for a in b.args))
    return b


def rename_vars(b: BExpr, mapping: Dict[str, str]) -> BExpr:
    for old, new in mapping.items():
        b = substitute(b, old, Var(new))
    return b


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

class NonLinear(Exception):
    pass


def linearize(e: Expr) -> Tuple[Dict[str, int], int]:
    """
    Coefficient map and constant of a linear expression
    """
    if isinstance(e, Const):
        return {}, e.value
    if isinstance(e, Var):
        return {e.name: 1}, 0
    lc, lk = linearize(e.left)
    rc, rk = linearize(e.right)
    if e.op == '*':
        if lc and rc:
            raise NonLinear()
        coeffs, scale = (rc, lk) if not lc else (lc, rk)
        const = lk * rk
        return {v: c * scale for v, c in coeffs.items() if c * scale}, const
    sign = 1 if e.op == '+' else -1
    coeffs = dict(lc)
    for v, c in rc.items():
        coeffs[v] = coeffs.get(v, 0) + sign * c
    return {v: c for v, c in coeffs.items() if c}, lk + sign * rk


def linear_expr(coeffs: Dict[str, int]) -> Expr:
    result: Optional[Expr] = None
    for name in sorted(coeffs):
        c = coeffs[name]
        magnitude = abs(c)
        term = Var(name) if magnitude == 1 else BinOp('*', Const(magnitude), Var(name))
        if result is None:
            result = term if c > 0 else BinOp('*', Const(c), Var(name))
        else:
            result = BinOp('+' if c > 0 else '-', result, term)
    return result if result is not None else Const(0)


NEGATED_OP = {'=': '!=', '!=': '=', '<': '>=', '<=': '>', '>': '<=', '>=': '<'}


def normalize_cmp(op: str, left: Expr, right: Expr) -> BExpr:
    """
    Canonical form  sum(c_i * x_i) op k  with op in {=, !=, <=}
    """
    try:
        lc, lk = linearize(left)
        rc, rk = linearize(right)
    except NonLinear:
        return Cmp(op, left, right)
    coeffs = dict(lc)
    for v, c in rc.items():
        coeffs[v] = coeffs.get(v, 0) - c
    coeffs = {v: c for v, c in coeffs.items() if c}
    const = rk - lk  # sum coeffs*x  op  const

    if op in ('>', '>='):
        coeffs = {v: -c for v, c in coeffs.items()}
        const = -const
        op = '<' if op == '>' else '<='
    if op == '<':
        op, const = '<=', const - 1

    if not coeffs:
        if op == '=':
            return BoolConst(const == 0)
        if op == '!=':
            return BoolConst(const != 0)
        return BoolConst(0 <= const)

    divisor = reduce(gcd, (abs(c) for c in coeffs.values()))
    if op in ('=', '!='):
        if const % divisor:
            return BoolConst(op == '!=')
        if coeffs[min(coeffs)] < 0:
            coeffs = {v: -c for v, c in coeffs.items()}
            const = -const
    else:
        const = const // divisor
    coeffs = {v: c // divisor for v, c in coeffs.items()}
    if op in ('=', '!='):
        const = const // divisor
    return Cmp(op, linear_expr(coeffs), Const(const))


def simplify(b: BExpr) -> BExpr:
    """
    Constant folding, linear normalization of comparisons and flattening of
    conjunctions and disjunctions
    """
    if isinstance(b, BoolConst):
        return b
    if isinstance(b, Cmp):
        return normalize_cmp(b.op, b.left, b.right)
    if isinstance(b, Not):
        arg = b.arg
        if isinstance(arg, Not):
            return simplify(arg.arg)
        if isinstance(arg, Cmp):
            return normalize_cmp(NEGATED_OP[arg.op], arg.left, arg.right)
        inner = simplify(arg)
        if isinstance(inner, BoolConst):
            return BoolConst(not inner.value)
        if isinstance(inner, Cmp):
            return normalize_cmp(NEGATED_OP[inner.op], inner.left, inner.right)
        if isinstance(inner, Not):
            return inner.arg
        return Not(inner)

    is_and = isinstance(b, And)
    unit, zero = (TRUE, FALSE) if is_and else (FALSE, TRUE)
    kind = And if is_and else Or
    parts = {}
    for arg in b.args:
        arg = simplify(arg)
        if arg == zero:
            return zero
        if arg == unit:
            continue
        for part in (arg.args if isinstance(arg, kind) else (arg,)):
            parts[bexpr_key(part)] = part
    for key, part in parts.items():
        negation = simplify(Not(part))
        if bexpr_key(negation) in parts:
            return zero
    if not parts:
        return unit
    if len(parts) == 1:
        return next(iter(parts.values()))
    return kind(tuple(parts[k] for k in sorted(parts)))


def conjuncts(b: BExpr) -> List[BExpr]:
    b = simplify(b)
    if isinstance(b, And):
        return list(b.args)
    if b == TRUE:
        return []
    return [b]


def implies_formula(a: BExpr, b: BExpr) -> BExpr:
    return Or((Not(a), b))


# ---------------------------------------------------------------------------
# Transformers
# ---------------------------------------------------------------------------

def hoare_wp(s: Statement, q: Predicate) -> Predicate:
    if isinstance(s, AssignStatement):
        return simplify(substitute(q, s.var, s.expr))
    if isinstance(s, Assume):
        return simplify(implies_formula(s.cond, q))
    return q


def path_wp(s: Statement, q: Predicate) -> Predicate:
    if isinstance(s, AssignStatement):
        return simplify(substitute(q, s.var, s.expr))
    if isinstance(s, Assume):
        return simplify(And((s.cond, q)))
    return q


def hoare_wp_trace(trace: Sequence[Statement], q: Predicate) -> Predicate:
    for s in reversed(trace):
        q = hoare_wp(s, q)
    return q


def path_wp_trace(trace: Sequence[Statement], q: Predicate) -> Predicate:
    for s in reversed(trace):
        q = path_wp(s, q)
    return q


@dataclass(frozen=True)
class TaggedTrace:
    """
    φ0 σ1 φ1 ... σn φn
    """
    predicates: Tuple[Predicate, ...]
    statements: Tuple[Statement, ...]

    def segments(self):
        for i, s in enumerate(self.statements):
            yield self.predicates[i], s, self.predicates[i + 1]

    def __str__(self):
        parts = [f"{{{format_bexpr(self.predicates[0])}}}"]
        for i, s in enumerate(self.statements):
            parts.append(str(s))
            parts.append(f"{{{format_bexpr(self.predicates[i + 1])}}}")
        return ' '.join(parts)


# ---------------------------------------------------------------------------
# Solver-backed reasoning
# ---------------------------------------------------------------------------

INTERPOLATION_STRATEGIES = ('auto', 'solver', 'sp', 'wp')


class Logic:
    """
    Engine-local reasoning front end: satisfiability, validity and Hoare
    triples over one solver session, with query caching
    """

    def __init__(self, session: SmtSession, strategy: str = 'auto'):
        if strategy not in INTERPOLATION_STRATEGIES:
            raise ContractError(f"unknown interpolation strategy {strategy!r}")
        self.session = session
        self.strategy = strategy
        self.hoare_cache: Dict[tuple, bool] = {}

    def check_sat(self, p: Predicate) -> SatResult:
        p = simplify(p)
        if p == FALSE:
            return SatResult(False)
        return self.session.check_sat(p)

    def is_sat(self, p: Predicate) -> bool:
        return self.check_sat(p).sat

    def implies(self, a: Predicate, b: Predicate) -> bool:
        return not self.is_sat(And((a, Not(b))))

    def equivalent(self, a: Predicate, b: Predicate) -> bool:
        return self.implies(a, b) and self.implies(b, a)

    def counter_model(self, a: Predicate, b: Predicate) -> Optional[Valuation]:
        """
        A state satisfying a but not b, or None when a implies b
        """
        result = self.check_sat(And((a, Not(b))))
        return result.model if result.sat else None

    def hoare_valid(self, p: Predicate, s: Statement, q: Predicate) -> bool:
        key = (bexpr_key(simplify(p)), s.sort_key(), bexpr_key(simplify(q)))
        if key not in self.hoare_cache:
            self.hoare_cache[key] = self.implies(p, hoare_wp(s, q))
        return self.hoare_cache[key]

    # -- interpolation ------------------------------------------------------

    def validate_tagging(self, tt: TaggedTrace, pre: Predicate, post: Predicate) -> bool:
        if not self.implies(pre, tt.predicates[0]):
            return False
        if not self.implies(tt.predicates[-1], post):
            return False
        return all(self.hoare_valid(p, s, q) for p, s, q in tt.segments())

    def sequence_interpolants(self, trace: Sequence[Statement], pre: Predicate,
                              post: Predicate) -> TaggedTrace:
        """
        Tag a non-violating trace with predicates forming valid Hoare triples.
        Under the auto strategy an infeasible trace is tagged against False on
        its shortest infeasible prefix, and every other tagging is weakened
        conjunct by conjunct.
        """
        from .core import path_condition

        trace = tuple(trace)
        if self.is_sat(path_condition(trace, pre, post)):
            raise ContractError(f"cannot interpolate violating trace {format_trace(trace)}")

        if self.strategy == 'auto':
            cut = self.infeasible_prefix(trace, pre)
            if cut is not None:
                return self.infeasibility_tagging(trace, cut)
            return self.weaken_tagging(self.chain_tagging(trace, pre, post), post)
        return self.chain_tagging(trace, pre, post)

    def chain_tagging(self, trace: Tuple[Statement, ...], pre: Predicate, post: Predicate) -> TaggedTrace:
        chain = {
            'auto': ('solver', 'sp', 'wp'),
            'solver': ('solver', 'wp'),
            'sp': ('sp', 'wp'),
            'wp': ('wp',),
        }[self.strategy]
        for name in chain:
            if name == 'solver' and not self.session.interpolation:
                continue
            if name == 'wp':
                return self.wp_tagging(trace, post)
            try:
                tt = self.solver_tagging(trace, pre, post) if name == 'solver' \
                    else self.sp_tagging(trace, pre)
            except SolverError as e:
                logger.debug("%s interpolation failed: %s", name, e)
                continue
            if tt is not None and self.validate_tagging(tt, pre, post):
                return tt
            logger.debug("%s interpolants rejected for %s", name, format_trace(trace))
        return self.wp_tagging(trace, post)

    def infeasible_prefix(self, trace: Tuple[Statement, ...], pre: Predicate) -> Optional[int]:
        """
        Length of the shortest prefix no pre-state can execute, or None for a
        feasible trace; feasibility only shrinks as the prefix grows
        """
        def feasible(k):
            return self.is_sat(And((pre, path_wp_trace(trace[:k], TRUE))))

        if feasible(len(trace)):
            return None
        lo, hi = 0, len(trace)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        return hi

    def infeasibility_tagging(self, trace: Tuple[Statement, ...], cut: int) -> TaggedTrace:
        """
        wp chain from False over trace[:cut], False after it; valid labels
        collapse to True
        """
        q = FALSE
        preds = [q]
        for s in reversed(trace[:cut]):
            q = hoare_wp(s, q)
            if q != TRUE and not self.is_sat(Not(q)):
                q = TRUE
            preds.append(q)
        preds.reverse()
        preds.extend([FALSE] * (len(trace) - cut))
        return TaggedTrace(tuple(preds), trace)

    def weaken_tagging(self, tt: TaggedTrace, post: Predicate) -> TaggedTrace:
        """
        Drop every conjunct the chain does not need, last position first
        """
        preds = list(tt.predicates)
        n = len(tt.statements)
        for i in range(n, -1, -1):
            kept = conjuncts(preds[i])
            for part in list(kept):
                rest = [c for c in kept if c is not part]
                candidate = simplify(And(tuple(rest))) if rest else TRUE
                if i == n:
                    needed = not self.implies(candidate, post)
                else:
                    needed = not self.hoare_valid(candidate, tt.statements[i], preds[i + 1])
                if not needed:
                    kept = rest
            preds[i] = simplify(And(tuple(kept))) if kept else TRUE
        return TaggedTrace(tuple(preds), tt.statements)

    def wp_tagging(self, trace: Tuple[Statement, ...], post: Predicate) -> TaggedTrace:
        preds = [simplify(post)]
        for s in reversed(trace):
            preds.append(hoare_wp(s, preds[-1]))
        return TaggedTrace(tuple(reversed(preds)), trace)

    def strongest_post(self, s: Statement, p: Predicate) -> Predicate:
        """
        Over-approximate strongest postcondition; overwritten variables are
        projected away unless the assignment can be inverted
        """
        if p == FALSE:
            return FALSE
        if isinstance(s, Assume):
            result = simplify(And((p, s.cond)))
            return result if self.is_sat(result) else FALSE
        if not isinstance(s, AssignStatement):
            return p
        var, expr = s.var, s.expr
        try:
            coeffs, const = linearize(expr)
        except NonLinear:
            coeffs, const = None, 0
        if coeffs is not None and coeffs.get(var) in (1, -1):
            rest = {v: c for v, c in coeffs.items() if v != var}
            rest_expr = BinOp('+', linear_expr(rest), Const(const)) if rest else Const(const)
            if coeffs[var] == 1:
                inverse = BinOp('-', Var(var), rest_expr)
            else:
                inverse = BinOp('-', rest_expr, Var(var))
            return simplify(substitute(p, var, inverse))
        kept = [c for c in conjuncts(p) if var not in bexpr_vars(c)]
        if var not in expr_vars(expr):
            kept.append(Cmp('=', Var(var), expr))
        return simplify(And(tuple(kept))) if kept else TRUE

    def sp_tagging(self, trace: Tuple[Statement, ...], pre: Predicate) -> TaggedTrace:
        preds = [simplify(pre)]
        for s in trace:
            preds.append(self.strongest_post(s, preds[-1]))
        return TaggedTrace(tuple(preds), trace)

    def solver_tagging(self, trace: Tuple[Statement, ...], pre: Predicate,
                       post: Predicate) -> Optional[TaggedTrace]:
        """
        Sequence interpolants over the SSA path formula pre, σ1 .. σn, ¬post
        """
        version: Dict[str, int] = {}

        def current(b: BExpr) -> BExpr:
            return rename_vars(b, {v: f"{v}@{version.get(v, 0)}" for v in bexpr_vars(b)})

        def current_expr(e: Expr) -> Expr:
            for v in expr_vars(e):
                e = substitute_expr(e, v, Var(f"{v}@{version.get(v, 0)}"))
            return e

        parts = [current(pre)]
        for s in trace:
            if isinstance(s, Assume):
                parts.append(current(s.cond))
            elif isinstance(s, AssignStatement):
                rhs = current_expr(s.expr)
                version[s.var] = version.get(s.var, 0) + 1
                parts.append(Cmp('=', Var(f"{s.var}@{version[s.var]}"), rhs))
            else:
                parts.append(TRUE)
        parts.append(current(Not(post)))

        names = [f"IP_{i}" for i in range(len(parts))]
        with self.session.scope():
            for name, part in zip(names, parts):
                self.session.assert_formula(part, name=name)
            if self.session.check():
                return None
            interpolants = self.session.get_interpolants(names)
        if len(interpolants) != len(trace) + 1:
            return None
        preds = tuple(
            simplify(rename_vars(i, {n: n.split('@')[0] for n in bexpr_vars(i)}))
            for i in interpolants
        )
        return TaggedTrace(preds, trace)
