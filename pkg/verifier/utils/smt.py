"""
SMT-LIB 2 session over a pluggable transport: an external solver process
talking over standard input/output, or z3 evaluating the same text in-process
"""
import hashlib
import logging
import os
import re
import select
import subprocess
import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Union

from django.conf import settings
from django.core.cache import cache

from ..exceptions import BudgetExhausted, SolverError, SolverUnknown
from .core import Valuation
from .surface import (
    FALSE, TRUE, And, BExpr, BinOp, BoolConst, Cmp, Const, Expr, Not, Or, Var, bexpr_vars,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def symbol(name: str) -> str:
    return f"|{name}|"


def expr_to_smt(e: Expr) -> str:
    if isinstance(e, Const):
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, Var):
        return symbol(e.name)
    return f"({e.op} {expr_to_smt(e.left)} {expr_to_smt(e.right)})"


def to_smtlib(b: BExpr) -> str:
    if isinstance(b, BoolConst):
        return 'true' if b.value else 'false'
    if isinstance(b, Cmp):
        if b.op == '!=':
            return f"(not (= {expr_to_smt(b.left)} {expr_to_smt(b.right)}))"
        return f"({b.op} {expr_to_smt(b.left)} {expr_to_smt(b.right)})"
    if isinstance(b, Not):
        return f"(not {to_smtlib(b.arg)})"
    if not b.args:
        return 'true' if isinstance(b, And) else 'false'
    op = 'and' if isinstance(b, And) else 'or'
    return f"({op} {' '.join(to_smtlib(a) for a in b.args)})"


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------

SEXPR_TOKEN = re.compile(r'\s*(\(|\)|\|[^|]*\||"(?:[^"]|"")*"|[^\s()|"]+)')


def parse_sexpr(text: str):
    """
    Parse one s-expression into nested lists of atom strings
    """
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = SEXPR_TOKEN.match(text, pos)
        if match is None:
            if text[pos:].strip():
                raise SolverError(f"unreadable solver output: {text[pos:pos + 40]!r}")
            break
        tokens.append(match.group(1))
        pos = match.end()

    def read(i):
        token = tokens[i]
        if token == '(':
            items = []
            i += 1
            while tokens[i] != ')':
                item, i = read(i)
                items.append(item)
            return items, i + 1
        if token == ')':
            raise SolverError("unbalanced solver output")
        return token, i + 1

    if not tokens:
        raise SolverError("empty solver output")
    try:
        value, _ = read(0)
    except IndexError:
        raise SolverError(f"truncated solver output: {text[:80]!r}")
    return value


def _unquote(atom: str) -> str:
    return atom[1:-1] if atom.startswith('|') and atom.endswith('|') else atom


def sexpr_to_int(node) -> int:
    if isinstance(node, list):
        if len(node) == 2 and node[0] == '-':
            return -sexpr_to_int(node[1])
        raise SolverError(f"unexpected model value {node!r}")
    return int(node)


def sexpr_to_expr(node, env: Dict[str, object]) -> Expr:
    if isinstance(node, str):
        if node in env:
            return env[node]
        if re.fullmatch(r'\d+', node):
            return Const(int(node))
        return Var(_unquote(node))
    head, args = node[0], node[1:]
    if head == '-' and len(args) == 1:
        inner = sexpr_to_expr(args[0], env)
        if isinstance(inner, Const):
            return Const(-inner.value)
        return BinOp('-', Const(0), inner)
    if head in ('+', '-', '*'):
        result = sexpr_to_expr(args[0], env)
        for arg in args[1:]:
            result = BinOp(head, result, sexpr_to_expr(arg, env))
        return result
    raise SolverError(f"unsupported arithmetic term {head!r}")


def sexpr_to_bexpr(node, env: Optional[Dict[str, object]] = None) -> BExpr:
    """
    Read a solver formula back into a boolean expression; let-bindings are
    expanded in place
    """
    env = env or {}
    if isinstance(node, str):
        if node == 'true':
            return TRUE
        if node == 'false':
            return FALSE
        if node in env and not isinstance(env[node], (Const, Var, BinOp)):
            return env[node]
        raise SolverError(f"unsupported boolean atom {node!r}")
    head, args = node[0], node[1:]
    if head == 'let':
        bindings = dict(env)
        for name, value in args[0]:
            try:
                bindings[name] = sexpr_to_bexpr(value, env)
            except SolverError:
                bindings[name] = sexpr_to_expr(value, env)
        return sexpr_to_bexpr(args[1], bindings)
    if head == 'not':
        return Not(sexpr_to_bexpr(args[0], env))
    if head in ('and', 'or'):
        parts = tuple(sexpr_to_bexpr(a, env) for a in args)
        return And(parts) if head == 'and' else Or(parts)
    if head == '=>':
        return Or((Not(sexpr_to_bexpr(args[0], env)), sexpr_to_bexpr(args[1], env)))
    if head in ('=', '<', '<=', '>', '>='):
        return Cmp(head, sexpr_to_expr(args[0], env), sexpr_to_expr(args[1], env))
    if head == 'distinct':
        return Cmp('!=', sexpr_to_expr(args[0], env), sexpr_to_expr(args[1], env))
    raise SolverError(f"unsupported formula head {head!r}")


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------

class SmtTransport(ABC):
    """
    Sends one SMT-LIB command and returns the solver's textual response
    """

    @abstractmethod
    def send(self, command: str, timeout: float) -> str:
        raise NotImplementedError

    @abstractmethod
    def close(self):
        raise NotImplementedError

    name = 'abstract'


class ProcessTransport(SmtTransport):
    """
    SMT-LIB 2 solver process reached over standard input and output
    """

    def __init__(self, path: str, args: Sequence[str] = ()):
        self.name = os.path.basename(path)
        try:
            self.process = subprocess.Popen(
                [path] + list(args),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {path}: {e}")
        self.buffer = ''

    def _next_response(self) -> Optional[str]:
        text = self.buffer.lstrip()
        if not text:
            return None
        if text[0] != '(':
            newline = text.find('\n')
            if newline < 0:
                return None
            self.buffer = text[newline + 1:]
            return text[:newline].strip()
        depth, quoted, in_string = 0, False, False
        for i, ch in enumerate(text):
            if in_string:
                in_string = ch != '"'
            elif quoted:
                quoted = ch != '|'
            elif ch == '"':
                in_string = True
            elif ch == '|':
                quoted = True
            elif ch == '(':
                depth += 1
            elif ch == ')':
                depth -= 1
                if depth == 0:
                    self.buffer = text[i + 1:]
                    return text[:i + 1]
        return None

    def send(self, command: str, timeout: float) -> str:
        if self.process.poll() is not None:
            raise SolverError("solver process has exited")
        self.process.stdin.write((command + '\n').encode())
        self.process.stdin.flush()
        deadline = time.monotonic() + timeout
        fd = self.process.stdout.fileno()
        while True:
            response = self._next_response()
            if response is not None:
                return response
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SolverUnknown(f"solver did not answer {command[:40]!r} in time")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverError("solver closed its output")
            self.buffer += chunk.decode()

    def close(self):
        if self.process.poll() is None:
            try:
                self.process.stdin.write(b'(exit)\n')
                self.process.stdin.flush()
                self.process.wait(timeout=1)
            except (OSError, subprocess.TimeoutExpired):
                self.process.kill()


class Z3Transport(SmtTransport):
    """
    In-process z3 fed with the same SMT-LIB text; the command context
    persists between calls
    """
    name = 'z3'

    def __init__(self):
        import z3
        self.z3 = z3
        self.context = z3.Context()

    def send(self, command: str, timeout: float) -> str:
        try:
            output = self.z3.Z3_eval_smtlib2_string(self.context.ref(), command)
        except self.z3.Z3Exception as e:
            raise SolverError(f"z3 rejected {command[:60]!r}: {e}")
        return output.strip()

    def close(self):
        self.context = None


def open_transport(backend: str = None, path: str = None, args: Sequence[str] = None) -> SmtTransport:
    backend = backend or settings.SMT_BACKEND
    if backend == 'auto':
        if path:
            backend = 'process'
        else:
            try:
                import z3  # noqa: F401
                backend = 'z3'
            except ImportError:
                backend = 'process'
    if backend == 'z3':
        return Z3Transport()
    if backend == 'process':
        return ProcessTransport(path or settings.SMT_SOLVER_PATH,
                                list(args) if args is not None else settings.SMT_SOLVER_ARGS.split())
    raise SolverError(f"unknown solver backend {backend!r}")


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SatResult:
    sat: bool
    model: Optional[Valuation] = None


class SmtSession:
    """
    One persistent solver session owned by a single engine. With a deadline
    set, each query's solver timeout shrinks to the time left and a query
    past the deadline raises BudgetExhausted.
    """

    def __init__(self, transport: SmtTransport, interpolation: bool = False,
                 timeout_ms: int = None):
        self.transport = transport
        self.interpolation = interpolation
        self.timeout_ms = timeout_ms or settings.SMT_QUERY_TIMEOUT_MS
        self.active_timeout_ms = self.timeout_ms
        self.deadline: Optional[float] = None
        self.scopes: List[Set[str]] = [set()]
        self.memo: Dict[str, SatResult] = {}
        self.queries = 0
        self._command('(set-option :print-success true)')
        self._command('(set-option :produce-models true)')
        if interpolation:
            self._command('(set-option :produce-interpolants true)')
        self._command(f'(set-option :timeout {self.timeout_ms})', tolerate=True)
        self._command('(set-logic QF_LIA)', tolerate=True)

    # -- raw protocol -------------------------------------------------------

    def _command(self, command: str, tolerate: bool = False) -> str:
        logger.debug("smt> %s", command)
        wait = self.active_timeout_ms / 1000.0 + 5
        if self.deadline is not None:
            wait = min(wait, max(self.deadline - time.monotonic(), 0) + 1)
        response = self.transport.send(command, wait)
        logger.debug("smt< %s", response)
        if response.startswith('(error'):
            if tolerate:
                return response
            raise SolverError(f"solver error on {command[:60]!r}: {response}")
        return response

    def _expect_success(self, command: str):
        response = self._command(command)
        if response not in ('success', ''):
            raise SolverError(f"unexpected response {response!r} to {command[:60]!r}")

    # -- scoping ------------------------------------------------------------

    def push(self):
        self._expect_success('(push 1)')
        self.scopes.append(set())

    def pop(self):
        self._expect_success('(pop 1)')
        self.scopes.pop()

    @contextmanager
    def scope(self):
        self.push()
        try:
            yield self
        finally:
            self.pop()

    def declared(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    def declare(self, names):
        for name in sorted(names):
            if not self.declared(name):
                self._expect_success(f'(declare-fun {symbol(name)} () Int)')
                self.scopes[-1].add(name)

    def assert_formula(self, b: BExpr, name: Optional[str] = None):
        self.declare(bexpr_vars(b))
        term = to_smtlib(b)
        if name:
            term = f"(! {term} :named {name})"
        self._expect_success(f'(assert {term})')

    def _past_deadline(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def _bound_timeout(self):
        if self.deadline is None:
            return
        remaining = int((self.deadline - time.monotonic()) * 1000)
        if remaining <= 0:
            raise BudgetExhausted('wall-clock budget exhausted')
        timeout = min(self.timeout_ms, remaining)
        if timeout != self.active_timeout_ms:
            self._command(f'(set-option :timeout {timeout})', tolerate=True)
            self.active_timeout_ms = timeout

    def check(self) -> bool:
        self.queries += 1
        self._bound_timeout()
        try:
            response = self._command('(check-sat)')
        except SolverUnknown:
            if self._past_deadline():
                raise BudgetExhausted('wall-clock budget exhausted')
            raise
        if response == 'sat':
            return True
        if response == 'unsat':
            return False
        if self._past_deadline():
            raise BudgetExhausted('wall-clock budget exhausted')
        raise SolverUnknown(f"solver answered {response!r}")

    def get_values(self, names) -> Valuation:
        names = sorted(names)
        if not names:
            return Valuation()
        response = self._command(f"(get-value ({' '.join(symbol(n) for n in names)}))")
        pairs = parse_sexpr(response)
        return Valuation({_unquote(var): sexpr_to_int(value) for var, value in pairs})

    def get_interpolants(self, names: Sequence[str]) -> List[BExpr]:
        response = self._command(f"(get-interpolants {' '.join(names)})")
        return [sexpr_to_bexpr(node) for node in parse_sexpr(response)]

    # -- cached queries -----------------------------------------------------

    def check_sat(self, b: BExpr) -> SatResult:
        """
        Satisfiability with a model over all free variables; unknown answers
        raise SolverUnknown and are never cached
        """
        text = to_smtlib(b)
        names = sorted(bexpr_vars(b))
        key = 'smt:' + hashlib.md5(f"{names}|{text}".encode()).hexdigest()
        if key in self.memo:
            return self.memo[key]
        cached = cache.get(key)
        if cached is not None:
            result = SatResult(cached[0], Valuation(cached[1]) if cached[0] else None)
            self.memo[key] = result
            return result

        with self.scope():
            self.assert_formula(b)
            if self.check():
                result = SatResult(True, self.get_values(names))
            else:
                result = SatResult(False)
        self.memo[key] = result
        cache.set(key, (result.sat, result.model.as_dict() if result.sat else None),
                  settings.SMT_CACHE_TIMEOUT)
        return result

    def close(self):
        self.transport.close()


def open_session(backend: str = None, path: str = None, args: Sequence[str] = None,
                 interpolation: Optional[bool] = None, timeout_ms: int = None) -> SmtSession:
    if interpolation is None:
        interpolation = settings.SMT_SOLVER_INTERPOLATION
    transport = open_transport(backend, path, args)
    logger.info("opened %s solver session (interpolation %s)", transport.name,
                'on' if interpolation else 'off')
    return SmtSession(transport, interpolation=interpolation, timeout_ms=timeout_ms)
