"""
Parser and pretty-printer for the probabilistic program language and task files
"""
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, List, Optional, Tuple, Union

from ..exceptions import ParseError, TaskError


# ---------------------------------------------------------------------------
# Arithmetic expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: 'Expr'
    right: 'Expr'


Expr = Union[Const, Var, BinOp]


# ---------------------------------------------------------------------------
# Boolean expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # one of = != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not:
    arg: 'BExpr'


@dataclass(frozen=True)
class And:
    args: Tuple['BExpr', ...]


@dataclass(frozen=True)
class Or:
    args: Tuple['BExpr', ...]


BExpr = Union[BoolConst, Cmp, Not, And, Or]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class ProbChoice:
    left: 'Program'
    right: 'Program'


@dataclass(frozen=True)
class NondetChoice:
    left: 'Program'
    right: 'Program'


@dataclass(frozen=True)
class Seq:
    first: 'Program'
    second: 'Program'


@dataclass(frozen=True)
class Ite:
    cond: BExpr
    then: 'Program'
    orelse: 'Program'


@dataclass(frozen=True)
class While:
    cond: BExpr
    body: 'Program'


Program = Union[Skip, Assign, ProbChoice, NondetChoice, Seq, Ite, While]


@dataclass(frozen=True)
class VerificationTask:
    """
    A threshold query: is the probability of violating {pre} program {post}
    at most beta?
    """
    program: Program
    pre: BExpr
    post: BExpr
    beta: Fraction
    name: str = ''


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------

def expr_vars(e: Expr) -> FrozenSet[str]:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return frozenset()


def bexpr_vars(b: BExpr) -> FrozenSet[str]:
    if isinstance(b, Cmp):
        return expr_vars(b.left) | expr_vars(b.right)
    if isinstance(b, Not):
        return bexpr_vars(b.arg)
    if isinstance(b, (And, Or)):
        result = frozenset()
        for arg in b.args:
            result |= bexpr_vars(arg)
        return result
    return frozenset()


def program_vars(p: Program) -> FrozenSet[str]:
    if isinstance(p, Assign):
        return frozenset([p.var]) | expr_vars(p.expr)
    if isinstance(p, (ProbChoice, NondetChoice)):
        return program_vars(p.left) | program_vars(p.right)
    if isinstance(p, Seq):
        return program_vars(p.first) | program_vars(p.second)
    if isinstance(p, Ite):
        return bexpr_vars(p.cond) | program_vars(p.then) | program_vars(p.orelse)
    if isinstance(p, While):
        return bexpr_vars(p.cond) | program_vars(p.body)
    return frozenset()


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

KEYWORDS = {
    'skip', 'if', 'then', 'else', 'while', 'do', 'true', 'false',
    'not', 'and', 'or', 'pre', 'prog', 'post', 'bound',
}

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(?:\#|//)[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:=|<\+>|\[\]|<=|>=|==|!=|&&|\|\||[-+*<>=!(){};])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, keyword, op, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    """
    Split source text into tokens, dropping whitespace and comments
    """
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        match = TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        value = match.group()
        column = pos - line_start + 1
        if kind == 'ident' and value in KEYWORDS:
            kind = 'keyword'
        if kind not in ('ws', 'comment'):
            tokens.append(Token(kind, value, line, column))
        newlines = value.count('\n')
        if newlines:
            line += newlines
            line_start = pos + value.rindex('\n') + 1
        pos = match.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens


CMP_OPS = {'=': '=', '==': '=', '!=': '!=', '<': '<', '<=': '<=', '>': '>', '>=': '>='}


class Parser:
    """
    Recursive-descent parser over the token list
    """

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.current
        found = token.text or 'end of input'
        return ParseError(f"{message}, found {found!r}", token.line, token.column)

    def at(self, *texts: str) -> bool:
        token = self.current
        return token.kind in ('op', 'keyword') and token.text in texts

    def accept(self, *texts: str) -> Optional[Token]:
        if self.at(*texts):
            token = self.current
            self.pos += 1
            return token
        return None

    def expect(self, text: str) -> Token:
        token = self.accept(text)
        if token is None:
            raise self.error(f"expected {text!r}")
        return token

    def expect_eof(self):
        if self.current.kind != 'eof':
            raise self.error("expected end of input")

    # -- programs -----------------------------------------------------------

    def parse_prog(self) -> Program:
        stmts = [self.parse_stmt()]
        while self.accept(';'):
            if self.at('}') or self.current.kind == 'eof':
                break  # trailing semicolon
            stmts.append(self.parse_stmt())
        result = stmts[-1]
        for stmt in reversed(stmts[:-1]):
            result = Seq(stmt, result)
        return result

    def parse_block(self) -> Program:
        self.expect('{')
        body = self.parse_prog()
        self.expect('}')
        return body

    def parse_stmt(self) -> Program:
        token = self.current
        if self.accept('skip'):
            return Skip()
        if self.accept('if'):
            cond = self.parse_bexpr()
            self.expect('then')
            then = self.parse_block()
            self.expect('else')
            orelse = self.parse_block()
            return Ite(cond, then, orelse)
        if self.accept('while'):
            cond = self.parse_bexpr()
            self.expect('do')
            return While(cond, self.parse_block())
        if self.at('{'):
            left = self.parse_block()
            if self.accept('<+>'):
                return ProbChoice(left, self.parse_block())
            if self.accept('[]'):
                return NondetChoice(left, self.parse_block())
            # a bare block only groups statements
            return left
        if token.kind == 'ident':
            self.pos += 1
            self.expect(':=')
            return Assign(token.text, self.parse_aexpr())
        raise self.error("expected a statement")

    # -- arithmetic ---------------------------------------------------------

    def parse_aexpr(self) -> Expr:
        left = self.parse_term()
        while self.at('+', '-'):
            op = self.current.text
            self.pos += 1
            left = BinOp(op, left, self.parse_term())
        return left

    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while self.at('*'):
            token = self.current
            self.pos += 1
            right = self.parse_unary()
            if expr_vars(left) and expr_vars(right):
                raise ParseError(
                    "non-linear term: multiplication of two variable expressions",
                    token.line, token.column
                )
            left = BinOp('*', left, right)
        return left

    def parse_unary(self) -> Expr:
        if self.accept('-'):
            if self.current.kind == 'number':
                return Const(-self.parse_integer())
            return BinOp('-', Const(0), self.parse_unary())
        return self.parse_atom()

    def parse_integer(self) -> int:
        token = self.current
        if token.kind != 'number' or not token.text.isdigit():
            raise self.error("expected an integer literal")
        self.pos += 1
        return int(token.text)

    def parse_atom(self) -> Expr:
        token = self.current
        if token.kind == 'number':
            return Const(self.parse_integer())
        if token.kind == 'ident':
            self.pos += 1
            return Var(token.text)
        if self.accept('('):
            inner = self.parse_aexpr()
            self.expect(')')
            return inner
        raise self.error("expected an arithmetic expression")

    # -- boolean ------------------------------------------------------------

    def parse_bexpr(self) -> BExpr:
        args = [self.parse_conj()]
        while self.accept('||', 'or'):
            args.append(self.parse_conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def parse_conj(self) -> BExpr:
        args = [self.parse_neg()]
        while self.accept('&&', 'and'):
            args.append(self.parse_neg())
        return args[0] if len(args) == 1 else And(tuple(args))

    def parse_neg(self) -> BExpr:
        if self.accept('!', 'not'):
            return Not(self.parse_neg())
        return self.parse_batom()

    def parse_batom(self) -> BExpr:
        if self.accept('true'):
            return TRUE
        if self.accept('false'):
            return FALSE
        if self.at('('):
            saved = self.pos
            try:
                self.pos += 1
                inner = self.parse_bexpr()
                self.expect(')')
                if not (self.at('+', '-', '*') or self.current.text in CMP_OPS):
                    return inner
            except ParseError:
                pass
            # the parenthesis opens an arithmetic operand
            self.pos = saved
        return self.parse_comparison()

    def parse_comparison(self) -> BExpr:
        left = self.parse_aexpr()
        token = self.current
        if token.kind != 'op' or token.text not in CMP_OPS:
            raise self.error("expected a comparison operator")
        self.pos += 1
        right = self.parse_aexpr()
        if self.current.kind == 'op' and self.current.text in CMP_OPS:
            raise self.error("comparisons are non-associative")
        return Cmp(CMP_OPS[token.text], left, right)

    # -- tasks --------------------------------------------------------------

    def parse_decimal(self) -> Tuple[str, Token]:
        token = self.current
        if token.kind != 'number':
            raise self.error("expected a decimal bound")
        self.pos += 1
        return token.text, token


def parse_program(text: str) -> Program:
    """
    Parse a program; raises ParseError with line/column on failure
    """
    parser = Parser(text)
    program = parser.parse_prog()
    parser.expect_eof()
    return program


def parse_bexpr(text: str) -> BExpr:
    parser = Parser(text)
    result = parser.parse_bexpr()
    parser.expect_eof()
    return result


def parse_aexpr(text: str) -> Expr:
    parser = Parser(text)
    result = parser.parse_aexpr()
    parser.expect_eof()
    return result


DECIMAL_RE = re.compile(r'^(\d+(\.\d+)?|\d+/\d+)$')


def parse_beta(text: str) -> Fraction:
    """
    Convert a decimal (or num/den) literal into an exact rational in [0, 1]
    """
    text = str(text).strip()
    if not DECIMAL_RE.match(text):
        raise TaskError(f"malformed bound {text!r}")
    try:
        beta = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise TaskError(f"malformed bound {text!r}")
    if beta < 0 or beta > 1:
        raise TaskError(f"bound {text} is outside [0, 1]")
    return beta


def parse_task(text: str, beta: Optional[Union[str, Fraction]] = None, name: str = '') -> VerificationTask:
    """
    Parse a task file. An explicit beta overrides the file's bound section.
    """
    parser = Parser(text)
    try:
        parser.expect('pre')
        pre = parser.parse_bexpr()
        parser.expect(';')
        parser.expect('prog')
        program = parser.parse_block()
        parser.expect('post')
        post = parser.parse_bexpr()
        parser.expect(';')
        file_beta = None
        if parser.accept('bound'):
            literal, _ = parser.parse_decimal()
            file_beta = parse_beta(literal)
            parser.expect(';')
        parser.expect_eof()
    except ParseError as e:
        if e.message.startswith("expected 'pre'") or e.message.startswith("expected 'prog'") \
                or e.message.startswith("expected 'post'"):
            raise TaskError(f"missing section at {e.line}:{e.column}: {e.message}")
        raise

    if beta is not None:
        resolved = beta if isinstance(beta, Fraction) else parse_beta(beta)
        if resolved < 0 or resolved > 1:
            raise TaskError(f"bound {resolved} is outside [0, 1]")
    elif file_beta is not None:
        resolved = file_beta
    else:
        raise TaskError("no bound given in the task file or on the command line")
    return VerificationTask(program=program, pre=pre, post=post, beta=resolved, name=name)


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------

PRECEDENCE = {'+': 1, '-': 1, '*': 2}


def format_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    prec = PRECEDENCE[e.op]
    left = format_expr(e.left)
    if isinstance(e.left, BinOp) and PRECEDENCE[e.left.op] < prec:
        left = f"({left})"
    right = format_expr(e.right)
    if isinstance(e.right, BinOp) and PRECEDENCE[e.right.op] <= prec:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def format_bexpr(b: BExpr) -> str:
    if isinstance(b, BoolConst):
        return 'true' if b.value else 'false'
    if isinstance(b, Cmp):
        return f"{format_expr(b.left)} {b.op} {format_expr(b.right)}"
    if isinstance(b, Not):
        inner = format_bexpr(b.arg)
        if isinstance(b.arg, (Cmp, And, Or)):
            inner = f"({inner})"
        return f"!{inner}"
    if isinstance(b, And):
        return ' && '.join(
            f"({format_bexpr(a)})" if isinstance(a, (And, Or)) else format_bexpr(a)
            for a in b.args
        )
    return ' || '.join(
        f"({format_bexpr(a)})" if isinstance(a, Or) else format_bexpr(a)
        for a in b.args
    )


def format_program(p: Program, indent: int = 0) -> str:
    pad = '  ' * indent
    if isinstance(p, Skip):
        return f"{pad}skip"
    if isinstance(p, Assign):
        return f"{pad}{p.var} := {format_expr(p.expr)}"
    if isinstance(p, (ProbChoice, NondetChoice)):
        op = '<+>' if isinstance(p, ProbChoice) else '[]'
        left = format_program(p.left, indent + 1)
        right = format_program(p.right, indent + 1)
        return f"{pad}{{\n{left}\n{pad}}} {op} {{\n{right}\n{pad}}}"
    if isinstance(p, Seq):
        first = format_program(p.first, indent)
        if isinstance(p.first, Seq):
            first = f"{pad}{{\n{format_program(p.first, indent + 1)}\n{pad}}}"
        return f"{first};\n{format_program(p.second, indent)}"
    if isinstance(p, Ite):
        then = format_program(p.then, indent + 1)
        orelse = format_program(p.orelse, indent + 1)
        return (f"{pad}if {format_bexpr(p.cond)} then {{\n{then}\n{pad}}} "
                f"else {{\n{orelse}\n{pad}}}")
    body = format_program(p.body, indent + 1)
    return f"{pad}while {format_bexpr(p.cond)} do {{\n{body}\n{pad}}}"


def format_task(task: VerificationTask) -> str:
    return (
        f"pre {format_bexpr(task.pre)};\n"
        f"prog {{\n{format_program(task.program, 1)}\n}}\n"
        f"post {format_bexpr(task.post)};\n"
        f"bound {task.beta.numerator}/{task.beta.denominator};\n"
    )
