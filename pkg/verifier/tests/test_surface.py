"""
Tests for the program language and task files
"""
from fractions import Fraction
from pathlib import Path

from django.test import SimpleTestCase

from verifier.exceptions import ParseError, TaskError
from verifier.utils.surface import (
    Assign, BinOp, Cmp, Const, NondetChoice, ProbChoice, Seq, Skip, Var, While,
    format_task, parse_beta, parse_bexpr, parse_program, parse_task, program_vars,
)

BENCHMARKS = Path(__file__).resolve().parents[2] / 'benchmarks'


class ProgramParsingTestCase(SimpleTestCase):
    """
    Test the statement grammar
    """

    def test_sequence_is_right_nested(self):
        program = parse_program('x := 0; y := 1; skip')
        self.assertEqual(program, Seq(Assign('x', Const(0)), Seq(Assign('y', Const(1)), Skip())))

    def test_probabilistic_and_nondeterministic_choice(self):
        """
        Test both binary choice operators
        """
        self.assertEqual(parse_program('{ skip } <+> { x := 1 }'), ProbChoice(Skip(), Assign('x', Const(1))))
        self.assertEqual(parse_program('{ skip } [] { x := 1 }'), NondetChoice(Skip(), Assign('x', Const(1))))

    def test_while_loop(self):
        program = parse_program('while c > 0 do { c := c - 1 }')
        self.assertEqual(
            program,
            While(Cmp('>', Var('c'), Const(0)), Assign('c', BinOp('-', Var('c'), Const(1)))),
        )

    def test_multiplication_binds_tighter(self):
        program = parse_program('x := 1 + 2 * y')
        self.assertEqual(program.expr, BinOp('+', Const(1), BinOp('*', Const(2), Var('y'))))

    def test_program_vars(self):
        program = parse_program('x := y; if z > 0 then { skip } else { w := 1 }')
        self.assertEqual(program_vars(program), frozenset({'x', 'y', 'z', 'w'}))

    def test_error_carries_position(self):
        """
        Test that a syntax error reports line and column
        """
        with self.assertRaises(ParseError) as ctx:
            parse_program('x := 0;\n  y = 1')
        self.assertEqual(ctx.exception.line, 2)
        self.assertEqual(ctx.exception.column, 5)

    def test_unexpected_character(self):
        with self.assertRaises(ParseError):
            parse_program('x := 0 $ 1')

    def test_boolean_operators(self):
        b = parse_bexpr('!(x = 0) && (y < 1 || true)')
        self.assertEqual(len(b.args), 2)


class BoundTestCase(SimpleTestCase):
    """
    Test threshold literals
    """

    def test_decimal_is_exact(self):
        self.assertEqual(parse_beta('0.375'), Fraction(3, 8))
        self.assertEqual(parse_beta('0.1'), Fraction(1, 10))

    def test_fraction_literal(self):
        self.assertEqual(parse_beta('1/2'), Fraction(1, 2))

    def test_out_of_range(self):
        with self.assertRaises(TaskError):
            parse_beta('1.5')

    def test_malformed(self):
        for text in ('-0.5', 'abc', '0.5.1', ''):
            with self.assertRaises(TaskError):
                parse_beta(text)


class TaskParsingTestCase(SimpleTestCase):
    """
    Test task files
    """

    def test_parse_benchmark_tasks(self):
        """
        Test that every shipped task parses
        """
        for path in sorted(BENCHMARKS.glob('*.task')):
            with self.subTest(path=path.name):
                task = parse_task(path.read_text(), name=path.stem)
                self.assertEqual(task.name, path.stem)
                self.assertTrue(0 <= task.beta <= 1)

    def test_command_line_bound_overrides_file(self):
        task = parse_task((BENCHMARKS / 'limit.task').read_text(), beta='0.3')
        self.assertEqual(task.beta, Fraction(3, 10))

    def test_missing_bound(self):
        with self.assertRaises(TaskError):
            parse_task('pre true; prog { skip } post true;')

    def test_missing_section(self):
        with self.assertRaises(TaskError):
            parse_task('pre true; post true; bound 0.5;')

    def test_format_round_trip(self):
        """
        Test that printing and re-parsing gives the same task
        """
        for path in sorted(BENCHMARKS.glob('*.task')):
            with self.subTest(path=path.name):
                task = parse_task(path.read_text())
                again = parse_task(format_task(task))
                self.assertEqual(again.program, task.program)
                self.assertEqual(again.pre, task.pre)
                self.assertEqual(again.post, task.post)
                self.assertEqual(again.beta, task.beta)
