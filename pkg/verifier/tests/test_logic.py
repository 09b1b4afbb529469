"""
Tests for predicates, transformers and the solver-backed logic
"""
import time

from django.test import SimpleTestCase, TestCase

from verifier.exceptions import BudgetExhausted, ContractError
from verifier.utils.core import SKIP, AssignStatement, Assume, ProbL, Valuation, eval_bexpr
from verifier.utils.logic import (
    hoare_wp, hoare_wp_trace, path_wp, path_wp_trace, simplify, substitute,
)
from verifier.utils.smt import parse_sexpr, sexpr_to_bexpr, to_smtlib
from verifier.utils.surface import (
    FALSE, TRUE, And, BinOp, Cmp, Const, Not, Or, Var, bexpr_vars, parse_bexpr,
)

from .oracle import box_valuations, z3_logic

X, Y = Var('x'), Var('y')
INC_X = AssignStatement('x', BinOp('+', X, Const(1)))
X_POS = Cmp('>', X, Const(0))


class SimplifyTestCase(SimpleTestCase):
    """
    Test constant folding and normalization
    """

    def test_constant_comparisons(self):
        self.assertEqual(simplify(Cmp('<', Const(1), Const(2))), TRUE)
        self.assertEqual(simplify(Cmp('=', Const(1), Const(2))), FALSE)

    def test_contradiction(self):
        self.assertEqual(simplify(And((X_POS, Not(X_POS)))), FALSE)
        self.assertEqual(simplify(Or((X_POS, Not(X_POS)))), TRUE)

    def test_units_disappear(self):
        self.assertEqual(simplify(And((TRUE, X_POS))), simplify(X_POS))
        self.assertEqual(simplify(Or((FALSE, X_POS))), simplify(X_POS))

    def test_double_negation(self):
        self.assertEqual(simplify(Not(Not(X_POS))), simplify(X_POS))

    def test_equivalent_forms_agree(self):
        self.assertEqual(simplify(parse_bexpr('x > 0')), simplify(parse_bexpr('x >= 1')))
        self.assertEqual(simplify(parse_bexpr('2 * x = 4')), simplify(parse_bexpr('x = 2')))

    def test_parity_folding(self):
        self.assertEqual(simplify(parse_bexpr('2 * x = 3')), FALSE)

    def test_meaning_is_preserved(self):
        """
        Test that simplification never changes the truth value on a small box
        """
        formulas = [
            'x + y > 1 && !(x = y)', 'x - 2 * y <= 0 || y > x', '!(x < 1 && y >= 1)',
            '3 * x != y + 1', 'x = x',
        ]
        box = box_valuations({'x': (-2, 2), 'y': (-2, 2)})
        for text in formulas:
            b = parse_bexpr(text)
            s = simplify(b)
            for v in box:
                self.assertEqual(eval_bexpr(s, v), eval_bexpr(b, v), text)


class TransformerTestCase(SimpleTestCase):
    """
    Test weakest preconditions
    """

    def test_assignment_substitutes(self):
        self.assertEqual(hoare_wp(INC_X, Cmp('=', X, Const(1))), simplify(Cmp('=', X, Const(0))))

    def test_assume_differs_between_transformers(self):
        q = Cmp('=', Y, Const(0))
        self.assertEqual(hoare_wp(Assume(X_POS), q), simplify(Or((Not(X_POS), q))))
        self.assertEqual(path_wp(Assume(X_POS), q), simplify(And((X_POS, q))))

    def test_identity_statements(self):
        q = simplify(X_POS)
        for s in (SKIP, ProbL(0)):
            self.assertEqual(hoare_wp(s, q), q)
            self.assertEqual(path_wp(s, q), q)

    def test_trace_transformers(self):
        trace = (AssignStatement('x', Const(0)), Assume(X_POS))
        self.assertEqual(path_wp_trace(trace, TRUE), FALSE)
        self.assertEqual(hoare_wp_trace(trace, FALSE), TRUE)

    def test_substitute(self):
        b = substitute(parse_bexpr('x > y'), 'x', BinOp('+', Y, Const(1)))
        self.assertEqual(simplify(b), TRUE)


class SmtTextTestCase(SimpleTestCase):
    """
    Test SMT-LIB printing and parsing
    """

    def test_round_trip_through_text(self):
        b = parse_bexpr('x + 2 * y <= 3 && !(x = -1) || y > 0')
        back = sexpr_to_bexpr(parse_sexpr(to_smtlib(b)))
        for v in box_valuations({'x': (-2, 2), 'y': (-2, 2)}):
            self.assertEqual(eval_bexpr(back, v), eval_bexpr(b, v))


class LogicTestCase(TestCase):
    """
    Test satisfiability, Hoare triples and interpolation over z3
    """

    def setUp(self):
        self.logic = z3_logic()

    def tearDown(self):
        self.logic.session.close()

    def test_models_satisfy_formulas(self):
        b = parse_bexpr('x + y = 3 && x > y && y >= 1')
        result = self.logic.check_sat(b)
        self.assertTrue(result.sat)
        self.assertTrue(eval_bexpr(b, result.model))

    def test_unsat(self):
        self.assertFalse(self.logic.is_sat(parse_bexpr('x > 0 && x < 1')))

    def test_implication(self):
        self.assertTrue(self.logic.implies(parse_bexpr('x > 2'), parse_bexpr('x >= 0')))
        self.assertFalse(self.logic.implies(parse_bexpr('x >= 0'), parse_bexpr('x > 2')))
        self.assertTrue(self.logic.equivalent(parse_bexpr('x > 0'), parse_bexpr('x >= 1')))

    def test_hoare_triples(self):
        self.assertTrue(self.logic.hoare_valid(parse_bexpr('x >= 0'), INC_X, parse_bexpr('x > 0')))
        self.assertFalse(self.logic.hoare_valid(TRUE, INC_X, parse_bexpr('x > 0')))
        self.assertTrue(self.logic.hoare_valid(TRUE, Assume(X_POS), parse_bexpr('x >= 1')))

    def test_interpolants_for_each_strategy(self):
        """
        Test that every strategy tags a safe trace with a valid sequence
        """
        trace = (AssignStatement('x', Const(0)), INC_X, Assume(Cmp('>', X, Const(1))))
        for strategy in ('auto', 'sp', 'wp'):
            with self.subTest(strategy=strategy):
                logic = z3_logic(strategy)
                tt = logic.sequence_interpolants(trace, TRUE, FALSE)
                self.assertEqual(len(tt.predicates), len(trace) + 1)
                self.assertTrue(logic.validate_tagging(tt, TRUE, FALSE))
                logic.session.close()

    def test_interpolating_a_violating_trace(self):
        with self.assertRaises(ContractError):
            self.logic.sequence_interpolants((INC_X,), TRUE, parse_bexpr('x = 0'))

    def test_infeasible_trace_is_tagged_against_false(self):
        """
        Test that labels from the shortest infeasible prefix on are False
        """
        trace = (AssignStatement('x', Const(0)), Assume(X_POS), INC_X)
        post = parse_bexpr('x = 5')
        tt = self.logic.sequence_interpolants(trace, TRUE, post)
        self.assertEqual(tt.predicates[0], TRUE)
        self.assertEqual(tt.predicates[2:], (FALSE, FALSE))
        self.assertTrue(self.logic.validate_tagging(tt, TRUE, post))

    def test_tagging_keeps_only_needed_conjuncts(self):
        trace = (AssignStatement('x', Const(0)), AssignStatement('y', Const(7)),
                 Assume(Cmp('>', Y, Const(3))))
        post = parse_bexpr('x = 0')
        tt = self.logic.sequence_interpolants(trace, TRUE, post)
        self.assertTrue(self.logic.validate_tagging(tt, TRUE, post))
        for p in tt.predicates:
            self.assertLessEqual(bexpr_vars(p), {'x'})
        self.assertEqual(tt.predicates[0], TRUE)

    def test_unknown_strategy(self):
        from verifier.utils.logic import Logic

        with self.assertRaises(ContractError):
            Logic(self.logic.session, 'magic')

    def test_models_are_cached(self):
        b = parse_bexpr('x = 7')
        first = self.logic.check_sat(b)
        second = self.logic.check_sat(b)
        self.assertEqual(first.model, Valuation({'x': 7}))
        self.assertEqual(second, first)


class SessionDeadlineTestCase(TestCase):
    """
    Test that solver queries respect the run's wall-clock deadline
    """

    def setUp(self):
        self.logic = z3_logic()

    def tearDown(self):
        self.logic.session.close()

    def test_query_after_deadline(self):
        self.logic.session.deadline = time.monotonic() - 1
        with self.assertRaises(BudgetExhausted):
            self.logic.is_sat(parse_bexpr('3 * x = y + 17 && y > 40'))

    def test_query_timeout_shrinks_to_deadline(self):
        session = self.logic.session
        session.deadline = time.monotonic() + 2
        self.assertTrue(self.logic.is_sat(parse_bexpr('5 * x = y + 19 && y > 60')))
        self.assertLessEqual(session.active_timeout_ms, 2000)
