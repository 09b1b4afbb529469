"""
Tests for Floyd-Hoare generalization, refinement updates, splitting and value analysis
"""
import itertools
import random
from fractions import Fraction
from pathlib import Path

from django.test import TestCase

from verifier.exceptions import BudgetExhausted, ContractError, InvariantViolation
from verifier.utils.automata import empty_general, enumerate_by_weight, is_valid_pcfa, min_intersect
from verifier.utils.core import (
    Assume, Valuation, path_condition, program_to_pcfa,
)
from verifier.utils.logic import hoare_wp_trace
from verifier.utils.mdp import structural_bound
from verifier.utils.refine import (
    Exhausted, RefinementState, apply_split, check_split_set, generalize_nonviolating,
    generalize_violating_finite, initial_refinement, initial_valuations, live_variables,
    ordered_members, sync_program, update_refinement, value_analysis_refine,
)
from verifier.utils.surface import TRUE, Not, parse_bexpr, parse_task

from .oracle import BOX, random_bounded_task, random_pcfa, task_probability, z3_logic

BENCHMARKS = Path(__file__).resolve().parents[2] / 'benchmarks'


def load(name):
    return parse_task((BENCHMARKS / f'{name}.task').read_text(), name=name)


def synced_traces(a, count):
    return [t for t, _ in itertools.islice(enumerate_by_weight(a, empty_general()), count)]


class SynchronisationTestCase(TestCase):
    """
    Test the initial refinement and split synchronisation
    """

    def setUp(self):
        self.logic = z3_logic()

    def tearDown(self):
        self.logic.session.close()

    def test_initial_refinement_accepts_everything_after_pre(self):
        task = load('limit')
        a = program_to_pcfa(task.program)
        state = initial_refinement(a.alphabet, task.pre)
        synced = sync_program(a, state.splits)
        self.assertEqual(state.splits, (task.pre,))
        for trace in synced_traces(synced, 10):
            self.assertEqual(trace[0], Assume(task.pre))
            self.assertTrue(state.v.accepts(trace))

    def test_synced_program_is_a_pcfa(self):
        rng = random.Random(3)
        splits = (parse_bexpr('x > 0'), parse_bexpr('x <= 0'))
        for _ in range(50):
            a = random_pcfa(rng, rng.randint(2, 5))
            synced = sync_program(a, splits)
            synced.check()
            self.assertTrue(is_valid_pcfa(synced.as_general()))

    def test_split_set_checks(self):
        pre = parse_bexpr('x >= 0')
        check_split_set(self.logic, (parse_bexpr('x >= 0 && x < 3'), parse_bexpr('x >= 3')), pre)
        with self.assertRaises(InvariantViolation):
            check_split_set(self.logic, (parse_bexpr('x >= 0'), parse_bexpr('x >= 3')), pre)
        with self.assertRaises(InvariantViolation):
            check_split_set(self.logic, (parse_bexpr('x >= 1'),), pre)


class GeneralizationTestCase(TestCase):
    """
    Test Floyd-Hoare automata for non-violating and violating traces
    """

    def setUp(self):
        self.logic = z3_logic()
        self.task = load('limit')
        a = program_to_pcfa(self.task.program)
        self.state = initial_refinement(a.alphabet, self.task.pre)
        self.synced = sync_program(a, self.state.splits)
        self.traces = synced_traces(self.synced, 30)

    def tearDown(self):
        self.logic.session.close()

    def classify(self, trace):
        return self.logic.is_sat(path_condition(trace, self.task.pre, self.task.post))

    def test_safe_trace_is_covered(self):
        """
        Test that the automaton of a safe trace accepts it and only safe traces
        """
        safe = next(t for t in self.traces if not self.classify(t))
        tt = self.logic.sequence_interpolants(safe, self.task.pre, self.task.post)
        fh = generalize_nonviolating(self.logic, tt, self.synced.alphabet)
        self.assertTrue(fh.base.accepts(safe))
        for trace in self.traces:
            if fh.base.accepts(trace):
                self.assertFalse(self.classify(trace))

    def test_refinement_excludes_covered_traces(self):
        safe = [t for t in self.traces if not self.classify(t)][:3]
        qs = []
        for trace in safe:
            tt = self.logic.sequence_interpolants(trace, self.task.pre, self.task.post)
            qs.append(generalize_nonviolating(self.logic, tt, self.synced.alphabet))
        state = update_refinement(self.state, qs)
        self.assertEqual(state.splits, self.state.splits)
        for trace in safe:
            self.assertFalse(state.v.accepts(trace))
        for trace in self.traces:
            if self.classify(trace):
                self.assertTrue(state.v.accepts(trace))

    def test_refinement_without_automata_is_unchanged(self):
        self.assertIs(update_refinement(self.state, []), self.state)

    def test_ordered_automaton_members(self):
        """
        Test that every member shares the violating trace's wp certificate
        """
        violating = next(t for t in self.traces if self.classify(t))
        ofh = generalize_violating_finite(self.logic, violating, self.task.pre, self.task.post,
                                          self.synced.alphabet)
        self.assertTrue(ofh.base.accepts(violating))
        members = ordered_members(ofh, self.synced, 1000)
        self.assertIn(violating, members)
        anchor = ofh.labels[0]
        for member in members:
            self.assertTrue(self.synced.accepts(member))
            self.assertTrue(self.logic.implies(anchor, hoare_wp_trace(member, Not(self.task.post))))

    def test_ordered_members_beyond_limit(self):
        violating = next(t for t in self.traces if self.classify(t))
        ofh = generalize_violating_finite(self.logic, violating, self.task.pre, self.task.post,
                                          self.synced.alphabet)
        members = ordered_members(ofh, self.synced, 1000)
        with self.assertRaises(BudgetExhausted):
            ordered_members(ofh, self.synced, len(members) - 1)
        self.assertEqual(ordered_members(ofh, self.synced, len(members)), members)

    def test_infeasible_prefix_covers_every_extension(self):
        """
        Test that a trace reaching the False location is accepted whatever follows
        """
        infeasible = next(t for t in self.traces
                          if self.logic.infeasible_prefix(t, self.task.pre) is not None)
        cut = self.logic.infeasible_prefix(infeasible, self.task.pre)
        tt = self.logic.sequence_interpolants(infeasible, self.task.pre, self.task.post)
        fh = generalize_nonviolating(self.logic, tt, self.synced.alphabet)
        self.assertIn(0, fh.base.ends)
        extensions = [t for t in self.traces if t[:cut] == infeasible[:cut]]
        self.assertGreater(len(extensions), 1)
        for trace in extensions:
            self.assertTrue(fh.base.accepts(trace))


class SplitTestCase(TestCase):
    """
    Test pre-condition splitting
    """

    def setUp(self):
        self.logic = z3_logic()
        self.task = load('split')
        a = program_to_pcfa(self.task.program)
        self.state = initial_refinement(a.alphabet, self.task.pre)
        self.synced = sync_program(a, self.state.splits)
        self.traces = synced_traces(self.synced, 4)

    def tearDown(self):
        self.logic.session.close()

    def test_trivial_condition_is_a_noop(self):
        outcome = apply_split(self.logic, self.state, TRUE, TRUE, self.traces[:1], self.traces[1:])
        self.assertTrue(outcome.noop)
        self.assertIs(outcome.state, self.state)

    def test_unknown_split(self):
        with self.assertRaises(ContractError):
            apply_split(self.logic, self.state, parse_bexpr('x = 5'), TRUE, [], [])

    def test_split_relabels_traces_and_candidate(self):
        """
        Test that both halves replace the old condition everywhere
        """
        condition = parse_bexpr('x > 0')
        subset, others = self.traces[:1], self.traces[1:]
        outcome = apply_split(self.logic, self.state, TRUE, condition, subset, others, self.synced)
        self.assertFalse(outcome.noop)
        self.assertEqual(len(outcome.state.splits), 2)
        check_split_set(self.logic, outcome.state.splits, self.task.pre)

        positive, negative = Assume(outcome.positive), Assume(outcome.negative)
        self.assertEqual(outcome.relabeled[subset[0]], (positive,) + subset[0][1:])
        for trace in others:
            self.assertEqual(outcome.relabeled[trace], (negative,) + trace[1:])
        for trace in outcome.relabeled.values():
            self.assertTrue(outcome.state.v.accepts(trace))
            self.assertTrue(outcome.cand.accepts(trace))
        self.assertNotIn((self.synced.init, Assume(TRUE)), outcome.cand.delta)


class ValueAnalysisTestCase(TestCase):
    """
    Test live variables, initial valuations and value-analysis refinement
    """

    def setUp(self):
        self.logic = z3_logic()

    def tearDown(self):
        self.logic.session.close()

    def test_live_variables(self):
        task = load('limit')
        a = program_to_pcfa(task.program)
        live = live_variables(a, task.post)
        self.assertEqual(live[a.init], frozenset({'c'}))
        self.assertEqual(live[a.end], frozenset({'x'}))

    def test_initial_valuations(self):
        pre = parse_bexpr('x >= 0 && x <= 2 && y = 1')
        found = initial_valuations(self.logic, pre, ['x'], 5)
        self.assertEqual(sorted(v['x'] for v in found), [0, 1, 2])
        self.assertIsNone(initial_valuations(self.logic, pre, ['x'], 2))
        self.assertEqual(initial_valuations(self.logic, TRUE, [], 1), [Valuation()])
        self.assertEqual(initial_valuations(self.logic, parse_bexpr('x < x'), ['x'], 1), [])

    def test_unbounded_pre_condition(self):
        task = load('limit')
        result = value_analysis_refine(self.logic, program_to_pcfa(task.program), task.pre, task.post, 100)
        self.assertIsInstance(result, Exhausted)
        self.assertIsNone(result.partial)

    def test_state_limit(self):
        """
        Test that a tiny limit gives up, optionally keeping a partial automaton
        """
        task = load('limitvp')
        a = program_to_pcfa(task.program)
        self.assertIsInstance(value_analysis_refine(self.logic, a, task.pre, task.post, 2), Exhausted)
        result = value_analysis_refine(self.logic, a, task.pre, task.post, 2, keep_partial=True)
        self.assertIsInstance(result.partial, RefinementState)
        self.assertIn(-1, result.partial.v.ends)

    def test_exact_on_finite_state_programs(self):
        """
        Test that the refined structural bound equals the brute-force probability
        """
        rng = random.Random(17)
        tasks = [random_bounded_task(rng) for _ in range(4)]
        for task in tasks:
            with self.subTest(program=str(task.program)[:60]):
                a = program_to_pcfa(task.program)
                state = value_analysis_refine(self.logic, a, task.pre, task.post, 10000)
                self.assertIsInstance(state, RefinementState)
                bound, _ = structural_bound(min_intersect(sync_program(a, state.splits), state.v))
                self.assertEqual(bound, task_probability(task, BOX))

    def test_exact_on_limitvp(self):
        task = load('limitvp')
        a = program_to_pcfa(task.program)
        state = value_analysis_refine(self.logic, a, task.pre, task.post, 1000)
        bound, _ = structural_bound(min_intersect(sync_program(a, state.splits), state.v))
        self.assertEqual(bound, Fraction(3, 8))
