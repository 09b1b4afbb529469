"""
Tests for the automata algebra and trace enumeration
"""
import itertools
import random
import time
from fractions import Fraction
from pathlib import Path

from django.test import SimpleTestCase

from verifier.exceptions import BudgetExhausted
from verifier.utils.automata import (
    Dfa, complement, determinize, empty_general, enumerate_by_weight, find_word_in_difference,
    intersection, is_valid_pcfa, language_equivalent, min_intersect, minimize,
    shortest_excluded_trace, union, union_all, universal,
)
from verifier.utils.cexcheck import Budget
from verifier.utils.core import (
    SKIP, AssignStatement, Assume, GeneralPcfa, ProbL, ProbR, program_to_pcfa, trace_key,
)
from verifier.utils.surface import Cmp, Const, Not, Var, parse_task

from .oracle import SMALL_ALPHABET, random_general, random_pcfa, words

BENCHMARKS = Path(__file__).resolve().parents[2] / 'benchmarks'

X_ZERO = AssignStatement('x', Const(0))
C_ZERO = AssignStatement('c', Const(0))
EXIT = Assume(Not(Cmp('>', Var('c'), Const(0))))


def limit_pcfa():
    return program_to_pcfa(parse_task((BENCHMARKS / 'limit.task').read_text()).program)


class LanguageOperationsTestCase(SimpleTestCase):
    """
    Test complement, union and intersection on random automata
    """

    def setUp(self):
        self.rng = random.Random(2024)

    def test_complement_is_an_involution(self):
        for _ in range(200):
            g = random_general(self.rng, self.rng.randint(1, 4))
            back = complement(complement(g, SMALL_ALPHABET), SMALL_ALPHABET)
            self.assertTrue(language_equivalent(back, g))

    def test_complement_partitions_short_words(self):
        """
        Test that every short word is in exactly one of g and its complement
        """
        alphabet = SMALL_ALPHABET[:3]
        for _ in range(20):
            g = random_general(self.rng, 3, alphabet)
            co = complement(g, alphabet)
            for word in words(alphabet, 4):
                self.assertNotEqual(g.accepts(word), co.accepts(word))

    def test_union_and_intersection(self):
        alphabet = SMALL_ALPHABET[:3]
        for _ in range(30):
            g1 = random_general(self.rng, 3, alphabet)
            g2 = random_general(self.rng, 3, alphabet)
            both, either = intersection(g1, g2), union(g1, g2)
            for word in words(alphabet, 4):
                self.assertEqual(both.accepts(word), g1.accepts(word) and g2.accepts(word))
                self.assertEqual(either.accepts(word), g1.accepts(word) or g2.accepts(word))

    def test_union_all_of_nothing_is_empty(self):
        self.assertTrue(union_all([], SMALL_ALPHABET).is_empty())
        self.assertTrue(empty_general(SMALL_ALPHABET).is_empty())

    def test_universal(self):
        u = universal(SMALL_ALPHABET)
        self.assertTrue(u.accepts((SKIP, ProbL(0))))
        self.assertFalse(u.accepts(()))
        self.assertTrue(complement(u).is_empty())

    def test_difference_witness(self):
        g = random_general(self.rng, 4)
        u = universal(SMALL_ALPHABET)
        self.assertIsNone(find_word_in_difference(g, u))
        word = find_word_in_difference(u, g)
        if word is not None:
            self.assertFalse(g.accepts(word))


class MinimizationTestCase(SimpleTestCase):
    """
    Test partition refinement on deterministic automata
    """

    def test_equivalent_states_merge(self):
        a = SMALL_ALPHABET[0]
        dfa = Dfa((a,), [{a: 1}, {a: 2}, {a: 1}], 0, {1, 2})
        small = minimize(dfa)
        self.assertEqual(small.size, 2)
        self.assertTrue(language_equivalent(small.to_general(), dfa.to_general()))

    def test_random_automata_keep_their_language(self):
        rng = random.Random(7)
        for _ in range(100):
            g = random_general(rng, rng.randint(1, 5))
            small = minimize(determinize(g, SMALL_ALPHABET))
            self.assertTrue(language_equivalent(small.to_general(), g))
            self.assertEqual(minimize(small).size, small.size)

    def test_expired_budget(self):
        g = random_general(random.Random(1), 4)
        with self.assertRaises(BudgetExhausted):
            complement(g, SMALL_ALPHABET, Budget(deadline=time.monotonic() - 1))


class MinIntersectTestCase(SimpleTestCase):
    """
    Test that intersecting a PCFA with any automaton yields a PCFA
    """

    def test_random_pairs(self):
        """
        Test 500 random pairs for shape and language
        """
        rng = random.Random(11)
        for _ in range(500):
            a = random_pcfa(rng, rng.randint(2, 5))
            v = random_general(rng, rng.randint(1, 4))
            result = min_intersect(a, v)
            result.check()
            self.assertTrue(is_valid_pcfa(result.as_general()))
            self.assertTrue(language_equivalent(result.as_general(), intersection(a.as_general(), v)))

    def test_with_universal_keeps_program(self):
        a = limit_pcfa()
        result = min_intersect(a, universal(a.alphabet))
        self.assertTrue(language_equivalent(result.as_general(), a.as_general()))
        self.assertLessEqual(len(result.locations), len(a.locations))

    def test_with_empty_is_empty(self):
        result = min_intersect(limit_pcfa(), empty_general())
        self.assertTrue(result.is_empty())


class TraceSearchTestCase(SimpleTestCase):
    """
    Test shortest-trace search and weight-ordered enumeration
    """

    def test_shortest_trace_of_counter_program(self):
        a = limit_pcfa()
        trace = shortest_excluded_trace(a, universal(a.alphabet), empty_general(a.alphabet))
        self.assertEqual(trace, (X_ZERO, ProbL(0), C_ZERO, EXIT))

    def test_shortest_trace_skips_storage(self):
        """
        Test that storing the first trace yields the next one in shortlex order
        """
        a = limit_pcfa()
        sigma = a.alphabet
        first = shortest_excluded_trace(a, universal(sigma), empty_general(sigma))
        stored = _single_word(first, sigma)
        second = shortest_excluded_trace(a, universal(sigma), stored)
        self.assertNotEqual(second, first)
        self.assertLessEqual(trace_key(first), trace_key(second))
        self.assertEqual(second[1], ProbR(0))

    def test_enumeration_order(self):
        """
        Test that traces come heaviest first, shortlex within one weight
        """
        a = limit_pcfa()
        traces = list(itertools.islice(enumerate_by_weight(a, empty_general(a.alphabet)), 12))
        weights = [w for _, w in traces]
        self.assertEqual(weights[:2], [Fraction(1, 2), Fraction(1, 2)])
        self.assertEqual(weights, sorted(weights, reverse=True))
        for (t1, w1), (t2, w2) in zip(traces, traces[1:]):
            if w1 == w2:
                self.assertLess(trace_key(t1), trace_key(t2))
        self.assertEqual(traces[0][0][1], ProbL(0))
        self.assertEqual(traces[1][0][1], ProbR(0))
        self.assertEqual(len({t for t, _ in traces}), len(traces))

    def test_enumeration_respects_exclusion(self):
        a = limit_pcfa()
        first, _ = next(enumerate_by_weight(a, empty_general(a.alphabet)))
        excluded = _single_word(first, a.alphabet)
        traces = [t for t, _ in itertools.islice(enumerate_by_weight(a, excluded), 5)]
        self.assertNotIn(first, traces)

    def test_enumeration_of_empty_program(self):
        a = min_intersect(limit_pcfa(), empty_general())
        self.assertEqual(list(enumerate_by_weight(a, empty_general())), [])


def _single_word(word, alphabet):
    return GeneralPcfa(
        locations=frozenset(range(len(word) + 1)),
        alphabet=frozenset(alphabet),
        delta=frozenset((i, s, i + 1) for i, s in enumerate(word)),
        init=0,
        ends=frozenset([len(word)]),
    )

