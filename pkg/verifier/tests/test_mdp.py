"""
Tests for the underlying MDP and maximum reachability
"""
import random
from fractions import Fraction
from pathlib import Path

from django.test import SimpleTestCase

from verifier.exceptions import ContractError
from verifier.utils.core import SKIP, Pcfa, ProbL, ProbR, program_to_pcfa
from verifier.utils.mdp import (
    DUMMY_ACTION, DUMMY_NODE, ProbAction, StmtAction, apply_policy, is_mc_shaped,
    max_reachability, mc_accepting_mass, solve_chain, structural_bound, underlying_mdp,
)
from verifier.utils.surface import parse_program, parse_task

from .oracle import random_mdp, reference_max_reachability

BENCHMARKS = Path(__file__).resolve().parents[2] / 'benchmarks'


class UnderlyingMdpTestCase(SimpleTestCase):
    """
    Test the translation of a PCFA into an MDP
    """

    def test_coin_is_one_action(self):
        a = program_to_pcfa(parse_program('{ skip } <+> { x := 1 }'))
        m = underlying_mdp(a)
        self.assertEqual(list(m.actions[a.init]), [ProbAction(0)])
        dist = m.actions[a.init][ProbAction(0)]
        self.assertEqual(sorted(dist.values()), [Fraction(1, 2), Fraction(1, 2)])

    def test_end_and_dummy_self_loops(self):
        a = program_to_pcfa(parse_program('skip'))
        m = underlying_mdp(a)
        self.assertEqual(m.actions[a.end], {DUMMY_ACTION: {a.end: Fraction(1)}})
        self.assertEqual(m.actions[DUMMY_NODE], {DUMMY_ACTION: {DUMMY_NODE: Fraction(1)}})
        self.assertEqual(m.actions[a.init], {StmtAction(SKIP): {a.end: Fraction(1)}})

    def test_missing_branch_goes_to_dummy(self):
        """
        Test that a coin with one side cut away loses half its mass
        """
        a = program_to_pcfa(parse_program('{ skip } <+> { x := 1 }'))
        delta = {k: v for k, v in a.delta.items() if k[1] != ProbR(0)}
        cut = Pcfa(a.locations, a.alphabet, delta, a.init, a.end)
        m = underlying_mdp(cut)
        self.assertEqual(m.actions[a.init][ProbAction(0)][DUMMY_NODE], Fraction(1, 2))
        self.assertEqual(structural_bound(cut)[0], Fraction(1, 2))

    def test_distributions_sum_to_one(self):
        for path in sorted(BENCHMARKS.glob('*.task')):
            m = underlying_mdp(program_to_pcfa(parse_task(path.read_text()).program))
            for node, acts in m.actions.items():
                for dist in acts.values():
                    self.assertEqual(sum(dist.values()), 1)


class ReachabilityTestCase(SimpleTestCase):
    """
    Test maximum reachability against a reference solver
    """

    def test_random_mdps(self):
        """
        Test 100 random MDPs with up to 50 nodes for exact agreement
        """
        rng = random.Random(5)
        for _ in range(100):
            m = random_mdp(rng, rng.randint(2, 50))
            value, policy = max_reachability(m, m.init, m.end)
            self.assertEqual(value, reference_max_reachability(m, m.init, m.end))
            self.assertEqual(solve_chain(m, policy, m.end)[m.init], value)

    def test_unknown_node(self):
        m = random_mdp(random.Random(1), 3)
        with self.assertRaises(ContractError):
            max_reachability(m, 'nowhere', m.end)

    def test_counter_program_bound_is_one(self):
        a = program_to_pcfa(parse_task((BENCHMARKS / 'limit.task').read_text()).program)
        bound, policy = structural_bound(a)
        self.assertEqual(bound, 1)

    def test_policy_yields_mc_shaped_candidate(self):
        """
        Test that applying the optimal policy keeps the bound and removes choice
        """
        a = program_to_pcfa(parse_program('{ skip } [] { { skip } <+> { x := 1 } }'))
        bound, policy = structural_bound(a)
        cand = apply_policy(a, policy)
        self.assertFalse(is_mc_shaped(a))
        self.assertTrue(is_mc_shaped(cand))
        self.assertEqual(mc_accepting_mass(cand), bound)

    def test_empty_program_bound(self):
        a = program_to_pcfa(parse_program('skip'))
        empty = Pcfa(a.locations, a.alphabet, {}, a.init, a.end)
        self.assertEqual(structural_bound(empty)[0], 0)

    def test_mass_requires_mc_shape(self):
        a = program_to_pcfa(parse_program('{ skip } [] { x := 1 }'))
        with self.assertRaises(ContractError):
            mc_accepting_mass(a)

    def test_fair_coin_mass(self):
        a = program_to_pcfa(parse_program('{ skip } <+> { skip }'))
        self.assertEqual(set(a.alphabet), {ProbL(0), ProbR(0), SKIP})
        self.assertEqual(mc_accepting_mass(a), 1)
