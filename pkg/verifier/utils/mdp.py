"""
Structural abstraction: underlying MDP of a PCFA, maximum reachability with
exact certification, and policy application
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, List, Mapping, Optional, Tuple, Union

import networkx as nx
import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from ..exceptions import ContractError
from .core import Pcfa, ProbL, ProbR, Statement, is_probabilistic

logger = logging.getLogger(__name__)

DUMMY_NODE = 'q_dmy'
VI_TOLERANCE = 1e-10
VI_MAX_SWEEPS = 10 ** 6
TIE_TOLERANCE = 1e-9

Node = Union[int, str]
Distribution = Dict[Node, Fraction]


@dataclass(frozen=True)
class StmtAction:
    stmt: Statement

    def sort_key(self):
        return (0, self.stmt.sort_key())

    def __str__(self):
        return f"<{self.stmt}>"


@dataclass(frozen=True)
class ProbAction:
    tag: int

    def sort_key(self):
        return (1, self.tag)

    def __str__(self):
        return f"<{self.tag}>"


@dataclass(frozen=True)
class DummyAction:
    def sort_key(self):
        return (2,)

    def __str__(self):
        return 'a_dmy'


DUMMY_ACTION = DummyAction()
Action = Union[StmtAction, ProbAction, DummyAction]


@dataclass
class Mdp:
    """
    Nodes are PCFA locations plus the dummy node; every distribution is an
    exact rational distribution summing to one
    """
    nodes: List[Node]
    actions: Dict[Node, Dict[Action, Distribution]]
    init: Node
    end: Node

    def enabled(self, node: Node) -> List[Action]:
        return sorted(self.actions.get(node, {}), key=lambda act: act.sort_key())

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for node, acts in self.actions.items():
            for dist in acts.values():
                for succ, p in dist.items():
                    if p > 0:
                        g.add_edge(node, succ)
        return g


@dataclass
class SimplePolicy:
    """
    Memoryless choice of one enabled action per node
    """
    choices: Dict[Node, Action] = field(default_factory=dict)

    def __getitem__(self, node: Node) -> Action:
        return self.choices[node]

    def get(self, node: Node, default=None):
        return self.choices.get(node, default)


def _add(dist: Distribution, node: Node, p: Fraction):
    dist[node] = dist.get(node, Fraction(0)) + p


def underlying_mdp(a: Pcfa) -> Mdp:
    actions: Dict[Node, Dict[Action, Distribution]] = {}
    for loc in sorted(a.locations):
        acts: Dict[Action, Distribution] = {}
        branches: Dict[int, Dict[str, int]] = {}
        for stmt, dst in a.successors(loc):
            if is_probabilistic(stmt):
                side = 'L' if isinstance(stmt, ProbL) else 'R'
                branches.setdefault(stmt.tag, {})[side] = dst
            else:
                acts[StmtAction(stmt)] = {dst: Fraction(1)}
        for tag, sides in branches.items():
            dist: Distribution = {}
            for side in ('L', 'R'):
                _add(dist, sides.get(side, DUMMY_NODE), Fraction(1, 2))
            acts[ProbAction(tag)] = dist
        if loc == a.end or not acts:
            acts = {DUMMY_ACTION: {loc: Fraction(1)}}
        actions[loc] = acts
    actions[DUMMY_NODE] = {DUMMY_ACTION: {DUMMY_NODE: Fraction(1)}}
    return Mdp(nodes=sorted(a.locations) + [DUMMY_NODE], actions=actions, init=a.init, end=a.end)


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------

def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def solve_chain(m: Mdp, policy: SimplePolicy, target: Node) -> Dict[Node, Fraction]:
    """
    Exact reachability probabilities of the chain induced by a policy
    """
    chain = nx.DiGraph()
    chain.add_nodes_from(m.nodes)
    for node in m.nodes:
        for succ, p in m.actions[node][policy[node]].items():
            if p > 0:
                chain.add_edge(node, succ)
    reaching = nx.ancestors(chain, target)
    unknowns = sorted((n for n in reaching if n != target), key=str)
    values = {node: Fraction(0) for node in m.nodes}
    values[target] = Fraction(1)
    if not unknowns:
        return values

    index = {node: i for i, node in enumerate(unknowns)}
    size = len(unknowns)
    rows = [[QQ(0)] * size for _ in range(size)]
    rhs = [[QQ(0)] for _ in range(size)]
    for node in unknowns:
        i = index[node]
        rows[i][i] += QQ(1)
        for succ, p in m.actions[node][policy[node]].items():
            q = QQ(p.numerator, p.denominator)
            if succ == target:
                rhs[i][0] += q
            elif succ in index:
                rows[i][index[succ]] -= q
    matrix = DomainMatrix(rows, (size, size), QQ)
    solution = matrix.lu_solve(DomainMatrix(rhs, (size, 1), QQ))
    for node in unknowns:
        values[node] = _to_fraction(solution[index[node], 0].element)
    return values


def _expected(dist: Distribution, values: Mapping[Node, Fraction]) -> Fraction:
    return sum((p * values[succ] for succ, p in dist.items()), Fraction(0))


def _value_iteration(m: Mdp, target: Node, zero: set) -> Dict[Node, float]:
    index = {node: i for i, node in enumerate(m.nodes)}
    pair_nodes, pair_rows = [], []
    for node in m.nodes:
        if node == target or node in zero:
            continue
        for dist in m.actions[node].values():
            row = np.zeros(len(m.nodes))
            for succ, p in dist.items():
                row[index[succ]] += float(p)
            pair_nodes.append(index[node])
            pair_rows.append(row)

    x = np.zeros(len(m.nodes))
    x[index[target]] = 1.0
    if not pair_rows:
        return {node: x[index[node]] for node in m.nodes}

    matrix = np.vstack(pair_rows)
    owners = np.array(pair_nodes)
    sweeps = 0
    residual = 1.0
    while residual >= VI_TOLERANCE and sweeps < VI_MAX_SWEEPS:
        q = matrix @ x
        updated = x.copy()
        updated[owners] = -np.inf
        np.maximum.at(updated, owners, q)
        residual = float(np.max(np.abs(updated - x)))
        x = updated
        sweeps += 1
    logger.debug("value iteration: %d sweeps, residual %.3e", sweeps, residual)
    return {node: float(x[index[node]]) for node in m.nodes}


def _extract_policy(m: Mdp, target: Node, approx: Mapping[Node, float], zero: set) -> SimplePolicy:
    """
    Argmax policy that makes progress towards the target among near-optimal
    actions, so ties inside end components do not trap the chain
    """
    def qvalue(dist):
        return sum(float(p) * approx[succ] for succ, p in dist.items())

    optimal: Dict[Node, List[Action]] = {}
    for node in m.nodes:
        acts = m.enabled(node)
        best = max(qvalue(m.actions[node][act]) for act in acts)
        optimal[node] = [act for act in acts if qvalue(m.actions[node][act]) >= best - TIE_TOLERANCE]

    choices: Dict[Node, Action] = {}
    settled = {target}
    choices[target] = m.enabled(target)[0]
    progress = True
    while progress:
        progress = False
        for node in m.nodes:
            if node in settled or node in zero:
                continue
            for act in optimal[node]:
                dist = m.actions[node][act]
                if any(p > 0 and succ in settled for succ, p in dist.items()):
                    choices[node] = act
                    settled.add(node)
                    progress = True
                    break
    for node in m.nodes:
        if node not in choices:
            choices[node] = optimal[node][0]
    return SimplePolicy(choices)


def max_reachability(m: Mdp, source: Node, target: Node) -> Tuple[Fraction, SimplePolicy]:
    """
    Maximum probability of reaching target from source, certified exactly,
    with a simple policy attaining it
    """
    if source not in m.actions or target not in m.actions:
        raise ContractError("source and target must be MDP nodes")
    graph = m.graph()
    zero = {node for node in m.nodes if node != target and not nx.has_path(graph, node, target)}

    approx = _value_iteration(m, target, zero)
    policy = _extract_policy(m, target, approx, zero)
    values = solve_chain(m, policy, target)

    rounds = 0
    while True:
        improved = False
        for node in m.nodes:
            if node == target:
                continue
            best_act, best_val = policy[node], values[node]
            for act in m.enabled(node):
                val = _expected(m.actions[node][act], values)
                if val > best_val:
                    best_act, best_val = act, val
            if best_act != policy[node]:
                policy.choices[node] = best_act
                improved = True
        if not improved:
            break
        rounds += 1
        values = solve_chain(m, policy, target)
    if rounds:
        logger.debug("exact policy iteration took %d improvement rounds", rounds)
    return values[source], policy


def apply_policy(a: Pcfa, policy: SimplePolicy) -> Pcfa:
    """
    Keep only the transitions selected by the policy
    """
    delta = {}
    for (src, stmt), dst in a.delta.items():
        act = policy.get(src)
        if act is None:
            continue
        if isinstance(act, StmtAction) and act.stmt == stmt:
            delta[(src, stmt)] = dst
        elif isinstance(act, ProbAction) and is_probabilistic(stmt) and stmt.tag == act.tag:
            delta[(src, stmt)] = dst
    return Pcfa(locations=a.locations, alphabet=a.alphabet, delta=delta, init=a.init, end=a.end)


def structural_bound(a: Pcfa) -> Tuple[Fraction, SimplePolicy]:
    if a.is_empty():
        return Fraction(0), SimplePolicy()
    m = underlying_mdp(a)
    return max_reachability(m, a.init, a.end)


def is_mc_shaped(a: Pcfa) -> bool:
    m = underlying_mdp(a)
    return all(len(acts) <= 1 for acts in m.actions.values())


def mc_accepting_mass(a: Pcfa) -> Fraction:
    """
    Total weight of all accepted traces of an MC-shaped PCFA
    """
    m = underlying_mdp(a)
    if any(len(acts) > 1 for acts in m.actions.values()):
        raise ContractError("automaton is not MC-shaped")
    policy = SimplePolicy({node: next(iter(acts)) for node, acts in m.actions.items()})
    return solve_chain(m, policy, a.end)[a.init]
