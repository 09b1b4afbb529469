"""
Finite-automata algebra over the statement alphabet and weight-ordered
trace enumeration
"""
import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx

from ..exceptions import InvariantViolation
from .core import GeneralPcfa, Pcfa, Statement, Trace, is_probabilistic

if TYPE_CHECKING:
    from .cexcheck import Budget

logger = logging.getLogger(__name__)


def sorted_alphabet(alphabet: Iterable[Statement]) -> Tuple[Statement, ...]:
    return tuple(sorted(set(alphabet), key=lambda s: s.sort_key()))


def _tick(budget: Optional['Budget'], n: int = 0):
    if budget is not None and n % 256 == 0:
        budget.check_time()


class Dfa:
    """
    Deterministic automaton with integer states; transitions may be partial
    """

    def __init__(self, alphabet: Sequence[Statement], trans: List[Dict[Statement, int]],
                 init: int, accepting: Set[int]):
        self.alphabet = sorted_alphabet(alphabet)
        self.trans = trans
        self.init = init
        self.accepting = set(accepting)

    @property
    def size(self) -> int:
        return len(self.trans)

    def completed(self) -> 'Dfa':
        """
        Return a copy where every state has a move on every symbol
        """
        trans = [dict(t) for t in self.trans]
        sink = None
        for t in trans:
            for a in self.alphabet:
                if a not in t:
                    if sink is None:
                        sink = len(trans)
                        trans.append({})
                    t[a] = sink
        if sink is not None:
            trans[sink] = {a: sink for a in self.alphabet}
        return Dfa(self.alphabet, trans, self.init, self.accepting)

    def complemented(self) -> 'Dfa':
        dfa = self.completed()
        return Dfa(dfa.alphabet, dfa.trans, dfa.init, set(range(dfa.size)) - dfa.accepting)

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.size))
        for s, t in enumerate(self.trans):
            for dst in t.values():
                g.add_edge(s, dst)
        return g

    def trimmed(self) -> 'Dfa':
        """
        Keep only states that are reachable and can reach acceptance
        """
        g = self.graph()
        reachable = nx.descendants(g, self.init) | {self.init}
        useful = set()
        for f in self.accepting & reachable:
            useful |= nx.ancestors(g, f) | {f}
        useful &= reachable
        if self.init not in useful:
            return Dfa(self.alphabet, [{}], 0, set())
        order = _bfs_order(self.init, self.trans, self.alphabet, useful)
        index = {s: i for i, s in enumerate(order)}
        trans = [
            {a: index[dst] for a, dst in self.trans[s].items() if dst in index}
            for s in order
        ]
        return Dfa(self.alphabet, trans, 0, {index[s] for s in self.accepting if s in index})

    def to_general(self) -> GeneralPcfa:
        return GeneralPcfa(
            locations=frozenset(range(self.size)),
            alphabet=frozenset(self.alphabet),
            delta=frozenset((s, a, dst) for s, t in enumerate(self.trans) for a, dst in t.items()),
            init=self.init,
            ends=frozenset(self.accepting),
        )


def _bfs_order(init: int, trans: List[Dict[Statement, int]], alphabet, allowed: Set[int]) -> List[int]:
    order, seen = [init], {init}
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for a in alphabet:
            dst = trans[s].get(a)
            if dst is not None and dst in allowed and dst not in seen:
                seen.add(dst)
                order.append(dst)
                queue.append(dst)
    return order


def determinize(g: GeneralPcfa, alphabet: Iterable[Statement] = (),
                budget: Optional['Budget'] = None) -> Dfa:
    """
    Subset construction over g's alphabet extended by the given symbols.
    The result is complete; the empty subset acts as the sink.
    """
    sigma = sorted_alphabet(set(g.alphabet) | set(alphabet))
    start = frozenset([g.init])
    ids = {start: 0}
    trans: List[Dict[Statement, int]] = [{}]
    queue = deque([start])
    while queue:
        subset = queue.popleft()
        sid = ids[subset]
        _tick(budget, sid)
        for a in sigma:
            nxt = g.step(subset, a)
            if nxt not in ids:
                ids[nxt] = len(trans)
                trans.append({})
                queue.append(nxt)
            trans[sid][a] = ids[nxt]
    accepting = {sid for subset, sid in ids.items() if subset & g.ends}
    return Dfa(sigma, trans, 0, accepting)


def minimize(dfa: Dfa, budget: Optional['Budget'] = None) -> Dfa:
    """
    Moore partition refinement followed by trimming
    """
    dfa = dfa.completed()
    block = [1 if s in dfa.accepting else 0 for s in range(dfa.size)]
    count = len(set(block))
    while True:
        _tick(budget)
        signatures: Dict[tuple, int] = {}
        refined = []
        for s, t in enumerate(dfa.trans):
            sig = (block[s],) + tuple(block[t[a]] for a in dfa.alphabet)
            refined.append(signatures.setdefault(sig, len(signatures)))
        block = refined
        if len(signatures) == count:
            break
        count = len(signatures)

    trans = [{} for _ in range(count)]
    for s, t in enumerate(dfa.trans):
        for a, dst in t.items():
            trans[block[s]][a] = block[dst]
    quotient = Dfa(dfa.alphabet, trans, block[dfa.init], {block[s] for s in dfa.accepting})
    return quotient.trimmed()


# ---------------------------------------------------------------------------
# Language operations
# ---------------------------------------------------------------------------

def universal(alphabet: Iterable[Statement]) -> GeneralPcfa:
    """
    Automaton accepting every non-empty word over the alphabet
    """
    sigma = frozenset(alphabet)
    return GeneralPcfa(
        locations=frozenset([0]),
        alphabet=sigma,
        delta=frozenset((0, a, 0) for a in sigma),
        init=0,
        ends=frozenset([0]),
    )


def empty_general(alphabet: Iterable[Statement] = ()) -> GeneralPcfa:
    return GeneralPcfa(frozenset([0]), frozenset(alphabet), frozenset(), 0, frozenset())


def complement(g: GeneralPcfa, alphabet: Iterable[Statement] = (),
               budget: Optional['Budget'] = None) -> GeneralPcfa:
    """
    Complement relative to non-empty words over g's alphabet joined with the
    given extra symbols
    """
    dfa = minimize(determinize(g, alphabet, budget).complemented(), budget)
    result = dfa.to_general()
    if not result.ends:
        return empty_general(dfa.alphabet)
    return result


def union(g1: GeneralPcfa, g2: GeneralPcfa) -> GeneralPcfa:
    """
    Disjoint union under a fresh initial location
    """
    offset1 = 1
    offset2 = offset1 + max(g1.locations) + 1

    def shift(g, offset):
        return {(src + offset, stmt, dst + offset) for src, stmt, dst in g.delta}

    delta = shift(g1, offset1) | shift(g2, offset2)
    for g, offset in ((g1, offset1), (g2, offset2)):
        for stmt, dst in g.out_edges.get(g.init, []):
            delta.add((0, stmt, dst + offset))
    locations = {0} | {l + offset1 for l in g1.locations} | {l + offset2 for l in g2.locations}
    ends = {l + offset1 for l in g1.ends} | {l + offset2 for l in g2.ends}
    return GeneralPcfa(
        locations=frozenset(locations),
        alphabet=g1.alphabet | g2.alphabet,
        delta=frozenset(delta),
        init=0,
        ends=frozenset(ends),
    )


def union_all(gs: Iterable[GeneralPcfa], alphabet: Iterable[Statement] = ()) -> GeneralPcfa:
    result = empty_general(alphabet)
    for g in gs:
        result = union(result, g)
    return result


def intersection(g1: GeneralPcfa, g2: GeneralPcfa) -> GeneralPcfa:
    """
    Product automaton of two general automata
    """
    start = (g1.init, g2.init)
    ids = {start: 0}
    delta = set()
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        l1, l2 = pair
        for stmt, d1 in g1.out_edges.get(l1, []):
            for s2, d2 in g2.out_edges.get(l2, []):
                if s2 != stmt:
                    continue
                nxt = (d1, d2)
                if nxt not in ids:
                    ids[nxt] = len(ids)
                    queue.append(nxt)
                delta.add((ids[pair], stmt, ids[nxt]))
    ends = {i for (l1, l2), i in ids.items() if l1 in g1.ends and l2 in g2.ends}
    return GeneralPcfa(
        locations=frozenset(ids.values()),
        alphabet=g1.alphabet | g2.alphabet,
        delta=frozenset(delta),
        init=0,
        ends=frozenset(ends),
    )


def is_valid_pcfa(g: GeneralPcfa) -> bool:
    if len(g.ends) != 1:
        return False
    (end,) = g.ends
    seen = set()
    for src, stmt, _ in g.delta:
        if src == end:
            return False
        if (src, stmt) in seen:
            return False
        seen.add((src, stmt))
    return True


def to_pcfa(g: GeneralPcfa) -> Pcfa:
    """
    Reinterpret a general automaton that passes is_valid_pcfa
    """
    if not is_valid_pcfa(g):
        raise InvariantViolation("automaton is not a valid PCFA")
    (end,) = g.ends
    return Pcfa(
        locations=g.locations,
        alphabet=g.alphabet,
        delta={(src, stmt): dst for src, stmt, dst in g.delta},
        init=g.init,
        end=end,
    )


def min_intersect(a: Pcfa, v: GeneralPcfa, budget: Optional['Budget'] = None) -> Pcfa:
    """
    Minimal deterministic automaton of L(a) ∩ L(v), shaped as a PCFA
    """
    start = (a.init, frozenset([v.init]))
    ids = {start: 0}
    trans: List[Dict[Statement, int]] = [{}]
    queue = deque([start])
    while queue:
        state = queue.popleft()
        loc, vset = state
        _tick(budget, ids[state])
        for stmt, dst in a.successors(loc):
            nvset = v.step(vset, stmt)
            if not nvset:
                continue
            nxt = (dst, nvset)
            if nxt not in ids:
                ids[nxt] = len(trans)
                trans.append({})
                queue.append(nxt)
            trans[ids[state]][stmt] = ids[nxt]
    accepting = {i for (loc, vset), i in ids.items() if loc == a.end and vset & v.ends}
    product = Dfa(a.alphabet | v.alphabet, trans, 0, accepting)
    dfa = minimize(product, budget)
    if not dfa.accepting:
        return Pcfa.empty(a.alphabet)
    if len(dfa.accepting) != 1:
        raise InvariantViolation("intersection with a PCFA is not prefix-free")
    (end,) = dfa.accepting
    if dfa.trans[end]:
        raise InvariantViolation("ending location of the intersection has out-edges")
    return Pcfa(
        locations=frozenset(range(dfa.size)),
        alphabet=frozenset(a.alphabet),
        delta={(s, stmt): dst for s, t in enumerate(dfa.trans) for stmt, dst in t.items()},
        init=dfa.init,
        end=end,
    )


def find_word_in_difference(g1: GeneralPcfa, g2: GeneralPcfa) -> Optional[Trace]:
    """
    Shortlex-least word of L(g1) \\ L(g2), or None when L(g1) ⊆ L(g2)
    """
    start = (frozenset([g1.init]), frozenset([g2.init]))
    sigma = sorted_alphabet(g1.alphabet)
    parent = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        s1, s2 = state
        if state != start and (s1 & g1.ends) and not (s2 & g2.ends):
            word = []
            while parent[state] is not None:
                state, stmt = parent[state]
                word.append(stmt)
            return tuple(reversed(word))
        for stmt in sigma:
            n1 = g1.step(s1, stmt)
            if not n1:
                continue
            nxt = (n1, g2.step(s2, stmt))
            if nxt not in parent:
                parent[nxt] = (state, stmt)
                queue.append(nxt)
    return None


def language_equivalent(g1: GeneralPcfa, g2: GeneralPcfa) -> bool:
    return find_word_in_difference(g1, g2) is None and find_word_in_difference(g2, g1) is None


# ---------------------------------------------------------------------------
# Trace search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ProductState:
    loc: int
    excluded: FrozenSet[int]


def _exclusion_product(g: Pcfa, exclude: GeneralPcfa):
    """
    Explicit product of g with the subset automaton of exclude, restricted to
    states that can still reach an accepted, non-excluded ending
    """
    start = _ProductState(g.init, frozenset([exclude.init]))
    edges: Dict[_ProductState, List[Tuple[Statement, _ProductState]]] = {}
    queue = deque([start])
    seen = {start}
    while queue:
        state = queue.popleft()
        out = []
        for stmt, dst in g.successors(state.loc):
            nxt = _ProductState(dst, exclude.step(state.excluded, stmt))
            out.append((stmt, nxt))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
        edges[state] = out

    goals = {s for s in seen if s.loc == g.end and not (s.excluded & exclude.ends)}
    graph = nx.DiGraph()
    graph.add_nodes_from(seen)
    for src, out in edges.items():
        for _, dst in out:
            graph.add_edge(src, dst)
    productive = set(goals)
    for goal in goals:
        productive |= nx.ancestors(graph, goal)
    return start, edges, goals, productive


def enumerate_by_weight(g: Pcfa, exclude: GeneralPcfa) -> Iterator[Tuple[Trace, Fraction]]:
    """
    Lazily yield accepted traces of g outside L(exclude), heaviest first and
    shortlex within one weight
    """
    start, edges, goals, productive = _exclusion_product(g, exclude)
    if start not in productive:
        return
    counter = itertools.count()
    heap = [(Fraction(-1), 0, (), next(counter), start, ())]
    while heap:
        neg_weight, length, keys, _, state, trace = heapq.heappop(heap)
        if state in goals and trace:
            yield trace, -neg_weight
            continue
        for stmt, nxt in edges[state]:
            if nxt not in productive:
                continue
            weight = neg_weight / 2 if is_probabilistic(stmt) else neg_weight
            heapq.heappush(heap, (
                weight, length + 1, keys + (stmt.sort_key(),), next(counter), nxt, trace + (stmt,)
            ))


def shortest_excluded_trace(a: Pcfa, v: GeneralPcfa, storage: GeneralPcfa,
                            budget: Optional['Budget'] = None) -> Optional[Trace]:
    """
    Shortlex-least trace of L(a) ∩ L(v) \\ L(storage)
    """
    start = (a.init, frozenset([v.init]), frozenset([storage.init]))
    parent = {start: None}
    queue = deque([start])
    popped = 0
    while queue:
        _tick(budget, popped)
        popped += 1
        state = queue.popleft()
        loc, vset, sset = state
        if loc == a.end and (vset & v.ends) and not (sset & storage.ends) and state != start:
            word = []
            while parent[state] is not None:
                state, stmt = parent[state]
                word.append(stmt)
            return tuple(reversed(word))
        for stmt, dst in a.successors(loc):
            nvset = v.step(vset, stmt)
            if not nvset:
                continue
            nxt = (dst, nvset, storage.step(sset, stmt))
            if nxt not in parent:
                parent[nxt] = (state, stmt)
                queue.append(nxt)
    return None
