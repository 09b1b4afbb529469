"""
CEGAR engines: the general engine driven by structural bounds and the
refutationally complete engine driven by shortest unexplored traces
"""
import json
import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import IO, Dict, List, Optional, Union

from django.conf import settings

from ..exceptions import BudgetExhausted, ContractError, InvariantViolation, SolverError
from .automata import empty_general, min_intersect, shortest_excluded_trace, union
from .cexcheck import (
    Budget, Counterexample, SpuriousReport, build_counterexample, check_counterexample,
    classify_trace, max_weight_compatible_subset, verify_candidate,
)
from .core import Assume, GeneralPcfa, Pcfa, Trace, format_trace, program_to_pcfa, trace_weight
from .logic import INTERPOLATION_STRATEGIES, Logic
from .mdp import apply_policy, structural_bound
from .refine import (
    Exhausted, RefinementState, apply_split, check_split_set, generalize_nonviolating,
    generalize_violating_finite, initial_refinement, ordered_members, sync_program,
    update_refinement, value_analysis_refine,
)
from .smt import open_session
from .surface import VerificationTask

logger = logging.getLogger(__name__)

ENGINES = ('general', 'rc')


@dataclass
class EngineConfig:
    engine: str = 'general'
    timeout: float = 500
    max_iterations: int = 200
    max_traces: int = 5000
    value_analysis: int = 0
    keep_partial_value_analysis: bool = False
    interpolation: str = 'auto'
    runtime_checks: bool = False
    smt_backend: str = 'auto'
    smt_path: Optional[str] = None
    smt_args: Optional[List[str]] = None
    smt_interpolation: bool = False
    smt_timeout_ms: int = 10000

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ContractError(f"unknown engine {self.engine!r}")
        if self.interpolation not in INTERPOLATION_STRATEGIES:
            raise ContractError(f"unknown interpolation strategy {self.interpolation!r}")
        if self.timeout <= 0 or self.max_iterations <= 0 or self.max_traces <= 0:
            raise ContractError("budgets must be positive")
        if self.value_analysis < 0:
            raise ContractError("value analysis state limit must not be negative")

    @classmethod
    def from_settings(cls, **overrides) -> 'EngineConfig':
        """
        Defaults from Django settings; None-valued overrides are ignored
        """
        values = dict(
            engine=settings.VERIFIER_ENGINE,
            timeout=settings.VERIFIER_TIMEOUT,
            max_iterations=settings.VERIFIER_MAX_ITERATIONS,
            max_traces=settings.VERIFIER_MAX_TRACES,
            value_analysis=settings.VERIFIER_VALUE_ANALYSIS,
            keep_partial_value_analysis=settings.VERIFIER_KEEP_PARTIAL_VALUE_ANALYSIS,
            interpolation=settings.VERIFIER_INTERPOLATION,
            runtime_checks=settings.VERIFIER_RUNTIME_CHECKS,
            smt_backend=settings.SMT_BACKEND,
            smt_path=None,
            smt_args=None,
            smt_interpolation=settings.SMT_SOLVER_INTERPOLATION,
            smt_timeout_ms=settings.SMT_QUERY_TIMEOUT_MS,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@dataclass
class RunStats:
    iterations: int = 0
    elapsed: float = 0.0
    traces_enumerated: int = 0
    smt_queries: int = 0
    refinement_size: int = 0
    splits: int = 1
    value_analysis: str = 'off'

    def as_dict(self) -> Dict:
        return {
            'iterations': self.iterations,
            'elapsed': round(self.elapsed, 3),
            'traces_enumerated': self.traces_enumerated,
            'smt_queries': self.smt_queries,
            'refinement_size': self.refinement_size,
            'splits': self.splits,
            'value_analysis': self.value_analysis,
        }


@dataclass
class Safe:
    bound: Fraction
    iterations: int
    stats: RunStats = field(default_factory=RunStats)

    kind = 'safe'


@dataclass
class Violation:
    cex: Counterexample
    stats: RunStats = field(default_factory=RunStats)

    kind = 'violation'


@dataclass
class Unknown:
    reason: str
    bound: Optional[Fraction] = None
    stats: RunStats = field(default_factory=RunStats)

    kind = 'unknown'


Verdict = Union[Safe, Violation, Unknown]


@dataclass
class Storage:
    """
    Finite automaton of all generalized violating traces, with the
    classification of every member seen so far
    """
    automaton: GeneralPcfa
    violating: List[Trace] = field(default_factory=list)
    classified: Dict[Trace, bool] = field(default_factory=dict)

    @classmethod
    def empty(cls, alphabet) -> 'Storage':
        return cls(empty_general(alphabet))

    def add(self, g: GeneralPcfa):
        self.automaton = union(self.automaton, g)


class IterationLog:
    """
    Structured per-iteration records, mirrored to an optional JSON-lines stream
    """

    def __init__(self, engine: str, stream: Optional[IO] = None):
        self.engine = engine
        self.stream = stream
        self.records: List[Dict] = []
        self.started = time.monotonic()

    def emit(self, iteration: int, bound: Optional[Fraction] = None, **fields):
        record = {
            'engine': self.engine,
            'iteration': iteration,
            'bound': None if bound is None else f"{bound.numerator}/{bound.denominator}",
            'candidate_size': 0,
            'enumerated': 0,
            'violating': 0,
            'non_violating': 0,
            'refinement_size': 0,
            'splits': 1,
        }
        record.update(fields)
        record['elapsed'] = round(time.monotonic() - self.started, 3)
        self.records.append(record)
        line = json.dumps(record, sort_keys=True)
        logger.debug(line)
        if self.stream is not None:
            self.stream.write(line + '\n')
            self.stream.flush()


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------

class CegarEngine:
    """
    One engine owns one solver session for the lifetime of a run
    """
    name = ''

    def __init__(self, task: VerificationTask, cfg: EngineConfig, log_stream: Optional[IO] = None):
        self.task = task
        self.cfg = cfg
        self.program = program_to_pcfa(task.program)
        self.pre, self.post, self.beta = task.pre, task.post, task.beta
        self.log = IterationLog(self.name, log_stream)
        self.stats = RunStats()
        self.budget = Budget.from_timeout(cfg.timeout, cfg.max_traces)
        self.logic: Optional[Logic] = None
        self.best_bound: Optional[Fraction] = None
        self.state: Optional[RefinementState] = None

    def run(self) -> Verdict:
        started = time.monotonic()
        try:
            session = open_session(self.cfg.smt_backend, self.cfg.smt_path, self.cfg.smt_args,
                                   self.cfg.smt_interpolation, self.cfg.smt_timeout_ms)
        except SolverError as e:
            logger.error("cannot open a solver session for %s: %s", self.task.name or 'task', e)
            return Unknown(f"solver: {e}", stats=self.stats)
        session.deadline = self.budget.deadline
        self.logic = Logic(session, self.cfg.interpolation)
        try:
            if self.cfg.runtime_checks:
                self.program.check()
            self.state = self.initial_state()
            verdict = self.loop(self.state)
        except BudgetExhausted as e:
            verdict = Unknown(e.reason, self.best_bound)
        except SolverError as e:
            logger.error("solver failure on %s: %s", self.task.name or 'task', e)
            verdict = Unknown(f"solver: {e}", self.best_bound)
        finally:
            self.stats.smt_queries = session.queries
            session.close()
        self.stats.elapsed = time.monotonic() - started
        verdict.stats = self.stats
        logger.info("%s engine finished %s: %s after %d iterations", self.name,
                    self.task.name or 'task', verdict.kind, self.stats.iterations)
        return verdict

    def initial_state(self) -> RefinementState:
        state = initial_refinement(self.program.alphabet, self.pre)
        limit = self.cfg.value_analysis
        if not limit:
            return state
        result = value_analysis_refine(self.logic, self.program, self.pre, self.post, limit,
                                       keep_partial=self.cfg.keep_partial_value_analysis)
        if isinstance(result, Exhausted):
            logger.info("value analysis gave up: %s", result.reason)
            if result.partial is None:
                self.stats.value_analysis = 'exhausted'
                return state
            self.stats.value_analysis = 'partial'
            return result.partial
        self.stats.value_analysis = 'converged'
        return result

    def next_iteration(self) -> int:
        self.budget.check_time()
        if self.stats.iterations >= self.cfg.max_iterations:
            raise BudgetExhausted(f"more than {self.cfg.max_iterations} iterations")
        self.stats.iterations += 1
        return self.stats.iterations

    def generalize(self, traces, alphabet):
        """
        Floyd-Hoare automata for the non-violating traces among the given ones
        """
        qs = []
        for trace in traces:
            self.budget.check_time()
            verdict = classify_trace(self.logic, trace, self.pre, self.post)
            if verdict.violating:
                continue
            tt = self.logic.sequence_interpolants(trace, self.pre, self.post)
            qs.append((trace, generalize_nonviolating(self.logic, tt, alphabet, self.budget)))
        return qs

    def refine(self, state: RefinementState, qs) -> RefinementState:
        new_state = update_refinement(state, [q for _, q in qs], self.budget)
        if self.cfg.runtime_checks:
            for trace, _ in qs:
                if new_state.v.accepts(trace):
                    raise InvariantViolation(f"refinement still accepts {format_trace(trace)}")
        self.stats.refinement_size = len(new_state.v.locations)
        self.state = new_state
        return new_state

    def violation(self, cex: Counterexample) -> Violation:
        check_counterexample(cex, self.pre, self.post, self.beta, self.logic)
        return Violation(cex)

    def loop(self, state: RefinementState) -> Verdict:
        raise NotImplementedError


class GeneralEngine(CegarEngine):
    name = 'general'

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.candidate: Optional[Pcfa] = None

    def loop(self, state: RefinementState) -> Verdict:
        while True:
            iteration = self.next_iteration()
            synced = sync_program(self.program, state.splits)
            reduced = min_intersect(synced, state.v, self.budget)
            bound, policy = structural_bound(reduced)
            if self.cfg.runtime_checks and self.best_bound is not None and bound > self.best_bound:
                raise InvariantViolation(f"refined bound rose from {self.best_bound} to {bound}")
            self.best_bound = bound if self.best_bound is None else min(bound, self.best_bound)
            self.stats.splits = len(state.splits)
            if bound <= self.beta:
                self.log.emit(iteration, bound, refinement_size=len(state.v.locations),
                              splits=len(state.splits))
                return Safe(bound, iteration)

            cand = apply_policy(reduced, policy)
            self.candidate = cand
            result = verify_candidate(self.logic, cand, self.pre, self.post, self.beta, self.budget)
            if isinstance(result, Counterexample):
                self.log.emit(iteration, bound, candidate_size=cand.transition_count,
                              splits=len(state.splits))
                return self.violation(result)

            report: SpuriousReport = result
            enumerated = len(report.violating) + len(report.non_violating)
            self.stats.traces_enumerated += enumerated
            state = self.handle_spurious(state, cand, report)
            self.log.emit(iteration, bound, candidate_size=cand.transition_count,
                          enumerated=enumerated, violating=len(report.violating),
                          non_violating=len(report.non_violating),
                          refinement_size=len(state.v.locations), splits=len(state.splits))

    def handle_spurious(self, state: RefinementState, cand: Pcfa, report: SpuriousReport) -> RefinementState:
        traces = report.violating + report.non_violating
        relabeled = {}
        split = self.chosen_split(cand)
        if split is not None and report.max_subset:
            others = [t for t in traces if t not in report.max_subset]
            outcome = apply_split(self.logic, state, split, report.split_predicate,
                                  report.max_subset, others, cand)
            if outcome.noop:
                logger.debug("split on %s is a no-op", split)
            else:
                state, relabeled = outcome.state, outcome.relabeled
                if self.cfg.runtime_checks:
                    check_split_set(self.logic, state.splits, self.pre)
        candidates = [relabeled.get(t, t) for t in report.non_violating]
        candidates += [relabeled[t] for t in report.violating if t in relabeled]
        synced = sync_program(self.program, state.splits)
        qs = self.generalize(dict.fromkeys(candidates), synced.alphabet)
        return self.refine(state, qs)

    @staticmethod
    def chosen_split(cand: Pcfa):
        for stmt, _ in cand.successors(cand.init):
            if isinstance(stmt, Assume):
                return stmt.cond
        return None


class RcEngine(CegarEngine):
    name = 'rc'

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.storage: Optional[Storage] = None

    def loop(self, state: RefinementState) -> Verdict:
        synced = sync_program(self.program, state.splits)
        alphabet = synced.alphabet
        storage = Storage.empty(alphabet)
        self.storage = storage
        best = ((), Fraction(0), None)
        while True:
            iteration = self.next_iteration()
            trace = shortest_excluded_trace(synced, state.v, storage.automaton, self.budget)
            if trace is None:
                self.best_bound = best[1]
                self.log.emit(iteration, best[1], refinement_size=len(state.v.locations),
                              violating=len(storage.violating), splits=len(state.splits))
                return Safe(best[1], iteration)
            if self.cfg.runtime_checks and storage.automaton.accepts(trace):
                raise InvariantViolation(f"trace {format_trace(trace)} enumerated twice")
            self.stats.traces_enumerated += 1
            if self.stats.traces_enumerated > self.cfg.max_traces:
                raise BudgetExhausted(f"more than {self.cfg.max_traces} traces enumerated")

            verdict = classify_trace(self.logic, trace, self.pre, self.post)
            if not verdict.violating:
                state = self.refine(state, self.generalize([trace], alphabet))
                self.log.emit(iteration, None, non_violating=1,
                              refinement_size=len(state.v.locations), splits=len(state.splits))
                continue

            weight = trace_weight(trace)
            if weight > self.beta:
                cex = build_counterexample(self.logic, (trace,), weight, verdict.path_cond,
                                           self.pre, self.post, self.beta)
                self.log.emit(iteration, weight, violating=1, splits=len(state.splits))
                return self.violation(cex)

            ofh = generalize_violating_finite(self.logic, trace, self.pre, self.post, alphabet,
                                              self.budget)
            storage.add(ofh.base)
            members = ordered_members(ofh, synced, self.cfg.max_traces, self.budget)
            if trace not in members:
                members.append(trace)
            harmless = []
            for member in members:
                if member in storage.classified:
                    continue
                self.budget.check_time()
                member_verdict = verdict if member == trace else \
                    classify_trace(self.logic, member, self.pre, self.post)
                storage.classified[member] = member_verdict.violating
                if member_verdict.violating:
                    storage.violating.append(member)
                else:
                    harmless.append(member)
            if harmless:
                state = self.refine(state, self.generalize(harmless, alphabet))

            subset, total, cond = max_weight_compatible_subset(
                self.logic, storage.violating, self.pre, self.post, self.budget)
            best = (subset, total, cond)
            self.log.emit(iteration, total, violating=len(storage.violating),
                          non_violating=len(harmless), enumerated=len(members),
                          refinement_size=len(state.v.locations), splits=len(state.splits))
            if total > self.beta:
                cex = build_counterexample(self.logic, subset, total, cond,
                                           self.pre, self.post, self.beta)
                return self.violation(cex)


def make_engine(task: VerificationTask, cfg: EngineConfig, log_stream: Optional[IO] = None) -> CegarEngine:
    """
    Engine named by the config; after run() it still holds the final
    refinement and, per engine, the last candidate or the storage automaton
    """
    engine = RcEngine if cfg.engine == 'rc' else GeneralEngine
    return engine(task, cfg, log_stream)


def verify_general(task: VerificationTask, cfg: EngineConfig, log_stream: Optional[IO] = None) -> Verdict:
    return GeneralEngine(task, replace(cfg, engine='general'), log_stream).run()


def verify_rc(task: VerificationTask, cfg: EngineConfig, log_stream: Optional[IO] = None) -> Verdict:
    return RcEngine(task, replace(cfg, engine='rc'), log_stream).run()


def verify(task: VerificationTask, cfg: Optional[EngineConfig] = None,
           log_stream: Optional[IO] = None) -> Verdict:
    cfg = cfg or EngineConfig.from_settings()
    return make_engine(task, cfg, log_stream).run()
