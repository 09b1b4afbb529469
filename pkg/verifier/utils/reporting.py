"""
Run reports: the stable JSON schema shared by the commands and the API, and
the plain-text result table
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .driver import Safe, Unknown, Verdict, Violation
from .export import counterexample_to_dict

EXIT_SAFE = 0
EXIT_VIOLATION = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3

RESULT_LABELS = {'safe': 'SAT', 'violation': 'UnSAT', 'unknown': 'Unknown'}
TABLE_COLUMNS = ('Name', 'Bound', 'Time', 'Result')


def ratio(q: Optional[Fraction]) -> Optional[str]:
    if q is None:
        return None
    return f"{q.numerator}/{q.denominator}"


@dataclass
class RunReport:
    task: str
    name: str
    engine: str
    beta: Fraction
    verdict: str
    bound: Optional[Fraction] = None
    time: float = 0.0
    iterations: int = 0
    reason: str = ''
    counterexample: Optional[Dict] = None
    stats: Dict = field(default_factory=dict)

    @classmethod
    def from_verdict(cls, task: str, name: str, engine: str, beta: Fraction,
                     verdict: Verdict) -> 'RunReport':
        report = cls(task=task, name=name, engine=engine, beta=beta, verdict=verdict.kind,
                     time=verdict.stats.elapsed, iterations=verdict.stats.iterations,
                     stats=verdict.stats.as_dict())
        if isinstance(verdict, Safe):
            report.bound = verdict.bound
        elif isinstance(verdict, Violation):
            report.bound = verdict.cex.total_weight
            report.counterexample = counterexample_to_dict(verdict.cex)
        elif isinstance(verdict, Unknown):
            report.bound = verdict.bound
            report.reason = verdict.reason
        return report

    @property
    def result(self) -> str:
        if self.verdict == 'unknown' and self.reason.startswith('wall-clock'):
            return 'TO'
        return RESULT_LABELS[self.verdict]

    @property
    def exit_code(self) -> int:
        return {'safe': EXIT_SAFE, 'violation': EXIT_VIOLATION}.get(self.verdict, EXIT_UNKNOWN)

    def as_dict(self) -> Dict:
        return {
            'task': self.task,
            'name': self.name,
            'engine': self.engine,
            'beta': ratio(self.beta),
            'verdict': self.verdict,
            'result': self.result,
            'bound': ratio(self.bound),
            'time': round(self.time, 3),
            'iterations': self.iterations,
            'reason': self.reason,
            'totalWeight': self.counterexample['totalWeight'] if self.counterexample else None,
            'counterexample': self.counterexample,
            'stats': self.stats,
        }


def render_table(rows: Sequence[Sequence[str]], columns: Sequence[str] = TABLE_COLUMNS) -> str:
    widths = [len(c) for c in columns]
    for row in rows:
        widths = [max(w, len(str(cell))) for w, cell in zip(widths, row)]
    lines = ['  '.join(str(c).ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append('  '.join('-' * w for w in widths))
    for row in rows:
        lines.append('  '.join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip())
    return '\n'.join(lines) + '\n'


def report_row(report: RunReport) -> List[str]:
    if report.result == 'TO':
        return [report.name, '-', 'TO', 'TO']
    bound = ratio(report.bound) or '-'
    return [report.name, bound, f"{report.time:.2f}", report.result]
