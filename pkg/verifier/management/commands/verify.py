"""
Management command to verify one task file
"""
import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from verifier.exceptions import ParseError, TaskError, VerifierError
from verifier.models import VerificationRun
from verifier.utils.core import program_to_pcfa
from verifier.utils.driver import ENGINES, EngineConfig, make_engine
from verifier.utils.export import mdp_to_dict, write_dot, write_json
from verifier.utils.logic import INTERPOLATION_STRATEGIES
from verifier.utils.mdp import underlying_mdp
from verifier.utils.reporting import EXIT_UNKNOWN, EXIT_USAGE, RunReport, render_table, report_row
from verifier.utils.surface import parse_task


def value_analysis_limit(text):
    """
    A state limit, or off
    """
    if text is None:
        return None
    if str(text).lower() == 'off':
        return 0
    try:
        limit = int(text)
    except ValueError:
        raise CommandError(f"--value-analysis expects a state limit or 'off', got {text!r}",
                           returncode=EXIT_USAGE)
    if limit < 0:
        raise CommandError("--value-analysis must not be negative", returncode=EXIT_USAGE)
    return limit


def switch(text):
    if text is None:
        return None
    return text == 'on'


class Command(BaseCommand):
    help = 'Decide whether the violation probability of a task is at most its bound'

    def add_arguments(self, parser):
        parser.add_argument('task', help='Path to the task file')
        parser.add_argument('--beta', help='Threshold, decimal or num/den; overrides the task file')
        parser.add_argument('--engine', choices=ENGINES)
        parser.add_argument('--timeout', type=float, help='Wall-clock budget in seconds')
        parser.add_argument('--max-iterations', type=int)
        parser.add_argument('--solver', help='SMT-LIB 2 solver executable')
        parser.add_argument('--solver-interpolation', choices=['on', 'off'])
        parser.add_argument('--interpolation', choices=INTERPOLATION_STRATEGIES)
        parser.add_argument('--value-analysis', help="State limit for value analysis, or 'off'")
        parser.add_argument('--emit', choices=['table', 'json'], default='table')
        parser.add_argument('--dot', help='Directory for DOT dumps of the program automaton, the final '
                            'refinement and the last candidate or storage automaton')
        parser.add_argument('--mdp-json', help='File for the underlying MDP of the program')
        parser.add_argument('--log', help='File for the JSON-lines iteration log')
        parser.add_argument('--record', action='store_true', help='Store the run in the database')

    def handle(self, *args, **options):
        path = Path(options['task'])
        try:
            source = path.read_text()
        except OSError as e:
            raise CommandError(f"cannot read {path}: {e.strerror}", returncode=EXIT_USAGE)
        try:
            task = parse_task(source, beta=options.get('beta'), name=path.stem)
        except ParseError as e:
            raise CommandError(f"{path}:{e.line}:{e.column}: {e.message}", returncode=EXIT_USAGE)
        except TaskError as e:
            raise CommandError(f"{path}: {e}", returncode=EXIT_USAGE)

        cfg = EngineConfig.from_settings(
            engine=options.get('engine'),
            timeout=options.get('timeout'),
            max_iterations=options.get('max_iterations'),
            value_analysis=value_analysis_limit(options.get('value_analysis')),
            interpolation=options.get('interpolation'),
            smt_path=options.get('solver'),
            smt_interpolation=switch(options.get('solver_interpolation')),
        )

        if options.get('dot') or options.get('mdp_json'):
            pcfa = program_to_pcfa(task.program)
            if options.get('dot'):
                target = write_dot(options['dot'], f"{task.name}-pcfa", pcfa)
                self.stderr.write(f'Wrote {target}')
            if options.get('mdp_json'):
                target = write_json(options['mdp_json'], mdp_to_dict(underlying_mdp(pcfa)))
                self.stderr.write(f'Wrote {target}')

        log_stream = open(options['log'], 'w') if options.get('log') else None
        try:
            engine = make_engine(task, cfg, log_stream)
            verdict = engine.run()
        except VerifierError as e:
            raise CommandError(f"{path}: {e}", returncode=EXIT_UNKNOWN)
        finally:
            if log_stream is not None:
                log_stream.close()

        if options.get('dot'):
            self.write_engine_dots(options['dot'], task.name, engine)

        report = RunReport.from_verdict(str(path), task.name, cfg.engine, task.beta, verdict)
        if options.get('record'):
            VerificationRun.record(report.as_dict(), source=source)

        if options['emit'] == 'json':
            self.stdout.write(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        else:
            self.stdout.write(render_table([report_row(report)]), ending='')
            if report.counterexample:
                cex = report.counterexample
                self.stdout.write(f"Counterexample: {cex['traceCount']} traces, weight {cex['totalWeight']}")
            elif report.reason:
                self.stdout.write(self.style.ERROR(f'Unknown: {report.reason}'))

        if report.exit_code:
            raise SystemExit(report.exit_code)

    def write_engine_dots(self, directory, name, engine):
        dumps = []
        if engine.state is not None:
            dumps.append((f"{name}-refinement", engine.state.v))
        if getattr(engine, 'candidate', None) is not None:
            dumps.append((f"{name}-candidate", engine.candidate))
        if getattr(engine, 'storage', None) is not None:
            dumps.append((f"{name}-storage", engine.storage.automaton))
        for label, automaton in dumps:
            target = write_dot(directory, label, automaton)
            self.stderr.write(f'Wrote {target}')
