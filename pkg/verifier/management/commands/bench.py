"""
Management command to run a benchmark manifest
"""
import json
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import django
import yaml
from django.core.management.base import BaseCommand, CommandError

from verifier.exceptions import ParseError, TaskError, VerifierError
from verifier.models import VerificationRun
from verifier.utils.driver import ENGINES, EngineConfig, verify
from verifier.utils.reporting import (
    EXIT_SAFE, EXIT_UNKNOWN, EXIT_USAGE, EXIT_VIOLATION, RunReport, TABLE_COLUMNS,
    render_table, report_row,
)
from verifier.utils.surface import parse_task

VERDICTS = ('safe', 'violation', 'unknown')


def load_manifest(path: Path):
    """
    Read the task list of a YAML manifest; an empty file is an empty list
    """
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except OSError as e:
        raise CommandError(f"cannot read {path}: {e.strerror}", returncode=EXIT_USAGE)
    except yaml.YAMLError as e:
        raise CommandError(f"malformed manifest {path}: {e}", returncode=EXIT_USAGE)
    entries = (data.get('tasks') or []) if isinstance(data, dict) else None
    if not isinstance(entries, list):
        raise CommandError(f"manifest {path} needs a 'tasks' list", returncode=EXIT_USAGE)
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or 'file' not in entry:
            raise CommandError(f"manifest entry {i} needs a 'file'", returncode=EXIT_USAGE)
        if entry.get('engine', 'general') not in ENGINES:
            raise CommandError(f"manifest entry {i} names an unknown engine", returncode=EXIT_USAGE)
        if entry.get('expected') is not None and entry['expected'] not in VERDICTS:
            raise CommandError(f"manifest entry {i} expects an unknown verdict", returncode=EXIT_USAGE)
    return entries


def run_entry(directory: str, entry: dict, default_timeout=None) -> dict:
    """
    Run one manifest entry with a private engine and solver session
    """
    path = Path(directory) / entry['file']
    name = entry.get('name') or path.stem
    beta = entry.get('beta')
    task = parse_task(path.read_text(), beta=None if beta is None else str(beta), name=name)
    cfg = EngineConfig.from_settings(
        engine=entry.get('engine'),
        timeout=entry.get('timeout', default_timeout),
        value_analysis=entry.get('value_analysis'),
        interpolation=entry.get('interpolation'),
    )
    verdict = verify(task, cfg)
    report = RunReport.from_verdict(str(path), name, cfg.engine, task.beta, verdict)
    return report.as_dict()


class Command(BaseCommand):
    help = 'Run every task of a benchmark manifest and compare verdicts with expectations'

    def add_arguments(self, parser):
        parser.add_argument('directory', help='Directory holding the task files')
        parser.add_argument('--manifest', help='Manifest file (default: <directory>/manifest.yaml)')
        parser.add_argument('--workers', type=int, default=1)
        parser.add_argument('--timeout', type=float, help='Default per-task timeout in seconds')
        parser.add_argument('--emit', choices=['table', 'json'], default='table')
        parser.add_argument('--record', action='store_true', help='Store every run in the database')

    def handle(self, *args, **options):
        directory = Path(options['directory'])
        manifest = Path(options['manifest']) if options.get('manifest') else directory / 'manifest.yaml'
        entries = load_manifest(manifest)
        for entry in entries:
            if not (directory / entry['file']).is_file():
                raise CommandError(f"missing task file {directory / entry['file']}", returncode=EXIT_USAGE)

        timeout = options.get('timeout')
        try:
            if options['workers'] > 1 and len(entries) > 1:
                with ProcessPoolExecutor(max_workers=options['workers'], initializer=django.setup) as pool:
                    futures = [pool.submit(run_entry, str(directory), entry, timeout) for entry in entries]
                    results = [future.result() for future in futures]
            else:
                results = [run_entry(str(directory), entry, timeout) for entry in entries]
        except (ParseError, TaskError) as e:
            raise CommandError(f"malformed task: {e}", returncode=EXIT_USAGE)
        except VerifierError as e:
            raise CommandError(str(e), returncode=EXIT_UNKNOWN)

        rows, failures, undecided = [], 0, 0
        for entry, result in zip(entries, results):
            expected = entry.get('expected')
            if result['verdict'] == 'unknown':
                undecided += 1
                status = '-'
            elif expected is None:
                status = '-'
            elif result['verdict'] == expected:
                status = 'pass'
            else:
                failures += 1
                status = 'FAIL'
            result['expected'] = expected
            result['status'] = status
            if options.get('record'):
                VerificationRun.record(result)
            rows.append(self.row(result) + [expected or '-', status])

        if options['emit'] == 'json':
            self.stdout.write(json.dumps(results, indent=2, sort_keys=True))
        else:
            self.stdout.write(render_table(rows, TABLE_COLUMNS + ('Expected', 'Status')), ending='')
            summary = f'{len(results) - failures - undecided} passed, {failures} failed, {undecided} undecided'
            style = self.style.ERROR if failures else self.style.SUCCESS
            self.stdout.write(style(summary))

        code = EXIT_VIOLATION if failures else EXIT_UNKNOWN if undecided else EXIT_SAFE
        if code:
            raise SystemExit(code)

    @staticmethod
    def row(result: dict):
        report = RunReport(
            task=result['task'], name=result['name'], engine=result['engine'], beta=None,
            verdict=result['verdict'], time=result['time'], reason=result['reason'],
        )
        if result['bound'] is not None:
            report.bound = Fraction(result['bound'])
        return report_row(report)
