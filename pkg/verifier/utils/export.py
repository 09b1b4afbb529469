"""
DOT and JSON dumps of automata, MDPs and counterexamples
"""
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, Union

from .cexcheck import Counterexample
from .core import GeneralPcfa, Pcfa, format_trace, trace_weight
from .mdp import Mdp
from .surface import format_bexpr


def _quote(text: str) -> str:
    return '"' + str(text).replace('\\', '\\\\').replace('"', '\\"') + '"'


def _ratio(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def automaton_to_dot(g: Union[Pcfa, GeneralPcfa], name: str = 'pcfa') -> str:
    if isinstance(g, Pcfa):
        edges = sorted(((src, str(stmt), dst) for (src, stmt), dst in g.delta.items()), key=str)
        ends = {g.end}
    else:
        edges = sorted(((src, str(stmt), dst) for src, stmt, dst in g.delta), key=str)
        ends = set(g.ends)
    lines = [f"digraph {_quote(name)} {{", '  rankdir=LR;', '  __start [shape=point];']
    for loc in sorted(g.locations):
        shape = 'doublecircle' if loc in ends else 'circle'
        lines.append(f"  {loc} [shape={shape}];")
    lines.append(f"  __start -> {g.init};")
    for src, label, dst in edges:
        lines.append(f"  {src} -> {dst} [label={_quote(label)}];")
    lines.append('}')
    return '\n'.join(lines) + '\n'


def mdp_to_dict(m: Mdp) -> Dict:
    nodes = []
    for node in m.nodes:
        actions = []
        for act in m.enabled(node):
            dist = m.actions[node][act]
            actions.append({
                'action': str(act),
                'distribution': {str(succ): _ratio(p) for succ, p in sorted(dist.items(), key=lambda kv: str(kv[0]))},
            })
        nodes.append({'node': str(node), 'actions': actions})
    return {'init': str(m.init), 'end': str(m.end), 'nodes': nodes}


def counterexample_to_dict(cex: Counterexample) -> Dict:
    return {
        'traces': [format_trace(t) for t in cex.traces],
        'weights': [_ratio(trace_weight(t)) for t in cex.traces],
        'traceCount': len(cex.traces),
        'totalWeight': _ratio(cex.total_weight),
        'jointPathCondition': format_bexpr(cex.joint_path_cond),
        'witness': cex.witness.as_dict(),
    }


def write_dot(directory: Union[str, Path], name: str, g: Union[Pcfa, GeneralPcfa]) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    target = path / f"{name}.dot"
    target.write_text(automaton_to_dot(g, name))
    return target


def write_json(path: Union[str, Path], payload: Dict) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')
    return target
