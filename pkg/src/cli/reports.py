"""Report files: sorted JSON, CDF curves as CSV, one-byte label files, text summaries."""
import json
import os
from typing import Dict, List

import numpy as np
import pandas as pd

from src.globular.assembly import ClusteringResult
from src.sequences.sequence import StructureSequence
from src.spectrum.detection import SpectrumReport
from src.structures.io import save_structure
from src.utils.errors import InputError

FLOAT_FORMAT = '%.12g'
# runtime-only options; they never change a result and stay out of the reports
RUNTIME_KEYS = ('parallelism', 'log_level', 'output_dir')


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return sorted(value) if isinstance(value, (set, frozenset)) else list(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(payload: Dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=_plain) + '\n'


def config_echo(config) -> Dict:
    return {k: v for k, v in config.as_dict().items() if k not in RUNTIME_KEYS}


def write_json(path: str, payload: Dict) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(dumps(payload))
    return path


def read_json(path: str) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except OSError as e:
        raise InputError(f"cannot read report {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")


def write_cdfs(report: SpectrumReport, directory: str) -> List[str]:
    """One CSV (t, F) per (index, radius) law"""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for (n, d), cdf in sorted(report.cdfs.items()):
        path = os.path.join(directory, f"cdf_n{n}_d{d}.csv")
        cdf.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        paths.append(path)
    return paths


def write_labels(result: ClusteringResult, directory: str) -> List[str]:
    """labels_n<n>.bin: one byte per vertex indexing into marks.json"""
    os.makedirs(directory, exist_ok=True)
    write_json(os.path.join(directory, 'marks.json'), {'marks': result.marks()})
    paths = []
    for n in result.indices:
        path = os.path.join(directory, f"labels_n{n}.bin")
        with open(path, 'wb') as handle:
            handle.write(result.codes(n).tobytes())
        paths.append(path)
    return paths


def read_labels(directory: str, n: int) -> np.ndarray:
    marks = read_json(os.path.join(directory, 'marks.json'))['marks']
    path = os.path.join(directory, f"labels_n{n}.bin")
    try:
        with open(path, 'rb') as handle:
            codes = np.frombuffer(handle.read(), dtype=np.uint8)
    except OSError as e:
        raise InputError(f"cannot read label file {path}: {e}")
    if codes.size and int(codes.max()) >= len(marks):
        raise InputError(f"{path}: code {int(codes.max())} has no entry in marks.json")
    return np.array(marks, dtype=object)[codes].astype(str)


def write_marked_structures(S: StructureSequence, result: ClusteringResult, directory: str) -> List[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for n in result.indices:
        path = os.path.join(directory, f"n{n}.json")
        save_structure(result.marked_structure(S, n), path)
        paths.append(path)
    return paths


def pairing_frame(table: Dict[str, Dict[int, float]]) -> pd.DataFrame:
    frame = pd.DataFrame(table)
    frame.index.name = 'n'
    return frame.sort_index()


# -- summaries --

def _summarise_spectrum(data: Dict) -> List[str]:
    lines = [f"📊 spectrum over window {data['window'][0]}..{data['window'][-1]}, "
             f"radii {data['d_schedule']}"]
    if not data['atoms']:
        lines.append("   no atoms: the whole measure is residual")
    for atom in data['atoms']:
        flag = ' ⚠️ unstable' if atom.get('unstable') else ''
        lines.append(f"   λ={atom['lambda']:.4f}  p={atom['mass']:.4f}  N={atom['count']}{flag}")
    lines.append(f"   residual mass λ₀={data['residual_mass']:.4f}")
    lines.extend(f"   ⚠️ {w}" for w in data.get('warnings', []))
    return lines


def _summarise_clustering(data: Dict) -> List[str]:
    icon = '✅' if data['status'] == 'verified' else '⚠️'
    lines = [f"{icon} {data['kind']} clustering {data['status']}: {len(data['marks'])} marks, "
             f"{data['checks']['failed']}/{data['checks']['total']} checks failed"]
    last = data['window'][-1] if data['window'] else None
    if last is not None and str(last) in data.get('measures', {}):
        row = data['measures'][str(last)]
        for name in data['marks']:
            if name in row:
                lines.append(f"   {name:<12} ν={row[name]:.4f}")
    for violation in data.get('violations', [])[:10]:
        lines.append(f"   ❌ {violation['check']} n={violation['index']} value={violation['value']:.4g} "
                     f"bound={violation['bound']:.4g}")
    return lines


def _summarise_verify(data: Dict) -> List[str]:
    icon = '✅' if data['passed'] else '❌'
    lines = [f"{icon} verification {'passed' if data['passed'] else 'failed'}: {data['failures']} failures"]
    domain = data.get('domain', {})
    if domain:
        lines.append(f"   whole domain: {domain['classification']['label']} ({domain['classification']['reason']})")
    for name, verdict in sorted(data.get('clusters', {}).items()):
        lines.append(f"   cluster {name}: {verdict['verdict']} {verdict.get('failing') or ''}".rstrip())
    for suite, outcome in sorted(data.get('suites', {}).items()):
        mark = '✅' if outcome['passed'] else '❌'
        lines.append(f"   {mark} {suite}: {outcome['summary']}")
    return lines


def _summarise_pairing(data: Dict) -> List[str]:
    lines = ["📊 pairings"]
    for name, values in sorted(data['pairings'].items()):
        shown = ', '.join(f"{n}: {v:.6g}" for n, v in values.items())
        lines.append(f"   {name}: {shown}")
    return lines


def render_summary(data: Dict) -> str:
    """Human-readable summary of any JSON report written by the CLI"""
    kind = data.get('report')
    renderers = {
        'spectrum': lambda d: _summarise_spectrum(d['spectrum']),
        'cluster': lambda d: _summarise_clustering(d['clustering']),
        'verify': _summarise_verify,
        'pairing': _summarise_pairing,
    }
    if kind not in renderers:
        raise InputError(f"unknown report kind {kind!r}")
    return '\n'.join(renderers[kind](data)) + '\n'
