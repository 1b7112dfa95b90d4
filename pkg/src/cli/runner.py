"""Command-line dispatch: generate, pairing, spectrum, cluster, verify, report.

Exit codes: 0 success, 1 verification failures present, 2 input or
configuration errors (usage errors included), 3 internal errors.
"""
import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from config import Config
from src.cli import reports
from src.generators.families import families
from src.globular.assembly import assemble_clustering
from src.globular.comb import clip_comb, naive_top_k
from src.globular.schedule import build_schedule
from src.logic.batteries import configured_battery
from src.logic.evaluator import stone_pairing
from src.logic.formula import Formula
from src.logic.parser import load_formulas, parse, parse_named
from src.sequences.clusters import is_cluster
from src.sequences.dispersion import classify
from src.sequences.sequence import StructureSequence, SubsetSequence
from src.spectrum.detection import detect_spectrum
from src.structures.io import load_structure, save_structure
from src.utils.errors import InputError, InternalError, LimclustError, UsageError
from src.utils.logger import configure, get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_INTERNAL = InternalError.exit_code
# annotation labels that name clusters (components and expanders)
CLUSTER_PREFIXES = ('C', 'E')
MAX_VERIFIED_LABELS = 16


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors surface as UsageError instead of exiting"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--config', help='key = value config file (default: $LIMCLUST_CONFIG)')
    common.add_argument('--json-errors', action='store_true', help='print errors as JSON on stderr')
    common.add_argument('--output', help=f"output directory (default: {Config.OUTPUT_DIR})")
    common.add_argument('--tol', type=float, help=f"tail tolerance (default: {Config.TOL})")
    common.add_argument('--window-fraction', type=float,
                        help=f"tail window fraction (default: {Config.WINDOW_FRACTION})")
    common.add_argument('--d-schedule', help=f"comma-separated radii (default: {','.join(map(str, Config.D_SCHEDULE))})")
    common.add_argument('--battery', help='`name := formula` file used as test battery')
    common.add_argument('--parallelism', type=int, help=f"worker threads (default: {Config.PARALLELISM})")
    common.add_argument('--seed', type=int, help=f"seed of sampled modes (default: {Config.SEED})")
    common.add_argument('--log-level', help=f"logging level (default: {Config.LOG_LEVEL})")
    return common


def _source(parser: argparse.ArgumentParser):
    parser.add_argument('--manifest', help='sequence manifest (JSON list of files or generator spec)')
    parser.add_argument('--family', help='generator family, instead of a manifest')
    parser.add_argument('--params', help='generator parameters as a JSON object')
    parser.add_argument('--range', nargs=2, type=int, metavar=('N0', 'N1'), help='generator index range')


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog='limclust', description='Cluster analysis of local-convergent structure sequences')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', parents=[common], help='write structure files from a generator spec')
    _source(p)
    p.add_argument('--list', action='store_true', help='list generator families and exit')

    p = sub.add_parser('pairing', parents=[common], help='evaluate Stone pairings')
    _source(p)
    p.add_argument('--structure', help='single structure file')
    p.add_argument('--formula', action='append', default=[], help='formula text or `name := formula` (repeatable)')
    p.add_argument('--formulas', help='file of `name := formula` lines')

    p = sub.add_parser('spectrum', parents=[common], help='detect the ball-measure spectrum')
    _source(p)

    p = sub.add_parser('cluster', parents=[common], help='build a marked clustering')
    _source(p)
    p.add_argument('--method', choices=['assembly', 'comb', 'naive'], default='assembly')
    p.add_argument('--top', type=int, default=8, help='clusters marked by the naive method')

    p = sub.add_parser('verify', parents=[common], help='run the assertion suites on a sequence')
    _source(p)

    p = sub.add_parser('report', parents=[common], help='summarise JSON reports')
    p.add_argument('inputs', nargs='+', help='JSON reports written by the other commands')
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    return {
        'tol': args.tol,
        'window_fraction': args.window_fraction,
        'd_schedule': args.d_schedule,
        'battery_file': args.battery,
        'parallelism': args.parallelism,
        'seed': args.seed,
        'log_level': args.log_level,
        'output_dir': args.output,
    }


def _install(config: Config) -> Dict:
    """Make the loaded values the library defaults; returns the previous ones"""
    saved = {key: getattr(Config, key) for key in Config.keys()}
    for key in Config.keys():
        setattr(Config, key, getattr(config, key))
    return saved


def _sequence(args: argparse.Namespace) -> StructureSequence:
    if getattr(args, 'manifest', None):
        return StructureSequence.from_manifest(args.manifest)
    if getattr(args, 'family', None):
        try:
            params = json.loads(args.params) if args.params else {}
        except json.JSONDecodeError as e:
            raise InputError(f"--params is not valid JSON: {e.msg}")
        if args.range:
            index_range = tuple(args.range)
        else:
            start = {f['name']: f['min_index'] for f in families()}.get(args.family, 1)
            index_range = (start, start + 9)
        return StructureSequence.from_generator(args.family, params, index_range, Config.SEED)
    raise InputError("give a sequence with --manifest or --family")


def _path(name: str) -> str:
    return os.path.join(Config.OUTPUT_DIR, name)


def _envelope(kind: str, config: Config, S: Optional[StructureSequence] = None) -> Dict:
    out = {'report': kind, 'config': reports.config_echo(config)}
    if S is not None:
        out['source'] = S.description
    return out


# -- commands --

def cmd_generate(args, config) -> int:
    if args.list:
        sys.stdout.write(reports.dumps({'families': families()}))
        return EXIT_OK
    S = _sequence(args)
    name = S.description.get('generator', 'sequence')
    directory = _path(name)
    os.makedirs(directory, exist_ok=True)
    files, truth = [], {}
    for n in S.indices:
        path = os.path.join(directory, f"n{n}.json")
        save_structure(S[n], path)
        files.append(os.path.basename(path))
        truth[str(n)] = S.annotation(n)
    reports.write_json(os.path.join(directory, 'manifest.json'), {'files': files, 'indices': S.indices})
    reports.write_json(os.path.join(directory, 'ground_truth.json'), {'source': S.description, 'annotations': truth})
    print(f"✅ wrote {len(files)} structures to {directory}")
    return EXIT_OK


def _formulas(args) -> List[Tuple[str, Formula]]:
    out = []
    for text in args.formula:
        if ':=' in text:
            out.extend(parse_named(text, source='--formula'))
        else:
            out.append((text.strip(), parse(text)))
    if args.formulas:
        out.extend(load_formulas(args.formulas))
    if not out:
        raise InputError("give at least one --formula or a --formulas file")
    return out


def cmd_pairing(args, config) -> int:
    formulas = _formulas(args)
    if args.structure:
        structure = load_structure(args.structure)
        S = StructureSequence(lambda n: structure, [0], {'structure': args.structure})
    else:
        S = _sequence(args)
    table = {name: dict(zip(S.indices, S.map(lambda n, A, phi=phi: stone_pairing(A, phi))))
             for name, phi in formulas}
    frame = reports.pairing_frame(table)
    os.makedirs(Config.OUTPUT_DIR, exist_ok=True)
    frame.to_csv(_path('pairing.csv'), float_format=reports.FLOAT_FORMAT, lineterminator='\n')
    payload = _envelope('pairing', config, S)
    payload['pairings'] = {name: {str(n): v for n, v in values.items()} for name, values in table.items()}
    reports.write_json(_path('pairing.json'), payload)
    for name, values in table.items():
        for n, value in values.items():
            prefix = f"{name}" if len(S) == 1 else f"{name} [n={n}]"
            print(f"{prefix}\t{value!r}")
    return EXIT_OK


def cmd_spectrum(args, config) -> int:
    S = _sequence(args)
    report = detect_spectrum(S)
    payload = _envelope('spectrum', config, S)
    payload['spectrum'] = report.to_dict()
    reports.write_json(_path('spectrum.json'), payload)
    reports.write_cdfs(report, _path('cdfs'))
    sys.stdout.write(reports.render_summary(payload))
    return EXIT_OK


def _annotated_clusters(S: StructureSequence) -> List[SubsetSequence]:
    labels = [label for label in S.annotation_labels() if label.startswith(CLUSTER_PREFIXES)]
    return [SubsetSequence.from_annotation(S, label) for label in labels]


def cmd_cluster(args, config) -> int:
    S = _sequence(args)
    payload = _envelope('cluster', config, S)
    if args.method == 'assembly':
        report = detect_spectrum(S)
        schedule = build_schedule(report, S)
        battery = configured_battery(S[S.indices[0]].signature)
        result = assemble_clustering(S, report, schedule, battery)
        payload['spectrum'] = report.to_dict()
        payload['schedule'] = schedule.to_dict()
    else:
        clusters = _annotated_clusters(S)
        if not clusters:
            raise InputError("the sequence carries no annotated clusters to comb")
        result = clip_comb(S, clusters) if args.method == 'comb' else naive_top_k(S, clusters, args.top)
    payload['clustering'] = result.to_dict()
    reports.write_json(_path('clustering.json'), payload)
    reports.write_labels(result, _path('labels'))
    reports.write_marked_structures(S, result, _path('marked'))
    sys.stdout.write(reports.render_summary(payload))
    return EXIT_OK


def _verdict_summary(verdict) -> Dict:
    return {'verdict': verdict.verdict, 'failing': verdict.failing,
            'limit_measure': verdict.limit_measure(), 'alternative': verdict.alternative}


def cmd_verify(args, config) -> int:
    S = _sequence(args)
    payload = _envelope('verify', config, S)
    suites = {}

    domain = SubsetSequence.full(S)
    payload['domain'] = {'classification': classify(S, domain).to_dict(),
                         'cluster': _verdict_summary(is_cluster(S, domain))}

    labels = [label for label in S.annotation_labels() if label != 'S']
    if len(labels) <= MAX_VERIFIED_LABELS:
        payload['clusters'] = {label: _verdict_summary(is_cluster(S, SubsetSequence.from_annotation(S, label)))
                               for label in labels}
    else:
        payload['clusters'] = {}
        logger.info(f"📊 {len(labels)} annotated labels; per-label cluster checks skipped")

    report = detect_spectrum(S)
    bad = [a for a in report.atoms if a.unstable or not a.mass_bound_ok]
    suites['spectrum'] = {'passed': not bad, 'atoms': [a.to_dict() for a in report.atoms],
                          'summary': f"{len(report.atoms)} atoms, {len(bad)} unstable or below the mass bound"}

    if report.atoms:
        schedule = build_schedule(report, S)
        result = assemble_clustering(S, report, schedule, configured_battery(S[S.indices[0]].signature))
        violations = result.violations(window_only=True)
        suites['assembly'] = {'passed': not violations, 'violations': violations,
                              'summary': f"{len(result.checks)} checks, {len(violations)} failed in the window"}

    clusters = _annotated_clusters(S)
    if clusters:
        result = clip_comb(S, clusters)
        violations = result.violations(window_only=True)
        suites['comb'] = {'passed': not violations, 'violations': violations, 'clip': result.clip,
                          'summary': f"{len(clusters)} clusters, {len(violations)} clip checks failed"}

    failures = sum(1 for outcome in suites.values() if not outcome['passed'])
    payload.update({'suites': suites, 'failures': failures, 'passed': failures == 0})
    reports.write_json(_path('verify.json'), payload)
    sys.stdout.write(reports.render_summary(payload))
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_report(args, config) -> int:
    for path in args.inputs:
        sys.stdout.write(reports.render_summary(reports.read_json(path)))
    return EXIT_OK


COMMANDS = {
    'generate': cmd_generate,
    'pairing': cmd_pairing,
    'spectrum': cmd_spectrum,
    'cluster': cmd_cluster,
    'verify': cmd_verify,
    'report': cmd_report,
}


def _report_error(error: LimclustError, json_errors: bool) -> int:
    if json_errors:
        print(json.dumps(error.to_dict(), sort_keys=True, ensure_ascii=False), file=sys.stderr)
    else:
        print(f"❌ {error.message}", file=sys.stderr)
    return error.exit_code


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = '--json-errors' in argv
    saved = None
    try:
        args = build_parser().parse_args(argv)
        config = Config.load(args.config, _overrides(args))
        configure(config.LOG_LEVEL)
        saved = _install(config)
        return COMMANDS[args.command](args, config)
    except LimclustError as e:
        return _report_error(e, json_errors)
    except Exception as e:
        logger.exception(f"❌ unexpected {type(e).__name__}")
        return _report_error(InternalError(e), json_errors)
    finally:
        if saved is not None:
            for key, value in saved.items():
                setattr(Config, key, value)


def main():
    sys.exit(run())
