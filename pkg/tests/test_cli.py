import json

import pytest

from conftest import complete
from src.cli.reports import read_labels
from src.cli import runner
from src.cli.runner import EXIT_FAILURES, EXIT_INTERNAL, EXIT_OK, run
from src.structures.io import save_structure


def cli(*argv):
    return run(list(argv) + ['--log-level', 'ERROR'])


def read(path):
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


@pytest.fixture
def k3_file(tmp_path):
    path = tmp_path / 'k3.json'
    save_structure(complete(3), str(path))
    return str(path)


def test_pairing_on_a_triangle(tmp_path, k3_file, capsys):
    code = cli('pairing', '--structure', k3_file, '--formula', 'adj(x1,x2)', '--output', str(tmp_path / 'out'))
    assert code == EXIT_OK
    name, value = capsys.readouterr().out.strip().split('\t')
    assert name == 'adj(x1,x2)'
    assert float(value) == pytest.approx(2 / 3, abs=1e-12)
    payload = read(tmp_path / 'out' / 'pairing.json')
    assert payload['report'] == 'pairing'
    header = (tmp_path / 'out' / 'pairing.csv').read_text().splitlines()[0]
    assert header == 'n,"adj(x1,x2)"'


def test_named_formulas_over_a_family(tmp_path, capsys):
    code = cli('pairing', '--family', 'clique-pair', '--range', '1', '3',
               '--formula', 'edge := adj(x1,x2)', '--output', str(tmp_path))
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split('\t')[0] for line in lines] == ['edge [n=1]', 'edge [n=2]', 'edge [n=3]']


def test_spectrum_of_twin_cliques(tmp_path, capsys):
    code = cli('spectrum', '--family', 'clique-pair', '--range', '1', '16', '--output', str(tmp_path))
    assert code == EXIT_OK
    payload = read(tmp_path / 'spectrum.json')
    [atom] = payload['spectrum']['atoms']
    assert atom['count'] == 2
    assert atom['lambda'] == pytest.approx(0.5)
    assert 'parallelism' not in payload['config']
    assert (tmp_path / 'cdfs' / 'cdf_n16_d8.csv').exists()
    assert 'λ=0.5000' in capsys.readouterr().out


def test_results_do_not_depend_on_parallelism(tmp_path):
    for workers in ('1', '4'):
        assert cli('spectrum', '--family', 'clique-pair', '--range', '1', '8',
                   '--parallelism', workers, '--output', str(tmp_path / workers)) == EXIT_OK
    assert (tmp_path / '1' / 'spectrum.json').read_bytes() == (tmp_path / '4' / 'spectrum.json').read_bytes()


def test_cluster_writes_labels(tmp_path):
    code = cli('cluster', '--family', 'clique-pair', '--range', '1', '16', '--output', str(tmp_path))
    assert code == EXIT_OK
    payload = read(tmp_path / 'clustering.json')
    assert payload['clustering']['status'] == 'verified'
    labels = read_labels(str(tmp_path / 'labels'), 16)
    assert labels.size == 33
    assert all(label.startswith('M_1_') for label in labels)
    assert (tmp_path / 'marked' / 'n16.json').exists()


def test_naive_needs_annotations(tmp_path, k3_file, capsys):
    manifest = tmp_path / 'files.json'
    manifest.write_text(json.dumps([k3_file, k3_file]))
    code = cli('cluster', '--manifest', str(manifest), '--method', 'naive', '--output', str(tmp_path))
    assert code == 2
    assert 'no annotated clusters' in capsys.readouterr().err


def test_verify_growing_cycles(tmp_path):
    manifest = tmp_path / 'cycles.json'
    manifest.write_text(json.dumps({'generator': 'cycle', 'range': [2, 40]}))
    code = cli('verify', '--manifest', str(manifest), '--output', str(tmp_path))
    payload = read(tmp_path / 'verify.json')
    assert code == EXIT_OK
    assert payload['passed']
    assert payload['suites']['spectrum']['atoms'] == []
    assert payload['domain']['classification']['label'] == 'residual'


def test_generate_then_read_back(tmp_path, capsys):
    assert cli('generate', '--family', 'cycle', '--range', '2', '4', '--output', str(tmp_path)) == EXIT_OK
    manifest = tmp_path / 'cycle' / 'manifest.json'
    assert read(manifest)['indices'] == [2, 3, 4]
    truth = read(tmp_path / 'cycle' / 'ground_truth.json')
    assert truth['annotations']['3']['residual_mass'] == 1.0
    capsys.readouterr()
    assert cli('pairing', '--manifest', str(manifest), '--formula', 'adj(x1,x2)', '--output', str(tmp_path)) == EXIT_OK
    values = [float(line.split('\t')[1]) for line in capsys.readouterr().out.strip().splitlines()]
    assert values == pytest.approx([2 / 4, 2 / 6, 2 / 8])


def test_generate_list(capsys):
    assert cli('generate', '--list') == EXIT_OK
    names = [f['name'] for f in json.loads(capsys.readouterr().out)['families']]
    assert 'star-forest' in names


def test_report_summarises(tmp_path, capsys):
    cli('spectrum', '--family', 'cycle', '--range', '2', '12', '--output', str(tmp_path))
    capsys.readouterr()
    assert cli('report', str(tmp_path / 'spectrum.json')) == EXIT_OK
    assert 'no atoms' in capsys.readouterr().out


class TestErrors:
    def test_json_errors(self, tmp_path, capsys):
        code = cli('spectrum', '--family', 'hypercube', '--json-errors', '--output', str(tmp_path))
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'input'
        assert 'hypercube' in error['message']

    def test_syntax_error_position(self, k3_file, tmp_path, capsys):
        code = cli('pairing', '--structure', k3_file, '--formula', 'adj(x1,', '--json-errors',
                   '--output', str(tmp_path))
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'syntax'
        assert error['line'] == 1

    def test_bad_config_value(self, tmp_path, capsys):
        config = tmp_path / 'bad.cfg'
        config.write_text('tol = -1\n')
        assert cli('spectrum', '--family', 'cycle', '--config', str(config), '--output', str(tmp_path)) == 2
        assert 'tol must be positive' in capsys.readouterr().err

    def test_missing_source(self, tmp_path, capsys):
        assert cli('spectrum', '--output', str(tmp_path)) == 2
        assert '--manifest or --family' in capsys.readouterr().err

    def test_unknown_report_kind(self, tmp_path, capsys):
        path = tmp_path / 'other.json'
        path.write_text('{"report": "other"}')
        assert cli('report', str(path)) == 2

    def test_bad_argument_as_json(self, tmp_path, capsys):
        code = cli('spectrum', '--family', 'cycle', '--tol', 'small', '--json-errors', '--output', str(tmp_path))
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'usage'
        assert '--tol' in error['message']

    def test_unknown_command(self, capsys):
        assert cli('plot') == 2
        assert capsys.readouterr().err.startswith('❌ limclust:')

    def test_unexpected_exception_is_internal(self, tmp_path, capsys, monkeypatch):
        def broken(args, config):
            raise RuntimeError('table went missing')

        monkeypatch.setitem(runner.COMMANDS, 'spectrum', broken)
        code = cli('spectrum', '--family', 'cycle', '--json-errors', '--output', str(tmp_path))
        assert code == EXIT_INTERNAL
        assert code not in (EXIT_OK, EXIT_FAILURES, 2)
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error == {'error': 'internal', 'message': 'RuntimeError: table went missing', 'type': 'RuntimeError'}
