#!/usr/bin/env python3
"""
Test script for the run configuration, command-line and run-record modules.
"""
import sys
import os
import json
from pathlib import Path
import tempfile
from unittest.mock import patch

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.errors import ConfigError, HypothesisError
from common.run_config import build_medium, build_model, load_config, parse_config, serialize_config
from core import core as cli
from core.core import EXIT_ERROR, EXIT_OK, output_root
from reporting.registry import list_runs
from reporting.reporter import fail_record, finish_record, generate_summary_text, start_record
from solver.solver import LocalModel, NonlocalModel

VALIDATE_CONFIG = """
run:
  kind: validate
  seed: 7
medium:
  generator: checkerboard
  d: 1
  diffusion_range: [1.0, 2.0]
  fu0_range: [1.0, 2.0]
  modulation_floor: 0.5
"""

SIMULATE_CONFIG = """
run:
  kind: simulate
  seed: 3
medium:
  generator: homogeneous
  d: 1
grid:
  h: 0.1
experiment:
  T: 2.0
  observe: [0.5]
"""


def _problem_paths(error):
    return [path for path, _ in error.problems]


def test_parse_round_trip():
    """A parsed config serializes to YAML that parses back to the same config and digest."""
    print("Testing config round trip...")

    config = parse_config(VALIDATE_CONFIG)
    assert config.kind == 'validate' and config.seed == 7
    assert config.grid['h'] == 0.1
    assert config.medium['fu0_range'] == [1.0, 2.0]
    again = parse_config(serialize_config(config))
    assert again == config
    assert again.digest() == config.digest()

    # the output location does not enter the digest
    moved = parse_config(VALIDATE_CONFIG, {'out': '/tmp/elsewhere'})
    assert moved.out == '/tmp/elsewhere'
    assert moved.digest() == config.digest()
    reseeded = parse_config(VALIDATE_CONFIG, {'seed': 8})
    assert reseeded.digest() != config.digest()

    print("✓ config round trip test passed")


def test_config_errors_carry_paths():
    """Every malformed field is reported with its dotted path in one pass."""
    print("Testing config errors...")

    text = VALIDATE_CONFIG + "  colour: red\nextras:\n  a: 1\n"
    try:
        parse_config(text)
        assert False, "expected ConfigError"
    except ConfigError as e:
        assert ('medium.colour', 'unknown key') in e.problems
        assert 'extras' in _problem_paths(e)
        assert {'path': 'medium.colour', 'message': 'unknown key'} in e.details()

    vlin = """
run: {kind: vlin}
experiment: {delta: 0.6}
region: {kind: ball, radius: 1.0}
"""
    try:
        parse_config(vlin)
        assert False, "expected ConfigError"
    except ConfigError as e:
        assert _problem_paths(e) == ['experiment.delta']

    try:
        parse_config(VALIDATE_CONFIG, {'kind': 'simulate'})
        assert False, "expected ConfigError"
    except ConfigError as e:
        assert 'run.kind' in _problem_paths(e)

    try:
        parse_config("run: {kind: homogenize}\nexperiment: {eps: [0.5, 1.0]}\n")
        assert False, "expected ConfigError"
    except ConfigError as e:
        assert 'experiment.eps' in _problem_paths(e)
        assert 'region' in _problem_paths(e)

    print("✓ config error test passed")


def test_hypothesis_gate():
    """A drift at the bound sup|b|^2 = 4 lambda inf fu0 is refused before any solve."""
    print("Testing hypothesis gate...")

    text = "run: {kind: validate}\nmedium: {d: 2, drift: [2.0, 0.0]}\n"
    try:
        parse_config(text)
        assert False, "expected HypothesisError"
    except HypothesisError as e:
        assert 'medium.drift' in _problem_paths(e)

    # the same document is well-formed without the gate
    config = parse_config(text, check_hypotheses=False)
    assert config.medium['drift'] == [2.0, 0.0]

    try:
        parse_config("run: {kind: validate}\nreaction: {profile: degenerate}\n")
        assert False, "expected HypothesisError"
    except HypothesisError as e:
        assert 'reaction.profile' in _problem_paths(e)

    print("✓ hypothesis gate test passed")


def test_shipped_configs():
    """Every file under configs/ parses and passes the hypothesis gates; the campaign files carry their targets."""
    print("Testing shipped configs...")

    root = Path(__file__).resolve().parent / 'configs'
    configs = {path.stem: load_config(path) for path in sorted(root.glob('*.yaml'))}
    assert len(configs) >= 11

    wulff = configs['wulff_2d'].experiment
    assert (wulff['directions'], wulff['wulff_tolerance'], wulff['expected_radius']) == (32, 0.1, 2.0)
    assert wulff['front_directions'] == 8

    assert configs['speed_1d'].grid['h_ladder'] == [0.1, 0.05, 0.025]
    assert isinstance(build_model(configs['speed_nonlocal_1d']), NonlocalModel)

    vlin = configs['vlin_2d']
    assert vlin.d == 2 and vlin.medium['generator'] == 'checkerboard'
    assert vlin.experiment['times'] == [10.0, 20.0, 40.0]

    sweep = configs['sweep_ball_2d']
    assert sweep.d == 2 and sweep.region['kind'] == 'ball'
    assert sweep.experiment['eps'] == [1.0, 0.5, 0.25, 0.125]
    assert sweep.experiment['final_ratio'] == 0.25

    for name in ('speed_1d', 'sweep_ball_2d'):
        plain, surrogate = configs[name], configs[f"{name}_surrogate"]
        assert surrogate.reaction['surrogate'] and not plain.reaction['surrogate']
        assert surrogate.to_dict()['experiment'] == plain.to_dict()['experiment']
        assert surrogate.digest() != plain.digest()

    print("✓ shipped config test passed")


def test_builders():
    """The medium is rebuilt bit-identically from the config; no kernel means a local model."""
    print("Testing builders...")

    config = parse_config(VALIDATE_CONFIG)
    assert build_medium(config).seed == 7
    assert build_medium(config, seed=9).seed == 9
    model = build_model(config)
    assert isinstance(model, LocalModel)
    assert model.medium.d == 1

    print("✓ builder test passed")


def test_output_root():
    """--out wins over run.out, which wins over the environment."""
    print("Testing output root...")

    assert output_root(Path('/a'), '/b') == Path('/a')
    assert output_root(None, '/b') == Path('/b')
    with patch.dict(os.environ, {'KPPLAB_OUTPUT': '/c'}):
        assert output_root(None, None) == Path('/c')

    print("✓ output root test passed")


def _write_config(directory: Path, text: str, name: str = 'run.yaml') -> Path:
    path = directory / name
    path.write_text(text)
    return path


def test_validate_command_is_reproducible():
    """Two validate runs of one config write the same artifacts into the same run directory."""
    print("Testing validate command...")

    with tempfile.TemporaryDirectory() as temp_dir:
        temp_path = Path(temp_dir)
        config_path = _write_config(temp_path, VALIDATE_CONFIG)
        out = temp_path / 'runs'
        argv = ['validate', '--config', str(config_path), '--out', str(out), '--threads', '1', '-q']

        assert cli.main(argv) == EXIT_OK
        run_dirs = [p for p in out.iterdir() if p.is_dir()]
        assert len(run_dirs) == 1
        run_dir = run_dirs[0]
        assert run_dir.name == f"validate-{parse_config(VALIDATE_CONFIG).digest()[:12]}"
        for name in ('config.yaml', 'run_record.json', 'summary.txt', 'validation.json', 'kpplab.log'):
            assert (run_dir / name).exists(), name
        first = (run_dir / 'validation.json').read_bytes()
        first_summary = (run_dir / 'summary.txt').read_bytes()

        record = json.loads((run_dir / 'run_record.json').read_text())
        assert record['status'] == 'passed'
        assert record['artifacts'] == ['validation.json']

        assert cli.main(argv) == EXIT_OK
        assert (run_dir / 'validation.json').read_bytes() == first
        assert (run_dir / 'summary.txt').read_bytes() == first_summary

    print("✓ validate command test passed")


def test_simulate_command():
    """simulate writes the observation table with one row per integer time and requested time."""
    print("Testing simulate command...")

    with tempfile.TemporaryDirectory() as temp_dir:
        temp_path = Path(temp_dir)
        config_path = _write_config(temp_path, SIMULATE_CONFIG)
        out = temp_path / 'runs'
        argv = ['simulate', '--config', str(config_path), '--out', str(out), '--threads', '1', '-q']

        assert cli.main(argv) == EXIT_OK
        run_dir = next(out.iterdir())
        lines = (run_dir / 'observations.csv').read_text().splitlines()
        assert lines[0].startswith('#')
        assert lines[1] == 'time,label,min,max,mass,boundary_activity'
        assert [line.split(',')[0] for line in lines[2:]] == ['0.0', '0.5', '1.0', '2.0']
        first = (run_dir / 'observations.csv').read_bytes()

        assert cli.main(argv) == EXIT_OK
        assert (run_dir / 'observations.csv').read_bytes() == first

    print("✓ simulate command test passed")


def test_error_exit_codes():
    """Hypothesis violations and unknown commands exit with 2 and a JSON error on stdout."""
    print("Testing error exits...")

    with tempfile.TemporaryDirectory() as temp_dir:
        temp_path = Path(temp_dir)
        bad = _write_config(temp_path, "run: {kind: validate}\nmedium: {d: 2, drift: [2.0, 0.0]}\n")
        with patch('builtins.print') as mock_print:
            code = cli.main(['validate', '--config', str(bad), '--out', str(temp_path / 'runs')])
        assert code == EXIT_ERROR
        payload = json.loads(mock_print.call_args[0][0])
        assert payload['error'] == 'HypothesisError'
        assert payload['details'][0]['path'] == 'medium.drift'
        assert not (temp_path / 'runs').exists()

        with patch('builtins.print') as mock_print:
            code = cli.main(['frobnicate'])
        assert code == EXIT_ERROR
        assert json.loads(mock_print.call_args[0][0])['error'] == 'ConfigError'

        with patch('builtins.print') as mock_print:
            code = cli.main(['validate', '--config', str(temp_path / 'missing.yaml')])
        assert code == EXIT_ERROR
        assert 'file not found' in json.loads(mock_print.call_args[0][0])['message']

    print("✓ error exit test passed")


def test_registry_flags_partial_runs():
    """list_runs reports complete runs, runs without a record and truncated records."""
    print("Testing run registry...")

    with tempfile.TemporaryDirectory() as temp_dir:
        root = Path(temp_dir)
        assert list_runs(root) == ([], [])
        assert list_runs(root / 'missing') == ([], [])

        config_path = _write_config(root, VALIDATE_CONFIG)
        out = root / 'runs'
        assert cli.main(['validate', '--config', str(config_path), '--out', str(out), '-q']) == EXIT_OK

        (out / 'simulate-aaaaaaaaaaaa').mkdir()
        (out / 'simulate-aaaaaaaaaaaa' / 'config.yaml').write_text(SIMULATE_CONFIG)
        (out / 'speed-bbbbbbbbbbbb').mkdir()
        (out / 'speed-bbbbbbbbbbbb' / 'run_record.json').write_text('{"kind": "spe')
        (out / 'scratch').mkdir()

        entries, problems = list_runs(out)
        assert problems == []
        by_name = {entry.run_dir.name.split('-')[0]: entry for entry in entries}
        assert set(by_name) == {'simulate', 'speed', 'validate'}
        assert by_name['validate'].record.passed and not by_name['validate'].partial
        assert by_name['simulate'].partial and by_name['simulate'].problem == 'no run record'
        assert by_name['speed'].partial and by_name['speed'].problem.startswith('truncated record')

        assert cli.main(['list', '--out', str(out)]) == EXIT_OK

    print("✓ run registry test passed")


def test_run_record_lifecycle():
    """Records move from running to passed, failed or error; summaries carry no wall times."""
    print("Testing run records...")

    with tempfile.TemporaryDirectory() as temp_dir:
        run_dir = Path(temp_dir)
        record = start_record('speed', 'f' * 64, 5)
        assert record.status == 'running' and not record.complete

        finish_record(record, run_dir, {'summary': {'speed': 2.0}, 'checks': {'a': True, 'b': False},
                                        'artifacts': [run_dir / 'speeds.json']})
        assert record.status == 'failed' and record.complete
        assert record.artifacts == ['speeds.json']

        text = generate_summary_text(record)
        assert record.started not in text and record.finished not in text
        assert 'b' in text and 'FAIL' in text

        errored = fail_record(start_record('speed', 'f' * 64, 5), {'error': 'DomainTooSmallError', 'message': 'edge'})
        assert errored.status == 'error'
        assert 'DomainTooSmallError: edge' in generate_summary_text(errored)

    print("✓ run record test passed")


def main():
    """Run all tests."""
    print("Starting cli_io module tests...\n")

    try:
        test_parse_round_trip()
        test_config_errors_carry_paths()
        test_hypothesis_gate()
        test_shipped_configs()
        test_builders()
        test_output_root()
        test_validate_command_is_reproducible()
        test_simulate_command()
        test_error_exit_codes()
        test_registry_flags_partial_runs()
        test_run_record_lifecycle()

        print("\n🎉 All tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
