import json
import os

import numpy as np
import pytest

from modules.cli import (
    build_function, build_measure, execute, list_fixtures, load_config, run, validate_config,
)
from modules.errors import ConfigValidationError, InvalidInputError
from modules.lab_config import LabSettings
from modules.measures import total_mass
from modules.sobolev_core import make_grid

SETTINGS = LabSettings(threads=1)


def write_config(tmp_path, document, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding='utf-8')
    return str(path)


def report_dir(tmp_path):
    return str(tmp_path / 'reports')


def dirac_config(tmp_path, **overrides):
    document = {
        'command': 'cutnorm',
        'name': 'dirac_check',
        'grid': {'dim': 1, 'n': 31},
        'measure': {'id': 'dirac'},
        'expected': 0.25,
        'tolerance': 1e-6,
        'output_dir': report_dir(tmp_path),
    }
    document.update(overrides)
    return document


def test_passing_run_exports_report(tmp_path):
    code = run(write_config(tmp_path, dirac_config(tmp_path)), SETTINGS)
    assert code == 0
    with open(os.path.join(report_dir(tmp_path), 'dirac_check.json'), encoding='utf-8') as f:
        document = json.load(f)
    assert document['report']['kind'] == 'scalar'
    assert document['report']['rows'][0]['quantity'] == 'exact_p2'
    assert os.path.exists(os.path.join(report_dir(tmp_path), 'dirac_check.csv'))


def test_failed_verdict_exits_with_two(tmp_path):
    code = run(write_config(tmp_path, dirac_config(tmp_path, expected=0.5)), SETTINGS)
    assert code == 2
    assert os.path.exists(os.path.join(report_dir(tmp_path), 'dirac_check.json'))


def test_malformed_config_writes_nothing(tmp_path):
    document = dirac_config(tmp_path)
    del document['grid']
    assert run(write_config(tmp_path, document), SETTINGS) == 1
    assert not os.path.exists(report_dir(tmp_path))


def test_invalid_json_exits_with_one(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"command": ', encoding='utf-8')
    assert run(str(path), SETTINGS) == 1


def test_runtime_error_exits_with_one(tmp_path):
    document = dirac_config(tmp_path, p=3, methods=['exact_p2'])
    assert run(write_config(tmp_path, document), SETTINGS) == 1
    assert not os.path.exists(report_dir(tmp_path))


def test_no_export(tmp_path):
    assert run(write_config(tmp_path, dirac_config(tmp_path)), SETTINGS, export=False) == 0
    assert not os.path.exists(report_dir(tmp_path))


def test_validate_config_reports_pointers():
    problems = validate_config({'command': 'cutnorm', 'grid': {'dim': 3, 'n': 4}, 'measure': {'id': 'dirac'}})
    assert [pointer for pointer, _ in problems] == ['/grid/dim']


def test_validate_config_requires_command_fields():
    problems = validate_config({'command': 'gamma', 'grid': {'dim': 1, 'n': 31}})
    assert len(problems) == 1
    assert 'family' in problems[0][1]


def test_validate_config_rejects_unknown_keys():
    problems = validate_config({'command': 'capacity', 'grid': {'dim': 1, 'n': 7}, 'points': [0.5], 'colour': 1})
    assert problems and problems[0][0] == ''


def test_load_config_raises_with_problems(tmp_path):
    path = write_config(tmp_path, {'command': 'spiral', 'grid': {'dim': 1, 'n': 7}})
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert info.value.problems[0][0] == '/command'


def test_capacity_command(tmp_path):
    document = {'command': 'capacity', 'grid': {'dim': 1, 'n': 127}, 'points': [0.5], 'expected': 4.0}
    report = execute(document, SETTINGS)
    assert report.passed
    assert report.rows['value'].iloc[0] == pytest.approx(4.0)


def test_eval_command():
    document = {
        'command': 'eval', 'grid': {'dim': 1, 'n': 63},
        'g': {'id': 'power', 'params': {'p': 2}}, 'u': {'kind': 'sine', 'k': 1},
    }
    report = execute(document, SETTINGS)
    values = dict(zip(report.rows['quantity'], report.rows['value']))
    assert values['F'] == 0.0
    assert values['forcing'] == 0.0
    # int (pi cos(pi x))^2 dx = pi^2 / 2
    assert values['G'] == pytest.approx(np.pi ** 2 / 2, rel=2e-3)
    assert values['total'] == pytest.approx(values['G'])


def test_eval_command_with_nonlocal_part():
    document = {
        'command': 'eval', 'grid': {'dim': 1, 'n': 15}, 'measure': {'id': 'dirac'},
        'f': {'id': 'constant', 'params': {'c': 2.0}},
        'g': {'id': 'power'}, 'u': {'kind': 'zero'},
    }
    rows = execute(document, SETTINGS).rows
    values = dict(zip(rows['quantity'], rows['value']))
    assert values['F'] == pytest.approx(2.0)
    assert values['total'] == pytest.approx(2.0)


def test_minimize_command():
    grid = make_grid(1, 63)
    document = {
        'command': 'minimize', 'grid': {'dim': 1, 'n': 63}, 'g': {'id': 'power', 'params': {'p': 2}},
        'forcing': 1.0, 'expected': -(1 - grid.h ** 2) / 48, 'tolerance': 1e-6,
    }
    report = execute(document, SETTINGS)
    assert report.passed
    assert report.name == 'minimize'


def test_cutnorm_methods_agree_at_p2():
    document = {
        'command': 'cutnorm', 'grid': {'dim': 1, 'n': 8}, 'measure': {'id': 'random_density'},
        'methods': ['exact_p2', 'alternating', 'bruteforce', 'product_dual'], 'budget': 500, 'seed': 3,
    }
    rows = execute(document, SETTINGS).rows.set_index('quantity')
    exact = rows.loc['exact_p2', 'value']
    assert rows.loc['alternating', 'value'] == pytest.approx(exact, rel=1e-6)
    assert rows.loc['bruteforce', 'value'] <= exact * (1 + 1e-10)
    assert bool(rows.loc['bruteforce', 'lower_bound'])
    assert not bool(rows.loc['alternating', 'lower_bound'])


def test_continuity_command_runs_family(tmp_path):
    document = {
        'command': 'continuity', 'grid': {'dim': 1, 'n': 31}, 'family': {'id': 'oscillating_density'},
        'f': {'id': 'product'}, 'k_list': [2, 4], 'compute_cut_norm': False,
    }
    report = execute(document, SETTINGS)
    assert report.kind == 'convergence'
    assert report.rows['cut_norm_gap'].isna().all()
    assert report.metadata['family'] == 'oscillating_density'


def test_build_measure_variants():
    grid = make_grid(1, 15)
    member = build_measure({'id': 'family_member', 'params': {'family': 'mollified_dirac', 'k': 2}}, grid)
    assert total_mass(member) == pytest.approx(1.0)
    gap = build_measure({'id': 'family_gap', 'params': {'family': 'oscillating_density', 'k': 2}}, grid)
    assert gap.signed
    signed = build_measure({'id': 'random_density', 'params': {'low': -1.0}}, grid, seed=4)
    assert signed.signed
    with pytest.raises(InvalidInputError):
        build_measure({'id': 'family_gap'}, grid)


def test_build_function_kinds():
    grid = make_grid(1, 7)
    x = grid.nodes[:, 0]
    assert build_function({'kind': 'identity', 'scale': 2.0}, grid).values == pytest.approx(2 * x)
    assert build_function({'kind': 'parabola'}, grid).values == pytest.approx(x * (1 - x))
    assert build_function({'kind': 'sine', 'k': 3}, grid).values == pytest.approx(np.sin(3 * np.pi * x))
    assert not np.any(build_function({'kind': 'zero'}, grid).values)


def test_list_fixtures_is_sorted():
    lines = list_fixtures().splitlines()
    ids = [line.split()[0] for line in lines[1:]]
    assert ids == sorted(ids)
    assert 'dirac' in ids and 'oscillating_density' in ids


def test_same_config_and_seed_give_identical_csv(tmp_path):
    document = {
        'command': 'continuity', 'name': 'repeat', 'grid': {'dim': 1, 'n': 31},
        'family': {'id': 'oscillating_density'}, 'f': {'id': 'lorentzian'}, 'k_list': [1, 2, 4], 'seed': 5,
    }
    contents = []
    for folder in ('first', 'second'):
        document['output_dir'] = str(tmp_path / folder)
        run(write_config(tmp_path, document), SETTINGS)
        with open(os.path.join(document['output_dir'], 'repeat.csv'), 'rb') as f:
            contents.append(f.read())
    assert contents[0]
    assert contents[0] == contents[1]


def test_mosco_truncation_fractions_are_validated():
    document = {'command': 'mosco', 'grid': {'dim': 1, 'n': 15}, 'family': {'id': 'constant'},
                'truncation_fractions': [0.5, 1.5]}
    problems = validate_config(document)
    assert [pointer for pointer, _ in problems] == ['/truncation_fractions/1']


def test_mosco_command_uses_truncation_fractions():
    document = {'command': 'mosco', 'grid': {'dim': 1, 'n': 15}, 'family': {'id': 'constant'},
                'f': {'id': 'abs_power', 'params': {'p': 2}}, 'k_list': [1, 2], 'truncation_fractions': [0.5]}
    report = execute(document, SETTINGS)
    assert report.metadata['truncation_fractions'] == [0.5]
    assert 'truncated_energy_0.5' in report.rows
    assert report.verdicts['truncation_bound'].passed
