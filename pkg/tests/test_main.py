import json

import pytest

import main
import run_lab_suite


def write_settings(tmp_path):
    path = tmp_path / 'lab.ini'
    path.write_text(
        f"[lab]\noutput_dir = {tmp_path / 'reports'}\nlog_file = {tmp_path / 'logs' / 'lab.log'}\nthreads = 1\n",
        encoding='utf-8',
    )
    return str(path)


def write_run(directory, name, document):
    directory.mkdir(exist_ok=True)
    path = directory / name
    path.write_text(json.dumps(document), encoding='utf-8')
    return str(path)


DIRAC_RUN = {'command': 'cutnorm', 'grid': {'dim': 1, 'n': 15}, 'measure': {'id': 'dirac'}, 'expected': 0.25}
CAPACITY_RUN = {'command': 'capacity', 'grid': {'dim': 1, 'n': 15}, 'points': [0.5]}


def test_list_exits_cleanly(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main.main(['--settings', write_settings(tmp_path), 'list'])
    assert info.value.code == 0
    assert 'mollified_dirac' in capsys.readouterr().out


def test_run_exports_report(tmp_path):
    config = write_run(tmp_path / 'runs', 'dirac.json', DIRAC_RUN)
    with pytest.raises(SystemExit) as info:
        main.main(['--settings', write_settings(tmp_path), 'run', config])
    assert info.value.code == 0
    assert (tmp_path / 'reports' / 'cutnorm.json').exists()


def test_missing_run_config_exits_with_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        main.main(['--settings', write_settings(tmp_path), 'run', str(tmp_path / 'absent.json')])
    assert info.value.code == 1


def test_no_command_prints_help(tmp_path):
    with pytest.raises(SystemExit) as info:
        main.main(['--settings', write_settings(tmp_path)])
    assert info.value.code == 1


def test_select_configs_filters_by_command(tmp_path):
    runs = tmp_path / 'runs'
    write_run(runs, 'b_dirac.json', DIRAC_RUN)
    write_run(runs, 'a_capacity.json', CAPACITY_RUN)
    (runs / 'broken.json').write_text('{', encoding='utf-8')

    all_paths = run_lab_suite.select_configs(str(runs))
    assert [p.split('/')[-1] for p in all_paths] == ['a_capacity.json', 'b_dirac.json', 'broken.json']
    only = run_lab_suite.select_configs(str(runs), 'cutnorm')
    assert [p.split('/')[-1] for p in only] == ['b_dirac.json']


def test_suite_returns_worst_exit_code(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(run_lab_suite, 'ensure_config', lambda: write_settings(tmp_path))
    runs = tmp_path / 'runs'
    write_run(runs, 'dirac.json', DIRAC_RUN)
    assert run_lab_suite.main(['--runs-dir', str(runs), '--no-export']) == 0

    write_run(runs, 'wrong.json', {**DIRAC_RUN, 'expected': 1.0})
    assert run_lab_suite.main(['--runs-dir', str(runs), '--no-export']) == 2

    write_run(runs, 'bad.json', {'command': 'cutnorm'})
    assert run_lab_suite.main(['--runs-dir', str(runs), '--no-export']) == 1
