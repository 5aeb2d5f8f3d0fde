import math

import numpy as np
import pandas as pd
import pytest

from modules.report_utils import (
    REPORT_COLUMNS, ConvergenceReport, Verdict, build_frame, convert_to_records, ensure_numeric, fit_decay_exponent,
    is_nonincreasing, json_number, liminf_window_start, relative_gap,
)


def test_fit_recovers_power_law():
    k = np.array([1, 2, 4, 8, 16])
    assert fit_decay_exponent(k, 3.0 * k ** -2.0) == pytest.approx(2.0)
    assert fit_decay_exponent(k, 0.5 * k ** -1.0) == pytest.approx(1.0)


def test_fit_uses_the_last_half():
    k = [1, 2, 4, 8]
    # the first half is ignored
    gaps = [100.0, 1.0, 0.25, 0.0625]
    assert fit_decay_exponent(k, gaps) == pytest.approx(2.0)


def test_fit_at_floor_is_infinite():
    assert math.isinf(fit_decay_exponent([1, 2, 4, 8], [1e-3, 1e-14, 0.0, 0.0]))


def test_fit_without_usable_points_is_nan():
    assert math.isnan(fit_decay_exponent([1, 2], [np.nan, np.nan]))
    assert math.isnan(fit_decay_exponent([4], [0.1]))


def test_json_number():
    assert json_number(1) == 1.0
    assert json_number(float('nan')) is None
    assert json_number(float('inf')) is None
    assert json_number(None) is None
    assert json_number('abc') is None


def test_convert_to_records_cleans_numpy_types():
    frame = pd.DataFrame({'k': np.array([1, 2]), 'gap': [0.5, np.nan], 'ok': np.array([True, False])})
    records = convert_to_records(frame)
    assert records == [{'k': 1, 'gap': 0.5, 'ok': True}, {'k': 2, 'gap': None, 'ok': False}]
    assert type(records[0]['k']) is int
    assert convert_to_records(pd.DataFrame()) == []


def test_ensure_numeric():
    assert ensure_numeric('2.5') == 2.5
    assert math.isnan(ensure_numeric(None))
    assert ensure_numeric('x', default=0.0) == 0.0


def test_small_helpers():
    assert relative_gap(1.1, 1.0) == pytest.approx(0.1)
    assert liminf_window_start([1, 2, 4, 8, 16]) == 8
    assert liminf_window_start([3]) == 2
    assert is_nonincreasing([3, 2, 2, 1])
    assert not is_nonincreasing([3, 2, 2.5])
    assert is_nonincreasing([1.0, 1.0 + 1e-13], slack=1e-12)


def test_build_frame_orders_rows_and_columns():
    frame = build_frame([{'k': 4, 'integral_gap': 0.1, 'extra': 1}, {'k': 1, 'integral_gap': 0.5}])
    assert frame['k'].tolist() == [1, 4]
    assert list(frame.columns[:len(REPORT_COLUMNS)]) == REPORT_COLUMNS
    assert frame.columns[-1] == 'extra'
    assert frame['verdict'].tolist() == ['ok', 'ok']
    assert build_frame([]).empty


def test_report_passes_only_when_every_verdict_passes():
    rows = build_frame([{'k': 1, 'integral_gap': 0.5}])
    report = ConvergenceReport('demo', 'continuity', rows, {'a': Verdict(True, 0.1, 1.0)})
    assert report.passed
    report.verdicts['b'] = Verdict(False, 2.0, 1.0, 'too large')
    assert not report.passed


def test_report_to_dict():
    rows = build_frame([{'k': 1, 'integral_gap': 0.5}, {'k': 2, 'integral_gap': 0.0}])
    report = ConvergenceReport('demo', 'continuity', rows, {'a': Verdict(True, float('nan'), None)},
                               decay_exponent=float('inf'))
    document = report.to_dict()
    assert document['decay_exponent'] is None
    assert document['decay_at_floor'] is True
    assert document['verdicts']['a'] == {'passed': True, 'value': None, 'tolerance': None, 'detail': ''}
    assert document['rows'][0]['k'] == 1
    assert list(report.csv_frame().columns) == REPORT_COLUMNS


def test_scalar_report_keeps_its_columns():
    rows = pd.DataFrame([{'quantity': 'capacity', 'value': 4.0}])
    report = ConvergenceReport('cap', 'capacity', rows, kind='scalar')
    assert list(report.csv_frame().columns) == ['quantity', 'value']
    assert report.to_dict()['decay_at_floor'] is False
