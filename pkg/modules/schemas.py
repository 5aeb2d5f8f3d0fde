"""
JSON schemas for run configurations and exported reports (draft 7).
"""

from .families import FAMILIES
from .functionals import LOCAL_INTEGRANDS, PAIR_INTEGRANDS

COMMANDS = ['capacity', 'continuity', 'cutnorm', 'eval', 'gamma', 'minimize', 'mosco', 'semicontinuity']
MEASURE_IDS = ['dirac', 'family_gap', 'family_member', 'lebesgue', 'loglog_density', 'oscillating_difference',
               'random_density']
CUT_NORM_METHODS = ['alternating', 'bruteforce', 'exact_p2', 'product_dual']
FUNCTION_KINDS = ['identity', 'parabola', 'sine', 'zero']
SEQUENCE_KINDS = ['concentration', 'oscillation']

_NULLABLE_NUMBER = {'type': ['number', 'null']}

_PARAMS = {'type': 'object'}

_MEASURE = {
    'type': 'object',
    'required': ['id'],
    'properties': {
        'id': {'enum': MEASURE_IDS},
        'params': _PARAMS,
    },
    'additionalProperties': False,
}

_FAMILY = {
    'type': 'object',
    'required': ['id'],
    'properties': {
        'id': {'enum': sorted(FAMILIES)},
        'params': _PARAMS,
    },
    'additionalProperties': False,
}

_PAIR_INTEGRAND = {
    'type': 'object',
    'required': ['id'],
    'properties': {
        'id': {'enum': sorted(PAIR_INTEGRANDS)},
        'params': _PARAMS,
    },
    'additionalProperties': False,
}

_LOCAL_INTEGRAND = {
    'type': 'object',
    'required': ['id'],
    'properties': {
        'id': {'enum': sorted(LOCAL_INTEGRANDS)},
        'params': _PARAMS,
    },
    'additionalProperties': False,
}

_FUNCTION = {
    'type': 'object',
    'required': ['kind'],
    'properties': {
        'kind': {'enum': FUNCTION_KINDS},
        'k': {'type': 'integer', 'minimum': 1},
        'scale': {'type': 'number'},
    },
    'additionalProperties': False,
}

_POINT = {
    'oneOf': [
        {'type': 'number'},
        {'type': 'array', 'items': {'type': 'number'}, 'minItems': 1, 'maxItems': 2},
    ],
}


def _requires(command, *fields):
    return {
        'if': {'properties': {'command': {'const': command}}},
        'then': {'required': list(fields)},
    }


CONFIG_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'nonlocal lab run configuration',
    'type': 'object',
    'required': ['command', 'grid'],
    'properties': {
        'command': {'enum': COMMANDS},
        'name': {'type': 'string', 'pattern': '^[A-Za-z0-9_.-]+$'},
        'grid': {
            'type': 'object',
            'required': ['dim', 'n'],
            'properties': {
                'dim': {'enum': [1, 2]},
                'n': {'type': 'integer', 'minimum': 1},
            },
            'additionalProperties': False,
        },
        'p': {'type': 'number', 'exclusiveMinimum': 1},
        'seed': {'type': 'integer', 'minimum': 0},
        'output_dir': {'type': 'string'},
        'expected': {'type': 'number'},
        'tolerance': {'type': 'number', 'exclusiveMinimum': 0},
        'measure': _MEASURE,
        'methods': {'type': 'array', 'items': {'enum': CUT_NORM_METHODS}, 'minItems': 1, 'uniqueItems': True},
        'restarts': {'type': 'integer', 'minimum': 1},
        'budget': {'type': 'integer', 'minimum': 1},
        'points': {'type': 'array', 'items': _POINT, 'minItems': 1},
        'family': _FAMILY,
        'f': _PAIR_INTEGRAND,
        'g': _LOCAL_INTEGRAND,
        'u': _FUNCTION,
        'forcing': {'type': 'number'},
        'k_list': {'type': 'array', 'items': {'type': 'integer', 'minimum': 1}, 'minItems': 1},
        'u_kind': {'enum': SEQUENCE_KINDS},
        'v_kind': {'enum': SEQUENCE_KINDS},
        'cutoff': {
            'type': 'object',
            'required': ['phi', 'psi'],
            'properties': {'phi': _FUNCTION, 'psi': _FUNCTION},
            'additionalProperties': False,
        },
        'compute_cut_norm': {'type': 'boolean'},
        'cross_check': {'type': 'boolean'},
        'cross_check_n': {'type': 'integer', 'minimum': 1},
        'truncation_fractions': {
            'type': 'array',
            'items': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
            'minItems': 1,
        },
    },
    'additionalProperties': False,
    'allOf': [
        _requires('cutnorm', 'measure'),
        _requires('capacity', 'points'),
        _requires('eval', 'g', 'u'),
        _requires('minimize', 'g'),
        _requires('continuity', 'family', 'f'),
        _requires('semicontinuity', 'family', 'f'),
        _requires('gamma', 'family'),
        _requires('mosco', 'family'),
    ],
}

_VERDICT = {
    'type': 'object',
    'required': ['passed', 'value', 'tolerance'],
    'properties': {
        'passed': {'type': 'boolean'},
        'value': _NULLABLE_NUMBER,
        'tolerance': _NULLABLE_NUMBER,
        'detail': {'type': 'string'},
    },
}

REPORT_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'nonlocal lab report',
    'type': 'object',
    'required': ['metadata', 'report'],
    'properties': {
        'metadata': {
            'type': 'object',
            'required': ['timestamp', 'version', 'generated_by'],
            'properties': {
                'timestamp': {'type': 'string'},
                'version': {'type': 'string'},
                'generated_by': {'type': 'string'},
            },
        },
        'report': {
            'type': 'object',
            'required': ['name', 'command', 'kind', 'passed', 'verdicts', 'rows', 'metadata'],
            'properties': {
                'name': {'type': 'string'},
                'command': {'enum': COMMANDS},
                'kind': {'enum': ['convergence', 'scalar']},
                'passed': {'type': 'boolean'},
                'decay_exponent': _NULLABLE_NUMBER,
                'decay_at_floor': {'type': 'boolean'},
                'verdicts': {'type': 'object', 'additionalProperties': _VERDICT},
                'rows': {'type': 'array', 'items': {'type': 'object'}},
                'metadata': {'type': 'object'},
            },
            'allOf': [{
                'if': {'properties': {'kind': {'const': 'convergence'}}},
                'then': {'properties': {'rows': {'items': {'required': ['k', 'verdict']}}}},
            }, {
                'if': {'properties': {'kind': {'const': 'scalar'}}},
                'then': {'properties': {'rows': {'items': {'required': ['quantity', 'value']}}}},
            }],
        },
    },
}
