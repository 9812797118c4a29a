"""
Numerical Constants and Exit Codes

This module defines the tolerances, exit codes and builtin generator names
shared by the solver, the verification suite and the command-line front end.
All modules should import from here so the thresholds stay consistent.
"""

from typing import Dict, List

# Garding cone membership: sigma_i > CONE_EPS * scale**i; SolverSettings.cone_eps overrides it
CONE_EPS: float = 1e-10

# Relative gap below which two sides of an inequality count as equal
EQUALITY_REL_GAP: float = 1e-9

# Principal-minor expansion is used up to this matrix dimension
MINOR_EXPANSION_MAX_N: int = 4

# Grid limits
MIN_N_RHO: int = 4
MIN_N_PHI: int = 8

# Homotopy samples used for the admissibility report of the default path
PATH_SAMPLES: int = 11

# Steiner parameters checked by the verification suite
STEINER_SAMPLES: List[float] = [0.25, 0.5, 1.0]

# Builtin right-hand-side generators
BUILTIN_GENERATORS: List[str] = [
    'constant',      # f = value
    'manufactured',  # f = sigma_k(W(h*)) for h* = ell * (1 + eps * profile)
    'radial',        # f = sum_j coefficients[j] * cos(rho)**j
]

MANUFACTURED_PROFILES: List[str] = [
    'cos2',     # cos^2(pi rho / (2 theta))
    'quartic',  # (1 - (rho/theta)^2)^2
]

EXPORT_FORMATS: List[str] = ['obj', 'csv']

# Exit codes of the command-line front end
EXIT_CODES: Dict[str, int] = {
    'success': 0,
    'verification-failed': 1,
    'warnings': 2,
    'solver-failure': 3,
    'invalid-data': 4,
}

# Error kind -> exit code category
ERROR_KIND_METADATA: Dict[str, Dict[str, str]] = {
    'invalid-argument': {
        'category': 'invalid-data',
        'description': 'An argument is outside its documented range',
        'emoji': '❌',
    },
    'unsupported-mode': {
        'category': 'invalid-data',
        'description': 'The grid mode cannot represent the problem',
        'emoji': '❌',
    },
    'invalid-data': {
        'category': 'invalid-data',
        'description': 'Input data are unusable',
        'emoji': '❌',
    },
    'inconsistent-data': {
        'category': 'invalid-data',
        'description': 'Data violate the necessary condition: integral of f against <xi, E_alpha> must vanish',
        'emoji': '❌',
    },
    'artifact-io': {
        'category': 'invalid-data',
        'description': 'Reading or writing an artifact failed',
        'emoji': '📁',
    },
    'precondition-violation': {
        'category': 'solver-failure',
        'description': 'A documented precondition does not hold',
        'emoji': '🚫',
    },
    'ellipticity-lost': {
        'category': 'solver-failure',
        'description': 'The spectrum of W left the Garding cone',
        'emoji': '🚫',
    },
    'no-convergence': {
        'category': 'solver-failure',
        'description': 'Newton iteration cap reached',
        'emoji': '🚫',
    },
    'continuation-stuck': {
        'category': 'solver-failure',
        'description': 'Homotopy step fell below its floor',
        'emoji': '🚫',
    },
}


def get_exit_code(category: str) -> int:
    """Get the exit code for an outcome category."""
    return EXIT_CODES[category]


def get_exit_code_for_error(kind: str) -> int:
    """Get the exit code for an error kind (unknown kinds are solver failures)."""
    category = ERROR_KIND_METADATA.get(kind, {}).get('category', 'solver-failure')
    return EXIT_CODES[category]


def get_error_description(kind: str) -> str:
    """Get the human readable description for an error kind."""
    return ERROR_KIND_METADATA.get(kind, {}).get('description', kind)


def get_error_emoji(kind: str) -> str:
    """Get the emoji used when printing an error kind."""
    return ERROR_KIND_METADATA.get(kind, {}).get('emoji', '❌')
