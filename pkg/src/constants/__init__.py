from .numerics import (
    CONE_EPS,
    EQUALITY_REL_GAP,
    MINOR_EXPANSION_MAX_N,
    MIN_N_RHO,
    MIN_N_PHI,
    PATH_SAMPLES,
    STEINER_SAMPLES,
    BUILTIN_GENERATORS,
    MANUFACTURED_PROFILES,
    EXPORT_FORMATS,
    EXIT_CODES,
    ERROR_KIND_METADATA,
    get_exit_code,
    get_exit_code_for_error,
    get_error_description,
    get_error_emoji
)

__all__ = [
    'CONE_EPS',
    'EQUALITY_REL_GAP',
    'MINOR_EXPANSION_MAX_N',
    'MIN_N_RHO',
    'MIN_N_PHI',
    'PATH_SAMPLES',
    'STEINER_SAMPLES',
    'BUILTIN_GENERATORS',
    'MANUFACTURED_PROFILES',
    'EXPORT_FORMATS',
    'EXIT_CODES',
    'ERROR_KIND_METADATA',
    'get_exit_code',
    'get_exit_code_for_error',
    'get_error_description',
    'get_error_emoji'
]
