from .solve_pipeline import create_solve_pipeline, SolvePipeline
from .forward_pipeline import create_forward_pipeline, ForwardPipeline
from .verify_pipeline import create_verify_pipeline, VerifyPipeline
from .measures_pipeline import create_measures_pipeline, MeasuresPipeline
from .export_pipeline import create_export_pipeline, ExportPipeline

__all__ = [
    'create_solve_pipeline', 'SolvePipeline',
    'create_forward_pipeline', 'ForwardPipeline',
    'create_verify_pipeline', 'VerifyPipeline',
    'create_measures_pipeline', 'MeasuresPipeline',
    'create_export_pipeline', 'ExportPipeline'
]
