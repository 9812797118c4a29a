from pathlib import Path
from typing import Optional

from ..constants import EXPORT_FORMATS, get_exit_code
from ..core.capillary_body import reconstruct_surface
from ..models.capillary_models import GridMode, PipelineOutcome
from ..models.errors import InvalidArgumentError, UnsupportedModeError
from ..tools.mesh_export_tool import MeshExportTool
from .common_pipeline import OBJ_FILE, VERTEX_FILE, CommandPipeline, SolutionDirectory


class ExportPipeline(CommandPipeline):
    """Export a solved body as OBJ or per-vertex CSV."""

    command = "export"

    def __init__(self, directory: str, fmt: str = "obj", config_path: Optional[str] = None,
                 out_dir: Optional[str] = None, verbose: bool = False):
        super().__init__(verbose=verbose)
        self.directory = directory
        self.fmt = fmt
        self.config_path = config_path
        self.out_dir = out_dir

    def _execute(self) -> PipelineOutcome:
        if self.fmt not in EXPORT_FORMATS:
            raise InvalidArgumentError(
                f"unknown export format {self.fmt!r}; supported formats: {', '.join(EXPORT_FORMATS)}")
        solution = SolutionDirectory(self.directory, self.config_path)
        if solution.grid.mode is not GridMode.FULL:
            raise UnsupportedModeError("export needs a full-mode solution")
        body = reconstruct_surface(solution.support(), f=solution.data(), k=solution.k)

        out = Path(self.out_dir) if self.out_dir else solution.path
        target = out / (OBJ_FILE if self.fmt == "obj" else VERTEX_FILE)
        tool = MeshExportTool()
        if self.fmt == "obj":
            written = tool.run(body=body, obj_path=str(target))
        else:
            written = tool.run(body=body, csv_path=str(target))
        for path in written:
            self._record(path)
        return self._outcome(get_exit_code('success'), f"{self.fmt} written to {target}")


def create_export_pipeline(directory: str, fmt: str = "obj", config_path: Optional[str] = None,
                           out_dir: Optional[str] = None, verbose: bool = False) -> ExportPipeline:
    return ExportPipeline(directory, fmt=fmt, config_path=config_path, out_dir=out_dir, verbose=verbose)
