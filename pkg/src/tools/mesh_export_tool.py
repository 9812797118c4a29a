from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..models.capillary_models import GridMode
from ..models.errors import UnsupportedModeError
from .base_tool import ArtifactTool
from .field_io_tool import format_float


class MeshExportInput(BaseModel):
    """Input schema for mesh export."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    body: Any = Field(description="CapillaryBody to export")
    obj_path: Optional[str] = Field(default=None, description="Wavefront OBJ destination")
    csv_path: Optional[str] = Field(default=None, description="Per-vertex CSV destination")


def mesh_vertices(body) -> np.ndarray:
    """Node vertices in grid order followed by the pole vertex (mean of the innermost ring)."""
    grid = body.grid
    pole = body.vertices[:grid.n_phi].mean(axis=0)
    return np.vstack([body.vertices, pole[None, :]])


def mesh_faces(grid) -> List[tuple]:
    """1-based triangles: two per grid quad plus a fan around the pole, oriented outward."""
    n_rho, n_phi = grid.shape

    def vid(i: int, j: int) -> int:
        return i * n_phi + (j % n_phi) + 1

    pole = n_rho * n_phi + 1
    faces = [(pole, vid(0, j), vid(0, j + 1)) for j in range(n_phi)]
    for i in range(n_rho - 1):
        for j in range(n_phi):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return faces


def vertex_columns(body) -> Dict[str, np.ndarray]:
    """Columns of the per-vertex CSV: index,rho,phi,x,y,z,r1..rn,ell,f."""
    grid = body.grid
    coords = np.asarray(body.vertices)
    columns: Dict[str, np.ndarray] = {
        "index": np.arange(grid.n_nodes),
        "rho": grid.rho_nodes,
        "phi": grid.phi_nodes,
    }
    for axis, name in enumerate("xyz"[:coords.shape[1]]):
        columns[name] = coords[:, axis]
    for a in range(body.n):
        columns[f"r{a + 1}"] = body.radii[:, a]
    columns["ell"] = body.ell.values
    columns["f"] = body.f.values if body.f is not None else np.full(grid.n_nodes, np.nan)
    return columns


class MeshExportTool(ArtifactTool):
    """Tool for exporting a capillary body as Wavefront OBJ and per-vertex CSV."""

    name: ClassVar[str] = "mesh_export"
    description: ClassVar[str] = "Write the reconstructed surface as OBJ triangles and a vertex data CSV"
    args_schema: ClassVar[type[BaseModel]] = MeshExportInput
    status_name: ClassVar[str] = "Mesh exporter"

    def _write(self, path: Path, lines: List[str]) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as exc:
            raise self._fail("could not write mesh artifact", str(path), exc)

    def _run(self, body, obj_path: Optional[str] = None, csv_path: Optional[str] = None) -> List[Path]:
        """
        Export a body.

        Args:
            body: CapillaryBody on a full-mode grid
            obj_path: OBJ destination, skipped when None
            csv_path: vertex CSV destination, skipped when None

        Returns:
            Written paths
        """
        if body.grid.mode is not GridMode.FULL:
            raise UnsupportedModeError("mesh export needs a full-mode grid")
        written = []
        if obj_path:
            lines = [f"# capillary body n={body.n} theta={format_float(body.theta)} "
                     f"n_rho={body.grid.n_rho} n_phi={body.grid.n_phi}"]
            lines.extend("v " + " ".join(format_float(x) for x in vertex) for vertex in mesh_vertices(body))
            lines.extend(f"f {a} {b} {c}" for a, b, c in mesh_faces(body.grid))
            self._write(Path(obj_path), lines)
            written.append(Path(obj_path))
        if csv_path:
            columns = vertex_columns(body)
            names = list(columns)
            rows = zip(*(columns[name] for name in names))
            lines = [",".join(names)]
            lines.extend(
                ",".join(str(int(value)) if name == "index" else format_float(value)
                         for name, value in zip(names, row))
                for row in rows)
            self._write(Path(csv_path), lines)
            written.append(Path(csv_path))
        self._ok()
        return written


def read_obj_vertices(path) -> np.ndarray:
    """Vertex block of an OBJ file, shape (count, 3)."""
    vertices = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.startswith("v "):
                vertices.append([float(x) for x in line.split()[1:4]])
    return np.array(vertices)
