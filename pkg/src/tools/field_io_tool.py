from pathlib import Path
from typing import Any, ClassVar, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.cap_geometry import CapGrid, ScalarField, build_grid
from ..models.capillary_models import CapDomain, GridMode
from ..models.errors import InvalidArgumentError, InvalidDataError
from .base_tool import ArtifactTool

# Coordinates are written with 17 significant digits, so a reload reproduces them exactly
COORDINATE_TOL = 1e-12


def format_float(value: float) -> str:
    """Shortest text that reloads to the same double."""
    return format(float(value), ".17g")


def sidecar_line(grid: CapGrid) -> str:
    """The ``# n=.. theta=.. n_rho=.. n_phi=.. mode=..`` header line."""
    return (f"# n={grid.n} theta={format_float(grid.theta)} n_rho={grid.n_rho} "
            f"n_phi={grid.n_phi} mode={grid.mode.value}")


def parse_sidecar(line: str) -> CapGrid:
    """Rebuild the grid described by a sidecar header line."""
    if not line.startswith("#"):
        raise InvalidDataError(f"missing grid header line, got {line[:60]!r}")
    try:
        entries = dict(token.split("=", 1) for token in line.lstrip("#").split())
        domain = CapDomain(n=int(entries["n"]), theta=float(entries["theta"]))
        mode = GridMode(entries["mode"])
        return build_grid(domain, int(entries["n_rho"]), int(entries["n_phi"]), mode)
    except (KeyError, ValueError) as exc:
        raise InvalidDataError(f"malformed grid header {line!r}: {exc}")


def coordinate_columns(grid: CapGrid) -> Dict[str, np.ndarray]:
    if grid.mode is GridMode.FULL:
        return {"rho": grid.rho_nodes, "phi": grid.phi_nodes}
    return {"rho": grid.rho_nodes}


class FieldWriteInput(BaseModel):
    """Input schema for the field writer."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: str = Field(description="Destination CSV path")
    field: Any = Field(description="ScalarField to write")


class FieldReadInput(BaseModel):
    """Input schema for the field reader."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: str = Field(description="CSV path to read")
    grid: Optional[Any] = Field(default=None, description="Grid the field must live on")


class TableWriteInput(BaseModel):
    """Input schema for per-node tables."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: str = Field(description="Destination CSV path")
    grid: Any = Field(description="Grid providing the coordinate columns")
    columns: Dict[str, Any] = Field(description="Column name -> per-node values, in order")


def _write_rows(path: Path, grid: CapGrid, columns: Dict[str, np.ndarray]) -> None:
    table = {**coordinate_columns(grid), **columns}
    names = list(table)
    data = np.column_stack([np.asarray(table[name], dtype=float) for name in names])
    lines = [sidecar_line(grid), ",".join(names)]
    lines.extend(",".join(format_float(x) for x in row) for row in data)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class FieldWriterTool(ArtifactTool):
    """Tool for writing scalar fields as CSV with a grid header line."""

    name: ClassVar[str] = "field_writer"
    description: ClassVar[str] = "Write a scalar field as rho,phi,value rows (rho,value when axisymmetric)"
    args_schema: ClassVar[type[BaseModel]] = FieldWriteInput
    status_name: ClassVar[str] = "Field CSV writer"

    def _run(self, path: str, field: ScalarField) -> Path:
        """
        Write a field.

        Args:
            path: Destination path
            field: Field to write

        Returns:
            The written path
        """
        target = Path(path)
        try:
            _write_rows(target, field.grid, {"value": field.values})
        except OSError as exc:
            raise self._fail("could not write field", path, exc)
        self._ok()
        return target


class TableWriterTool(ArtifactTool):
    """Tool for writing several per-node columns in the field CSV layout."""

    name: ClassVar[str] = "table_writer"
    description: ClassVar[str] = "Write per-node columns with the grid header line"
    args_schema: ClassVar[type[BaseModel]] = TableWriteInput
    status_name: ClassVar[str] = "Table CSV writer"

    def _run(self, path: str, grid: CapGrid, columns: Dict[str, Any]) -> Path:
        target = Path(path)
        try:
            _write_rows(target, grid, columns)
        except OSError as exc:
            raise self._fail("could not write table", path, exc)
        self._ok()
        return target


class FieldReaderTool(ArtifactTool):
    """Tool for reading scalar fields written by FieldWriterTool."""

    name: ClassVar[str] = "field_reader"
    description: ClassVar[str] = "Read a scalar field CSV and rebuild its grid"
    args_schema: ClassVar[type[BaseModel]] = FieldReadInput
    status_name: ClassVar[str] = "Field CSV reader"

    def _run(self, path: str, grid: Optional[CapGrid] = None) -> ScalarField:
        """
        Read a field.

        Args:
            path: CSV path
            grid: Optional grid the file must match

        Returns:
            ScalarField on the file's grid
        """
        source = Path(path)
        try:
            lines = source.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise self._fail("could not read field", path, exc)
        if len(lines) < 3:
            raise InvalidDataError(f"field file {path} is truncated")

        file_grid = parse_sidecar(lines[0])
        if grid is not None and not grid.same_as(file_grid):
            raise InvalidArgumentError(f"grid mismatch: {path} holds {file_grid!r}, expected {grid!r}")
        expected = list(coordinate_columns(file_grid)) + ["value"]
        header = [name.strip() for name in lines[1].split(",")]
        if header != expected:
            raise InvalidDataError(f"expected columns {expected} in {path}, got {header}")

        try:
            data = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InvalidDataError(f"malformed rows in {path}: {exc}")
        if data.shape != (file_grid.n_nodes, len(expected)):
            raise InvalidDataError(
                f"{path} has {data.shape[0]} rows of {data.shape[1]} columns, "
                f"expected {file_grid.n_nodes} rows of {len(expected)}")
        for column, coords in enumerate(coordinate_columns(file_grid).values()):
            if np.max(np.abs(data[:, column] - coords)) > COORDINATE_TOL:
                raise InvalidDataError(f"node coordinates in {path} do not match the grid header")
        self._ok()
        return ScalarField(grid or file_grid, data[:, -1])


def write_field(path, field: ScalarField) -> Path:
    return FieldWriterTool().run(path=str(path), field=field)


def read_field(path, grid: Optional[CapGrid] = None) -> ScalarField:
    return FieldReaderTool().run(path=str(path), grid=grid)


def write_table(path, grid: CapGrid, columns: Dict[str, np.ndarray]) -> Path:
    return TableWriterTool().run(path=str(path), grid=grid, columns=columns)

