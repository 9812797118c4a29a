import json
import math
from pathlib import Path
from typing import Any, ClassVar, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from .base_tool import ArtifactTool


class ReportWriteInput(BaseModel):
    """Input schema for JSON report writing."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: str = Field(description="Destination JSON path")
    report: Any = Field(description="pydantic model or plain dict")
    extra: Optional[Dict[str, Any]] = Field(default=None, description="Additional top-level keys")


def _strict(value: Any) -> Any:
    # JSON has no NaN or Infinity
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _strict(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_strict(item) for item in value]
    return value


def report_payload(report: Union[BaseModel, Dict[str, Any]],
                   extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    payload = report.model_dump(mode="json") if isinstance(report, BaseModel) else dict(report)
    if extra:
        payload.update(extra)
    return _strict(payload)


class ReportTool(ArtifactTool):
    """Tool for writing deterministic JSON reports (sorted keys, repr floats)."""

    name: ClassVar[str] = "report_writer"
    description: ClassVar[str] = "Serialize solve, verification and measure reports as JSON"
    args_schema: ClassVar[type[BaseModel]] = ReportWriteInput
    status_name: ClassVar[str] = "JSON reports"

    def _run(self, path: str, report: Any, extra: Optional[Dict[str, Any]] = None) -> Path:
        """
        Write a report.

        Args:
            path: Destination path
            report: Report model or dict
            extra: Keys merged into the top level

        Returns:
            The written path
        """
        target = Path(path)
        text = json.dumps(report_payload(report, extra), indent=2, sort_keys=True, allow_nan=False)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise self._fail("could not write report", path, exc)
        self._ok()
        return target


def write_report(path, report, extra: Optional[Dict[str, Any]] = None) -> Path:
    return ReportTool().run(path=str(path), report=report, extra=extra)


def read_report(path) -> Dict[str, Any]:
    tool = ReportTool()
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise tool._fail("could not read report", str(path), exc)
