from datetime import datetime
from typing import Any, ClassVar, Optional

from pydantic import BaseModel

from ..models.capillary_models import ArtifactStatus
from ..models.errors import ArtifactError


class ArtifactTool:
    """
    Base class for file-facing tools.

    Subclasses declare ``name``, ``description`` and a pydantic ``args_schema``
    and implement ``_run``. ``run`` validates keyword arguments against the
    schema before dispatching, and every failure is recorded in the tool status.
    """

    name: ClassVar[str] = "artifact_tool"
    description: ClassVar[str] = ""
    args_schema: ClassVar[type[BaseModel]]
    status_name: ClassVar[str] = "Artifact"

    def __init__(self):
        self._status = ArtifactStatus(
            tool_name=self.status_name,
            available=True,
            last_check=datetime.now()
        )

    def run(self, **kwargs: Any) -> Any:
        """Validate arguments and execute the tool."""
        args = self.args_schema(**kwargs)
        return self._run(**{field: getattr(args, field) for field in type(args).model_fields})

    def _run(self, **kwargs: Any) -> Any:
        raise NotImplementedError

    def _fail(self, message: str, path: str, cause: Optional[Exception] = None) -> ArtifactError:
        """Record a failure and build the error to raise."""
        self._status.available = False
        self._status.error_message = f"{message}: {cause}" if cause else message
        return ArtifactError(self._status.error_message, path)

    def _ok(self) -> None:
        self._status.available = True
        self._status.error_message = None

    def get_status(self) -> ArtifactStatus:
        """Get current tool status."""
        self._status.last_check = datetime.now()
        return self._status
