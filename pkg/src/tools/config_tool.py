import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, ClassVar, Dict

from pydantic import BaseModel, Field, ValidationError

from ..core.hessian_operator import THREADS_ENV
from ..models.capillary_models import RunConfig
from ..models.errors import InvalidDataError
from .base_tool import ArtifactTool

logger = logging.getLogger(__name__)

CONFIG_FILE_NAME = "run_config.json"


class ConfigLoadInput(BaseModel):
    """Input schema for run configuration loading."""
    path: str = Field(description="TOML (or JSON) run configuration")


def _resolve_paths(data: Dict[str, Any], base: Path) -> None:
    block = data.get("f", {})
    for key in ("csv", "manufactured_from"):
        value = block.get(key)
        if value is None:
            continue
        resolved = Path(value) if Path(value).is_absolute() else (base / value)
        if not resolved.exists():
            raise InvalidDataError(f"[f] {key} path does not exist: {resolved}")
        block[key] = str(resolved.resolve())


def _apply_environment(data: Dict[str, Any]) -> None:
    solver = data.setdefault("solver", {})
    env = os.getenv(THREADS_ENV)
    if "threads" not in solver and env:
        try:
            solver["threads"] = max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={env!r}")


class ConfigTool(ArtifactTool):
    """Tool for loading and validating run configurations."""

    name: ClassVar[str] = "config_loader"
    description: ClassVar[str] = "Load a TOML run configuration into a validated RunConfig"
    args_schema: ClassVar[type[BaseModel]] = ConfigLoadInput
    status_name: ClassVar[str] = "Run configuration"

    def _run(self, path: str) -> RunConfig:
        """
        Load a configuration.

        Args:
            path: TOML file, or the JSON copy written next to a solution

        Returns:
            Validated RunConfig with [f] paths made absolute
        """
        source = Path(path)
        try:
            raw = source.read_bytes()
        except OSError as exc:
            raise self._fail("could not read configuration", path, exc)

        try:
            if source.suffix == ".json":
                data = json.loads(raw.decode("utf-8"))
            else:
                data = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise InvalidDataError(f"malformed configuration {path}: {exc}")

        _resolve_paths(data, source.parent)
        _apply_environment(data)
        try:
            config = RunConfig(**data)
        except ValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors())
            raise InvalidDataError(f"invalid configuration {path}: {problems}")
        config.source_path = str(source.resolve())
        logger.info(f"Loaded configuration {source}")
        self._ok()
        return config


def load_config(path) -> RunConfig:
    return ConfigTool().run(path=str(path))


def dump_config(config: RunConfig) -> Dict[str, Any]:
    """JSON-ready copy of a configuration for the solution directory."""
    return config.model_dump(mode="json")
