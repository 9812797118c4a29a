from math import pi
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from src.core.cap_geometry import build_grid
from src.models.capillary_models import CapDomain, GridMode

THETA = pi / 3


@pytest.fixture
def domain() -> CapDomain:
    return CapDomain(n=2, theta=THETA)


@pytest.fixture
def full_grid(domain):
    return build_grid(domain, 32, 32, GridMode.FULL)


@pytest.fixture
def coarse_grid(domain):
    return build_grid(domain, 16, 16, GridMode.FULL)


@pytest.fixture
def axi_grid():
    return build_grid(CapDomain(n=3, theta=THETA), 128, mode=GridMode.AXISYMMETRIC)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a TOML run configuration into tmp_path and return its path."""

    def _write(name: str = "run.toml", *, n: int = 2, k: int = 1, theta: float = THETA,
               mode: str = "full", n_rho: int = 32, n_phi: int = 32, f_block: str = 'builtin = "constant"',
               solver_block: str = "", out: str = "out") -> Path:
        text = (
            f"[problem]\nn = {n}\nk = {k}\ntheta = {theta!r}\nmode = \"{mode}\"\n"
            f"n_rho = {n_rho}\nn_phi = {n_phi}\n\n"
            f"[f]\n{f_block}\n\n"
            + (f"[solver]\n{solver_block}\n\n" if solver_block else "")
            + f"[output]\ndirectory = \"{(tmp_path / out).as_posix()}\"\n"
        )
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
