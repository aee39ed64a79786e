"""Shared pytest configuration for unit/integration/scenario suites."""

from __future__ import annotations

from pathlib import Path

import pytest

from boxentropy.exact_oracle import Distribution
from tests.support.cli_runner import CliRunner


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--cli-timeout",
        action="store",
        default="300",
        help="Per-invocation timeout in seconds for subprocess CLI runs",
    )


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return _repo_root()


@pytest.fixture(scope="session")
def configs_dir(repo_root: Path) -> Path:
    return repo_root / "configs"


@pytest.fixture(scope="session")
def cli_timeout(request: pytest.FixtureRequest) -> float:
    value = request.config.getoption("--cli-timeout")
    try:
        return float(value)
    except ValueError as exc:
        raise RuntimeError(f"Invalid --cli-timeout value: {value}") from exc


@pytest.fixture
def cli(repo_root: Path, cli_timeout: float) -> CliRunner:
    return CliRunner(repo_root, timeout=cli_timeout)


@pytest.fixture
def fair_bit() -> Distribution:
    return Distribution.of([0.5, 0.5])


@pytest.fixture
def binary_quarter() -> Distribution:
    return Distribution.of([0.75, 0.25])


@pytest.fixture
def ternary() -> Distribution:
    return Distribution.of([0.625, 0.25, 0.125])
