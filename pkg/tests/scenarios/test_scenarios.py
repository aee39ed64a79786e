"""Pytest entrypoints for scenario cases."""

from __future__ import annotations

from pathlib import Path

import pytest

from tests.scenarios.cases.binary_sweep import BinarySweep
from tests.scenarios.cases.fair_bit_triplets import FairBitTriplets
from tests.scenarios.cases.mi_convergence import MiConvergence
from tests.scenarios.cases.monte_carlo_vs_enumeration import MonteCarloVsEnumeration
from tests.scenarios.cases.ternary_sweep import TernarySweep
from tests.support.cli_runner import CliRunner


@pytest.fixture(autouse=True)
def _reproducible_metadata(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def _run_case(case_cls, cli: CliRunner, work_dir: Path) -> None:
    case_cls(cli, work_dir).run()


@pytest.mark.scenario
@pytest.mark.timeout(420)
@pytest.mark.parametrize("case_cls", [FairBitTriplets, MonteCarloVsEnumeration])
def test_scenario_cases(case_cls, cli: CliRunner, tmp_path: Path):
    _run_case(case_cls, cli, tmp_path)


@pytest.mark.scenario
@pytest.mark.slow
@pytest.mark.timeout(900)
@pytest.mark.parametrize("case_cls", [BinarySweep, TernarySweep, MiConvergence])
def test_slow_scenarios(case_cls, cli: CliRunner, tmp_path: Path):
    _run_case(case_cls, cli, tmp_path)
