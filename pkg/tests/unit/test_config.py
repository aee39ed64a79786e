from __future__ import annotations

from pathlib import Path
from typing import Any

import pytest
import yaml

from boxentropy.config import (
    DRAFT_07,
    SCHEMA_DIR_ENV,
    a_table_of,
    build_sweep_spec,
    build_validator,
    load_run_config,
    parse_yaml,
    schema_errors,
    validate_payload,
)
from boxentropy.errors import EXIT_IO, ConfigError, OutputIOError
from boxentropy.estimators import EstimatorId, LeadingTerm
from boxentropy.mi import BiasClass
from tests.support.table_helpers import write_config

SHIPPED = ["triplet.yaml", "triplet-naive.yaml", "binary-sweep.yaml", "ternary-sweep.yaml", "mi-synth.yaml"]


def _sweep(**overrides: Any) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "command": "sweep",
        "distribution": [0.75, 0.25],
        "tuple_sizes": [2, 10],
        "estimator": "schuermann_binomial",
        "a_grid": [[1.0, 1.0], [1 / 3, 3.0]],
        "replicates": 100,
        "seed": 1,
    }
    payload.update(overrides)
    return {k: v for k, v in payload.items() if v is not None}


def _mi(**overrides: Any) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "command": "mi",
        "synth": {"profile": "pym_like", "size": 5000},
        "n_grid": [100, 1000],
        "replicates": 4,
        "seed": 3,
    }
    payload.update(overrides)
    return {k: v for k, v in payload.items() if v is not None}


def _errors(payload: dict[str, Any], base_dir: Path = Path(".")) -> list[str]:
    with pytest.raises(ConfigError) as info:
        validate_payload(payload, "test.yaml", base_dir)
    return info.value.errors


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_are_valid(configs_dir: Path, name: str):
    cfg = load_run_config(configs_dir / name)
    assert cfg.command in ("sweep", "mi")
    assert cfg.log_level == "info"
    assert cfg.output is None


def test_shipped_configs_are_listed(repo_root: Path, configs_dir: Path):
    assert sorted(p.name for p in configs_dir.glob("*.yaml")) == sorted(SHIPPED)
    readme = (repo_root / "README.md").read_text(encoding="utf-8")
    for name in SHIPPED:
        assert f"`configs/{name}`" in readme, name


def test_shipped_sweep_grids(configs_dir: Path):
    triplet = load_run_config(configs_dir / "triplet.yaml")
    assert triplet.values["a_points"] == [[1.0, 1.0]]
    assert triplet.values["leading_term"] == "psi_N"

    binary = load_run_config(configs_dir / "binary-sweep.yaml")
    points = binary.values["a_points"]
    assert len(points) == 8
    assert points[0] == pytest.approx([1 / 3, 0.5])
    assert points[-1] == pytest.approx([1 / 3, 4.0])

    ternary = load_run_config(configs_dir / "ternary-sweep.yaml")
    assert len(ternary.values["a_points"]) == 8
    assert ternary.values["a_points"][-1] == [0.6, 3.0, 7.0]


class TestParsing:
    def test_duplicate_keys_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_yaml("command: sweep\nseed: 1\nseed: 2\n", "dup.yaml")

    def test_root_must_be_mapping(self):
        with pytest.raises(ConfigError, match="root must be a mapping"):
            parse_yaml("- 1\n- 2\n", "list.yaml")

    def test_empty_document_has_no_command(self):
        with pytest.raises(ConfigError, match=r"\$\.command"):
            validate_payload(parse_yaml("", "empty.yaml"), "empty.yaml", Path("."))

    def test_missing_file_is_an_io_error(self, tmp_path: Path):
        with pytest.raises(OutputIOError, match="cannot read config") as info:
            load_run_config(tmp_path / "absent.yaml")
        assert info.value.exit_code == EXIT_IO


class TestSchema:
    def test_unknown_key(self):
        errors = _errors(_sweep(repeats=5))
        assert any(e.startswith("$: Additional properties") for e in errors)

    def test_paths_name_the_field(self):
        errors = _errors(_sweep(replicates=0, estimator="plugin"))
        assert any(e.startswith("$.replicates:") for e in errors)
        assert any(e.startswith("$.estimator:") for e in errors)

    def test_nested_path(self):
        errors = _errors(_sweep(a_grid=[[1.0, -1.0]]))
        assert any(e.startswith("$.a_grid.0.1:") for e in errors)

    def test_dataset_and_synth_are_exclusive(self):
        errors = _errors(_mi(dataset="pairs.tsv"))
        assert errors and errors[0].startswith("$:")

    def test_schema_dir_override(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv(SCHEMA_DIR_ENV, str(tmp_path))
        with pytest.raises(ConfigError, match="cannot load schema"):
            validate_payload(_sweep(), "test.yaml", Path("."))

    def test_draft_lock(self):
        with pytest.raises(ConfigError, match="draft mismatch"):
            build_validator({"$schema": "https://json-schema.org/draft/2020-12/schema", "type": "object"})
        assert build_validator({"$schema": DRAFT_07, "type": "object"}).is_valid({})


class TestSweepSemantics:
    def test_empty_a_grid(self):
        errors = _errors(_sweep(a_grid=[]))
        assert errors == ["$.a_grid: a-grid is empty; give a_grid, a_path or a non-explicit a_strategy"]

    def test_parameter_free_needs_no_grid(self):
        cfg = validate_payload(_sweep(estimator="naive", a_grid=None), "test.yaml", Path("."))
        assert cfg.values["a_points"] == []
        assert cfg.values["leading_term"] == "log_N"

    def test_misaligned_grid(self):
        assert _errors(_sweep(a_grid=[[1.0, 1.0, 1.0]])) == [
            "$.a_grid.0: has 3 entries but the distribution has 2 boxes"
        ]

    def test_unnormalised_distribution(self):
        assert _errors(_sweep(distribution=[0.5, 0.4]))[0].startswith("$.distribution: probabilities must sum to 1")

    def test_strategy_conflicts_with_grid(self):
        errors = _errors(_sweep(a_strategy="all_ones"))
        assert errors == ["$.a_strategy: 'all_ones' derives the a-grid; drop a_grid and a_path"]

    def test_negative_path(self):
        path = {"base": [1.0, 1.0], "slope": [0.0, 2.0], "t_start": 0.0, "t_stop": 2.0, "t_num": 3}
        assert _errors(_sweep(a_grid=None, a_path=path)) == ["$.a_path: a-values become negative at t=0.0"]

    def test_phi_needs_function(self):
        assert _errors(_sweep(estimator="phi", a_grid=None)) == ["$.phi: required when estimator is 'phi'"]

    def test_defaults_resolved(self):
        cfg = validate_payload(_sweep(a_strategy="optimal_from_p", a_grid=None), "test.yaml", Path("."))
        assert cfg.values["a_points"] == [pytest.approx([1 / 3, 3.0])]
        assert cfg.values["block_size"] > 0
        assert cfg.values["workers"] == 1
        assert cfg.output_format == "csv"
        assert cfg.log_level == "info"
        assert cfg.to_record()["a_strategy"] == "optimal_from_p"


class TestBuildSweepSpec:
    def test_from_payload(self):
        cfg = validate_payload(_sweep(stream_index=2), "test.yaml", Path("."))
        spec = build_sweep_spec(cfg, workers=3)
        assert spec.distribution.p == (0.75, 0.25)
        assert spec.tuple_sizes == (2, 10)
        assert [a.a for a in spec.a_grid] == [(1.0, 1.0), (1 / 3, 3.0)]
        assert spec.estimator_id is EstimatorId.SCHUERMANN_BINOMIAL
        assert spec.leading_term is LeadingTerm.PSI_N
        assert spec.seed.stream_index == 2
        assert spec.workers == 3

    def test_rejects_mi_config(self):
        cfg = validate_payload(_mi(), "test.yaml", Path("."))
        with pytest.raises(ConfigError, match="expected a sweep config"):
            build_sweep_spec(cfg)


class TestMiSemantics:
    def test_defaults_resolved(self):
        cfg = validate_payload(_mi(a_table={"heavy_y1": [5.0, 1.0]}), "test.yaml", Path("."))
        values = cfg.values
        assert values["thresholds"] == [0.65, 0.85]
        assert values["replacement"] is False
        assert values["synth"]["seed"] == 3
        assert values["synth"]["q_values"] == [0.95, 0.75, 0.5]
        table = a_table_of(cfg)
        assert set(table) == set(BiasClass)
        assert table[BiasClass.HEAVY_Y1] == (5.0, 1.0)
        assert table[BiasClass.HEAVY_Y0] == (1.0, 7.0)

    def test_grid_beyond_synthetic_size(self):
        assert _errors(_mi(n_grid=[100, 10_000])) == [
            "$.n_grid: reaches 10000 but the synthetic dataset holds 5000 pairs"
        ]

    def test_grid_beyond_size_with_replacement(self):
        cfg = validate_payload(_mi(n_grid=[100, 10_000], replacement=True), "test.yaml", Path("."))
        assert cfg.values["replacement"] is True

    def test_thresholds_order(self):
        errors = _errors(_mi(thresholds=[0.9, 0.7]))
        assert errors[0].startswith("$.thresholds:")

    def test_asymmetric_weights(self):
        synth = {"profile": "pym_like", "size": 5000, "class_weights": [0.3, 0.2, 0.2, 0.2, 0.1]}
        assert _errors(_mi(synth=synth)) == ["$.synth.class_weights: must be symmetric under y label swap"]

    def test_dataset_relative_to_config(self, tmp_path: Path):
        (tmp_path / "pairs.tsv").write_text("x\ty\n0\t1\n")
        path = write_config(tmp_path, "mi.yaml", _mi(synth=None, dataset="pairs.tsv", output="out.csv"))
        cfg = load_run_config(path)
        assert cfg.base_dir == tmp_path.resolve()
        assert cfg.output == tmp_path.resolve() / "out.csv"

    def test_missing_dataset(self, tmp_path: Path):
        errors = _errors(_mi(synth=None, dataset="absent.tsv"), tmp_path)
        assert errors == [f"$.dataset: file not found: {tmp_path / 'absent.tsv'}"]


CONTRACT_DIR = Path(__file__).resolve().parents[1] / "contracts" / "run-config"


def _contract_fixtures() -> list[tuple[str, str]]:
    manifest = yaml.safe_load((CONTRACT_DIR / "manifest.yaml").read_text(encoding="utf-8"))
    return [(entry["file"], entry["expect"]) for entry in manifest["fixtures"]]


def _schema_stage(path: Path) -> list[str]:
    try:
        payload = parse_yaml(path.read_text(encoding="utf-8"), str(path))
    except ConfigError as exc:
        return exc.errors
    if payload.get("command") not in ("sweep", "mi"):
        return ["$.command: unknown"]
    return schema_errors(payload["command"], payload)


class TestContractFixtures:
    def test_manifest_lists_every_fixture(self, repo_root: Path):
        listed = {repo_root / f for f, _ in _contract_fixtures()}
        on_disk = set(CONTRACT_DIR.glob("valid/*.yaml")) | set(CONTRACT_DIR.glob("invalid/*/*.yaml"))
        assert {p.resolve() for p in listed} == {p.resolve() for p in on_disk}

    @pytest.mark.parametrize("file,expect", _contract_fixtures())
    def test_fixture_outcome(self, repo_root: Path, file: str, expect: str):
        path = repo_root / file
        assert expect in ("valid", "invalid/schema", "invalid/semantic")
        assert expect == "valid" or file.startswith(f"tests/contracts/run-config/{expect}/")
        schema = _schema_stage(path)
        if expect == "invalid/schema":
            assert schema
            return
        assert schema == []
        if expect == "valid":
            load_run_config(path)
        else:
            with pytest.raises(ConfigError) as info:
                load_run_config(path)
            assert info.value.errors
