"""
Run configs: flat YAML files validated in two layers.

1) JSON Schema (draft-07, one schema per command under schemas/run-config/)
2) Semantic checks of the target operation's preconditions

Duplicate mapping keys are rejected at parse time. The resolved config (all
defaults filled in) is what gets embedded in every output.
"""

from __future__ import annotations

import copy
import functools
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from boxentropy.errors import ConfigError, DomainError, OutputIOError
from boxentropy.estimators import EstimatorId, LeadingTerm, ParamVector, default_leading_term
from boxentropy.exact_oracle import Distribution, optimal_a
from boxentropy.experiments import APath, SweepSpec
from boxentropy.mi import (
    DEFAULT_A_TABLE,
    DEFAULT_CLASS_WEIGHTS,
    DEFAULT_Q_VALUES,
    DEFAULT_SIZES,
    DEFAULT_THRESHOLDS,
    BiasClass,
)
from boxentropy.sampling import DEFAULT_BLOCK_SIZE, SeedSpec

DRAFT_07 = "http://json-schema.org/draft-07/schema#"
COMMANDS = ("sweep", "mi")
SCHEMA_DIR_ENV = "BOXENTROPY_SCHEMA_DIR"
DEFAULT_LOG_LEVEL = "info"
DEFAULT_FORMAT = "csv"
_PARAMETER_FREE = ("naive", "grassberger", "phi")


def schema_dir() -> Path:
    override = os.environ.get(SCHEMA_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parents[1] / "schemas" / "run-config"


class _UniqueKeyLoader(yaml.SafeLoader):
    """PyYAML loader that rejects duplicate mapping keys."""


def _construct_mapping_no_duplicates(loader: _UniqueKeyLoader, node: yaml.Node, deep: bool = False) -> dict:
    mapping: dict = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise yaml.constructor.ConstructorError(
                "while constructing a mapping",
                node.start_mark,
                f"found duplicate key ({key!r})",
                key_node.start_mark,
            )
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_UniqueKeyLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG,
    _construct_mapping_no_duplicates,
)


def parse_yaml(text: str, source: str) -> dict[str, Any]:
    try:
        payload = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(source, [f"yaml parse failed: {exc}"]) from exc
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise ConfigError(source, ["root must be a mapping/object"])
    return payload


def _format_json_path(error: jsonschema.ValidationError) -> str:
    if not error.path:
        return "$"
    return "$." + ".".join(str(part) for part in error.path)


@functools.lru_cache(maxsize=None)
def _validator_for(command: str, directory: str) -> jsonschema.Draft7Validator:
    schema_path = Path(directory) / f"{command}.schema.json"
    try:
        schema = json.loads(schema_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(schema_path), [f"cannot load schema: {exc}"]) from exc
    if not isinstance(schema, dict):
        raise ConfigError(str(schema_path), ["schema is not a JSON object"])
    return build_validator(schema, str(schema_path))


def build_validator(schema: dict, source: str = "schema") -> jsonschema.Draft7Validator:
    """Draft-07 validator after the draft lock and meta-validation."""
    schema_draft = schema.get("$schema")
    if schema_draft != DRAFT_07:
        raise ConfigError(source, [f"schema draft mismatch. Expected '{DRAFT_07}', found '{schema_draft}'."])
    validator_cls = jsonschema.validators.validator_for(schema)
    try:
        validator_cls.check_schema(schema)
    except jsonschema.SchemaError as exc:
        raise ConfigError(source, [f"schema meta-validation failed: {exc.message}"]) from exc
    if validator_cls is not jsonschema.Draft7Validator:
        raise ConfigError(source, ["schema must validate with Draft7Validator"])
    return jsonschema.Draft7Validator(schema)


def schema_errors(command: str, payload: Mapping[str, Any]) -> list[str]:
    validator = _validator_for(command, str(schema_dir()))
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(map(str, e.path)))
    return [f"{_format_json_path(err)}: {err.message}" for err in errors]


def _command_of(payload: Mapping[str, Any], source: str) -> str:
    command = payload.get("command")
    if command not in COMMANDS:
        raise ConfigError(source, [f"$.command: must be one of {list(COMMANDS)}, got {command!r}"])
    return str(command)


def _sweep_semantic_errors(payload: Mapping[str, Any]) -> list[str]:
    errors: list[str] = []
    p = payload["distribution"]
    box_count = len(p)
    total = math.fsum(p)
    if abs(total - 1.0) > 1e-12:
        errors.append(f"$.distribution: probabilities must sum to 1 within 1e-12, got {total!r}")
    estimator = payload["estimator"]
    strategy = payload.get("a_strategy", "explicit")
    if estimator == "phi" and "phi" not in payload:
        errors.append("$.phi: required when estimator is 'phi'")
    has_points = bool(payload.get("a_grid")) or "a_path" in payload
    if strategy != "explicit" and ("a_grid" in payload or "a_path" in payload):
        errors.append(f"$.a_strategy: '{strategy}' derives the a-grid; drop a_grid and a_path")
    if strategy == "explicit" and estimator not in _PARAMETER_FREE and not has_points and not payload.get("a_extra"):
        errors.append("$.a_grid: a-grid is empty; give a_grid, a_path or a non-explicit a_strategy")
    for key in ("a_grid", "a_extra"):
        for k, a in enumerate(payload.get(key, [])):
            if len(a) != box_count:
                errors.append(f"$.{key}.{k}: has {len(a)} entries but the distribution has {box_count} boxes")
    path = payload.get("a_path")
    if path is not None:
        if len(path["base"]) != box_count or len(path["slope"]) != box_count:
            errors.append(f"$.a_path: base and slope need {box_count} entries each")
        else:
            for t in (path["t_start"], path["t_stop"]):
                low = min(b + s * (t - 1.0) for b, s in zip(path["base"], path["slope"]))
                if low < 0:
                    errors.append(f"$.a_path: a-values become negative at t={t}")
    return errors


def _mi_semantic_errors(payload: Mapping[str, Any], base_dir: Path) -> list[str]:
    errors: list[str] = []
    t_moderate, t_heavy = payload.get("thresholds", DEFAULT_THRESHOLDS)
    if not t_moderate < t_heavy:
        errors.append(f"$.thresholds: t_moderate must be below t_heavy, got ({t_moderate}, {t_heavy})")
    replacement = payload.get("replacement", False)
    if "dataset" in payload:
        dataset = base_dir / payload["dataset"]
        if not dataset.is_file():
            errors.append(f"$.dataset: file not found: {dataset}")
    else:
        synth = payload["synth"]
        size = synth.get("size", DEFAULT_SIZES[synth["profile"]])
        if not replacement and max(payload["n_grid"]) > size:
            errors.append(f"$.n_grid: reaches {max(payload['n_grid'])} but the synthetic dataset holds {size} pairs")
        weights = synth.get("class_weights", DEFAULT_CLASS_WEIGHTS)
        if weights[0] != weights[4] or weights[1] != weights[3]:
            errors.append("$.synth.class_weights: must be symmetric under y label swap")
        if sum(weights) <= 0:
            errors.append("$.synth.class_weights: at least one weight must be positive")
    return errors


def _resolve_sweep(payload: Mapping[str, Any]) -> dict[str, Any]:
    values = copy.deepcopy(dict(payload))
    values.setdefault("leading_term", default_leading_term(values["estimator"]).value)
    values.setdefault("a_strategy", "explicit")
    values.setdefault("stream_index", 0)
    values.setdefault("block_size", DEFAULT_BLOCK_SIZE)
    values.setdefault("workers", 1)
    values.setdefault("format", DEFAULT_FORMAT)
    values.setdefault("logging", {}).setdefault("level", DEFAULT_LOG_LEVEL)
    values["a_points"] = [list(a.a) for a in _a_points(values)]
    return values


def _a_points(values: Mapping[str, Any]) -> list[ParamVector]:
    strategy = values.get("a_strategy", "explicit")
    p = values["distribution"]
    points: list[ParamVector] = []
    if strategy == "optimal_from_p":
        points.append(ParamVector.of(optimal_a(v) for v in p))
    elif strategy == "all_ones":
        points.append(ParamVector.uniform(1.0, len(p)))
    else:
        points.extend(ParamVector.of(a) for a in values.get("a_grid", []))
        path = values.get("a_path")
        if path is not None:
            points.extend(
                APath.linspace(path["base"], path["slope"], path["t_start"], path["t_stop"], path["t_num"]).points()
            )
    points.extend(ParamVector.of(a) for a in values.get("a_extra", []))
    return points


def _resolve_mi(payload: Mapping[str, Any]) -> dict[str, Any]:
    values = copy.deepcopy(dict(payload))
    values.setdefault("thresholds", list(DEFAULT_THRESHOLDS))
    table = {c.value: list(pair) for c, pair in DEFAULT_A_TABLE.items()}
    table.update(values.get("a_table", {}))
    values["a_table"] = table
    values.setdefault("replacement", False)
    values.setdefault("stream_index", 0)
    values.setdefault("workers", 1)
    values.setdefault("format", DEFAULT_FORMAT)
    values.setdefault("logging", {}).setdefault("level", DEFAULT_LOG_LEVEL)
    synth = values.get("synth")
    if synth is not None:
        synth.setdefault("size", DEFAULT_SIZES[synth["profile"]])
        synth.setdefault("seed", values["seed"])
        synth.setdefault("q_values", list(DEFAULT_Q_VALUES))
        synth.setdefault("class_weights", list(DEFAULT_CLASS_WEIGHTS))
    return values


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: Mapping[str, Any]
    source: str
    base_dir: Path

    @property
    def log_level(self) -> str:
        return str(self.values["logging"]["level"])

    @property
    def output_format(self) -> str:
        return str(self.values["format"])

    @property
    def output(self) -> Path | None:
        output = self.values.get("output")
        return self.base_dir / output if output else None

    @property
    def seed(self) -> SeedSpec:
        return SeedSpec(int(self.values["seed"]), int(self.values["stream_index"]))

    def to_record(self) -> dict[str, Any]:
        return copy.deepcopy(dict(self.values))


def validate_payload(payload: Mapping[str, Any], source: str, base_dir: Path) -> RunConfig:
    command = _command_of(payload, source)
    errors = schema_errors(command, payload)
    if errors:
        raise ConfigError(source, errors)
    semantic = _sweep_semantic_errors(payload) if command == "sweep" else _mi_semantic_errors(payload, base_dir)
    if semantic:
        raise ConfigError(source, semantic)
    try:
        values = _resolve_sweep(payload) if command == "sweep" else _resolve_mi(payload)
    except DomainError as exc:
        raise ConfigError(source, [str(exc)]) from exc
    return RunConfig(command, values, source, base_dir)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputIOError(f"cannot read config {path}: {exc}") from exc
    return validate_payload(parse_yaml(text, str(path)), str(path), path.resolve().parent)


def build_sweep_spec(cfg: RunConfig, workers: int | None = None) -> SweepSpec:
    if cfg.command != "sweep":
        raise ConfigError(cfg.source, [f"expected a sweep config, got {cfg.command!r}"])
    values = cfg.values
    try:
        return SweepSpec(
            distribution=Distribution.of(values["distribution"]),
            tuple_sizes=tuple(values["tuple_sizes"]),
            a_grid=tuple(ParamVector.of(a) for a in values["a_points"]),
            replicates=int(values["replicates"]),
            estimator_id=EstimatorId(values["estimator"]),
            seed=cfg.seed,
            leading_term=LeadingTerm(values["leading_term"]),
            phi=values.get("phi"),
            block_size=int(values["block_size"]),
            workers=workers if workers is not None else int(values["workers"]),
        )
    except DomainError as exc:
        raise ConfigError(cfg.source, [str(exc)]) from exc


def a_table_of(cfg: RunConfig) -> dict[BiasClass, tuple[float, float]]:
    return {BiasClass(name): (float(pair[0]), float(pair[1])) for name, pair in cfg.values["a_table"].items()}
