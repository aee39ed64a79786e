"""
boxentropy command line.

Subcommands:
  estimate      one entropy estimate from observed counts
  bias-exact    closed-form and enumerated bias of the binomial-regime estimator
  sweep         Monte Carlo sweep over (N, a) driven by a YAML run config
  mi            mutual-information subsample curve driven by a YAML run config
  synth         write a synthetic (x, y) dataset plus its truth record
  check-config  validate a run config without running it

Exit codes: 0 ok, 2 validation, 3 numerical, 4 I/O.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Sequence

from boxentropy import __version__
from boxentropy.config import RunConfig, a_table_of, build_sweep_spec, load_run_config
from boxentropy.errors import (
    EXIT_NUMERICAL,
    EXIT_OK,
    BoxEntropyError,
    BudgetExceededError,
    ConfigError,
    DomainError,
    OutputIOError,
)
from boxentropy.estimators import LN2, CountVector, EstimatorConfig, EstimatorId, LeadingTerm, ParamVector, Regime
from boxentropy.exact_oracle import (
    DEFAULT_BUDGET,
    Distribution,
    enumerate_moments,
    exact_estimator_bias,
    optimal_params,
    poisson_estimator_bias,
)
from boxentropy.experiments import DEFAULT_SAFETY_THRESHOLD, safe_a, safety_check, sweep_a, sweep_columns
from boxentropy.logging_setup import LEVELS, configure_logging
from boxentropy.mi import (
    DEFAULT_SIZES,
    MI_COLUMNS,
    load_pairs,
    mi_subsample_curve,
    save_pairs,
    save_truth,
    synth_dataset,
)
from boxentropy.output import FORMATS, build_metadata, write_table
from boxentropy.sampling import SeedSpec

logger = logging.getLogger(__name__)

ESTIMATORS = ("naive", "grassberger", "schuermann", "phi-psi")
A_STRATEGIES = ("explicit", "optimal_from_p", "all_ones", "safe_from_counts")
ESTIMATE_COLUMNS = ["estimator_id", "leading_term", "value_nats", "value_bits"]
_SPLIT = re.compile(r"[,\s]+")


def _split_values(text: str) -> list[str]:
    return [token for token in _SPLIT.split(text.strip()) if token]


def _parse_counts(text: str, source: str) -> CountVector:
    try:
        values = [int(token) for token in _split_values(text)]
    except ValueError:
        raise DomainError(f"{source}: counts must be nonnegative integers, got {text.strip()!r}") from None
    if not values:
        raise DomainError(f"{source}: no counts given")
    return CountVector.of(values)


def _parse_floats(text: str, option: str) -> list[float]:
    try:
        values = [float(token) for token in _split_values(text)]
    except ValueError:
        raise DomainError(f"{option}: expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise DomainError(f"{option}: no values given")
    return values


def _read_counts(args: argparse.Namespace) -> CountVector:
    if args.counts_file is None:
        return _parse_counts(args.counts, "--counts")
    path = Path(args.counts_file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputIOError(f"cannot read counts file {path}: {exc}") from exc
    lines = [line for line in text.splitlines() if not line.lstrip().startswith("#")]
    return _parse_counts(" ".join(lines), str(path))


def _resolve_a(
    strategy: str,
    box_count: int,
    a_text: str | None,
    p_text: str | None,
    counts: CountVector | None = None,
    threshold: float = DEFAULT_SAFETY_THRESHOLD,
) -> ParamVector:
    if strategy == "explicit":
        if a_text is None:
            raise DomainError("--a is required with --a-strategy explicit")
        a = ParamVector.of(_parse_floats(a_text, "--a"))
    elif strategy == "optimal_from_p":
        if p_text is None:
            raise DomainError("--p is required with --a-strategy optimal_from_p (oracle-only mode)")
        a = optimal_params(Distribution.of(_parse_floats(p_text, "--p")))
    elif strategy == "all_ones":
        a = ParamVector.uniform(1.0, box_count)
    elif strategy == "safe_from_counts":
        if counts is None:
            raise DomainError("--a-strategy safe_from_counts needs observed counts")
        a = safe_a(counts, threshold)
    else:
        raise DomainError(f"unknown a-strategy {strategy!r}")
    a.check_aligned(box_count)
    return a


def _estimator_config(args: argparse.Namespace, counts: CountVector) -> EstimatorConfig:
    leading = LeadingTerm(args.leading_term) if args.leading_term else None
    if args.estimator == "naive":
        return EstimatorConfig(EstimatorId.NAIVE, leading_term=leading)
    if args.estimator == "grassberger":
        return EstimatorConfig(EstimatorId.GRASSBERGER, leading_term=leading)
    if args.estimator == "phi-psi":
        return EstimatorConfig(EstimatorId.PHI, leading_term=leading, phi="digamma")
    a = _resolve_a(args.a_strategy, counts.box_count, args.a, args.p, counts, args.threshold)
    report = safety_check(a, counts, args.threshold)
    for box in report.flagged:
        logger.warning(
            "box %d: a**n = %.3g exceeds the safety threshold %g (a=%g, n=%d); expect a large variance",
            box.box,
            box.power,
            report.threshold,
            box.a,
            box.n,
        )
    estimator_id = (
        EstimatorId.SCHUERMANN_BINOMIAL if Regime(args.regime) is Regime.BINOMIAL else EstimatorId.SCHUERMANN_POISSON
    )
    return EstimatorConfig(estimator_id, a, leading)


def cmd_estimate(args: argparse.Namespace) -> int:
    counts = _read_counts(args)
    config = _estimator_config(args, counts)
    estimate = config.evaluate(counts)
    record = estimate.to_record()
    meta_config: dict[str, Any] = {"counts": list(counts.counts), "estimator": config.to_record()}
    if config.estimator_id in (EstimatorId.SCHUERMANN_BINOMIAL, EstimatorId.SCHUERMANN_POISSON):
        meta_config["a_strategy"] = args.a_strategy
    metadata = build_metadata("estimate", meta_config, timestamp=args.timestamp)
    write_table(args.output, ESTIMATE_COLUMNS, [record], metadata, args.format)
    return EXIT_OK


def _bias_columns(box_count: int) -> list[str]:
    return [
        "N",
        *(f"a_{i + 1}" for i in range(box_count)),
        "closed_form_bias_bits",
        "enumeration_bias_bits",
        "difference_bits",
        "enumeration_mean_bits",
        "enumeration_variance",
        "poisson_limit_bias_bits",
        "outcome_count",
        "arithmetic",
    ]


def cmd_bias_exact(args: argparse.Namespace) -> int:
    d = Distribution.of(_parse_floats(args.p, "--p"))
    if args.N < 1:
        raise DomainError(f"--N must be >= 1, got {args.N}")
    a = _resolve_a(args.a_strategy, d.box_count, args.a, args.p)
    closed_form = exact_estimator_bias(d, args.N, a) / LN2
    record: dict[str, Any] = {"N": args.N}
    record.update({f"a_{i + 1}": v for i, v in enumerate(a.a)})
    record["closed_form_bias_bits"] = closed_form
    record["poisson_limit_bias_bits"] = poisson_estimator_bias(d, args.N, a) / LN2
    estimator = EstimatorConfig(EstimatorId.SCHUERMANN_BINOMIAL, a)
    try:
        report = enumerate_moments(d, args.N, estimator, budget=args.budget, arithmetic=args.arithmetic)
    except BudgetExceededError as exc:
        logger.info("skipping enumeration: %s", exc)
    else:
        record["enumeration_bias_bits"] = report.bias_bits
        record["difference_bits"] = report.bias_bits - closed_form
        record["enumeration_mean_bits"] = report.mean_bits
        record["enumeration_variance"] = report.variance_bits2
        record["outcome_count"] = report.outcome_count
        record["arithmetic"] = report.arithmetic
    meta_config = {
        "distribution": list(d.p),
        "N": args.N,
        "a_strategy": args.a_strategy,
        "a": list(a.a),
        "budget": args.budget,
        "arithmetic": args.arithmetic,
    }
    metadata = build_metadata("bias-exact", meta_config, timestamp=args.timestamp)
    write_table(args.output, _bias_columns(d.box_count), [record], metadata, args.format)
    return EXIT_OK


def _load_for(args: argparse.Namespace, command: str) -> RunConfig:
    cfg = load_run_config(args.config)
    if cfg.command != command:
        raise ConfigError(cfg.source, [f"$.command: expected {command!r} for this subcommand, got {cfg.command!r}"])
    if args.log_level is None:
        configure_logging(cfg.log_level)
    return cfg


def _output_target(args: argparse.Namespace, cfg: RunConfig) -> Path | None:
    return Path(args.output) if args.output else cfg.output


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_for(args, "sweep")
    spec = build_sweep_spec(cfg, workers=args.workers)
    logger.info(
        "sweep: %d tuple sizes x %d a-points, %d replicates each",
        len(spec.tuple_sizes),
        max(1, len(spec.a_grid)),
        spec.replicates,
    )
    result = sweep_a(spec)
    box_count = spec.distribution.box_count
    extra = {
        "failures": [asdict(f) for f in result.failures],
        "unreliable_rows": result.unreliable_rows,
    }
    metadata = build_metadata("sweep", cfg.to_record(), extra, timestamp=args.timestamp)
    rows = [row.to_record(box_count) for row in result.rows]
    write_table(_output_target(args, cfg), sweep_columns(box_count), rows, metadata, args.format or cfg.output_format)
    logger.info("sweep finished: %d rows, %d failed", len(result.rows), len(result.failures))
    return EXIT_NUMERICAL if result.failures else EXIT_OK


def cmd_mi(args: argparse.Namespace) -> int:
    cfg = _load_for(args, "mi")
    values = cfg.values
    extra: dict[str, Any] = {}
    if "dataset" in values:
        full = load_pairs(cfg.base_dir / values["dataset"])
    else:
        synth = values["synth"]
        full, truth = synth_dataset(
            synth["profile"],
            synth["size"],
            SeedSpec(int(synth["seed"])),
            q_values=synth["q_values"],
            class_weights=synth["class_weights"],
        )
        extra["true_mi_bits"] = truth.true_mi_bits
    curve = mi_subsample_curve(
        full,
        values["n_grid"],
        int(values["replicates"]),
        cfg.seed,
        values["thresholds"],
        a_table=a_table_of(cfg),
        replacement=bool(values["replacement"]),
        workers=args.workers if args.workers is not None else int(values["workers"]),
    )
    extra.update(
        {
            "classes": curve.classes.to_record(),
            "replacement": curve.replacement,
            "dataset_size": len(full),
            "failures": [asdict(f) for f in curve.failures],
        }
    )
    metadata = build_metadata("mi", cfg.to_record(), extra, timestamp=args.timestamp)
    rows = [row.to_record() for row in curve.rows]
    write_table(_output_target(args, cfg), MI_COLUMNS, rows, metadata, args.format or cfg.output_format)
    logger.info("mi finished: %d rows, %d failed", len(curve.rows), len(curve.failures))
    return EXIT_NUMERICAL if curve.failures else EXIT_OK


def truth_path_for(output: Path) -> Path:
    """data.tsv -> data.truth.json"""
    return output.with_name(output.stem + ".truth.json")


def cmd_synth(args: argparse.Namespace) -> int:
    output = Path(args.output)
    ds, truth = synth_dataset(args.profile, args.size, SeedSpec(args.seed))
    delimiter = "," if output.suffix == ".csv" else "\t"
    save_pairs(ds, output, delimiter)
    truth_path = truth_path_for(output)
    save_truth(truth, truth_path)
    print(f"{output}: {len(ds)} pairs over {ds.x_arity} x ids, true MI {truth.true_mi_bits:.12g} bits ({truth_path})")
    return EXIT_OK


def cmd_check_config(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    print(f"OK: {cfg.source} ({cfg.command})")
    return EXIT_OK


def _add_output_flags(parser: argparse.ArgumentParser, default_format: str | None) -> None:
    parser.add_argument("--output", default=None, help="Output path (default: the config's output, else stdout).")
    parser.add_argument("--format", choices=FORMATS, default=default_format, help="Output table format.")


def _add_a_flags(parser: argparse.ArgumentParser, strategies: Sequence[str]) -> None:
    parser.add_argument("--a-strategy", choices=strategies, default="explicit", help="How the a-vector is chosen.")
    parser.add_argument("--a", default=None, help="Comma-separated a-vector for --a-strategy explicit.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxentropy", description="Entropy estimation with per-box bias parameters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", choices=LEVELS, default=None, help="Log level (default: info).")
    parser.add_argument("--timestamp", action="store_true", help="Record the run time in the output metadata.")
    sub = parser.add_subparsers(dest="command", required=True)

    estimate = sub.add_parser("estimate", help="Estimate entropy from observed counts.")
    source = estimate.add_mutually_exclusive_group(required=True)
    source.add_argument("--counts", help="Comma-separated occupation numbers, e.g. 2,1.")
    source.add_argument("--counts-file", help="File with occupation numbers separated by commas or whitespace.")
    estimate.add_argument("--estimator", choices=ESTIMATORS, default="schuermann")
    estimate.add_argument("--regime", choices=[r.value for r in Regime], default=Regime.BINOMIAL.value)
    estimate.add_argument("--leading-term", choices=[t.value for t in LeadingTerm], default=None)
    _add_a_flags(estimate, A_STRATEGIES)
    estimate.add_argument("--p", default=None, help="True distribution, for --a-strategy optimal_from_p only.")
    estimate.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_SAFETY_THRESHOLD,
        help="Safety threshold for a**n (default: %(default)s).",
    )
    _add_output_flags(estimate, "csv")
    estimate.set_defaults(handler=cmd_estimate)

    bias = sub.add_parser("bias-exact", help="Exact bias from the closed form and by enumeration.")
    bias.add_argument("--p", required=True, help="Comma-separated true distribution.")
    bias.add_argument("--N", type=int, required=True, help="Tuple size.")
    _add_a_flags(bias, A_STRATEGIES[:3])
    bias.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="Largest outcome count to enumerate.")
    bias.add_argument("--arithmetic", choices=("auto", "float", "exact"), default="auto")
    _add_output_flags(bias, "csv")
    bias.set_defaults(handler=cmd_bias_exact)

    sweep = sub.add_parser("sweep", help="Monte Carlo sweep over tuple sizes and a-vectors.")
    sweep.add_argument("config", help="Path to a sweep run config (YAML).")
    _add_output_flags(sweep, None)
    sweep.add_argument("--workers", type=int, default=None, help="Worker threads per Monte Carlo estimate.")
    sweep.set_defaults(handler=cmd_sweep)

    mi = sub.add_parser("mi", help="Mutual-information subsample curve.")
    mi.add_argument("config", help="Path to an mi run config (YAML).")
    _add_output_flags(mi, None)
    mi.add_argument("--workers", type=int, default=None, help="Worker threads per curve row.")
    mi.set_defaults(handler=cmd_mi)

    synth = sub.add_parser("synth", help="Write a synthetic (x, y) dataset and its truth record.")
    synth.add_argument("--profile", choices=sorted(DEFAULT_SIZES), default="pym_like")
    synth.add_argument("--size", type=int, default=None, help="Number of pairs (default: the profile's size).")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--output", required=True, help="Dataset path; the truth record goes next to it.")
    synth.set_defaults(handler=cmd_synth)

    check = sub.add_parser("check-config", help="Validate a run config and exit.")
    check.add_argument("config", help="Path to a run config (YAML).")
    check.set_defaults(handler=cmd_check_config)
    return parser


def _report(exc: BoxEntropyError) -> None:
    if isinstance(exc, ConfigError):
        print(f"ERROR: invalid config {exc.source}", file=sys.stderr)
        for message in exc.errors:
            print(f"  - {message}", file=sys.stderr)
        return
    print(f"ERROR: {exc}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level or "info")
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except BoxEntropyError as exc:
        _report(exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
