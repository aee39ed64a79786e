"""
Scenario: MI Convergence

Class-based MI on the shipped pym-like synthetic config.

Tests:
1. The clipped mean grows with N and its gap to the generator MI shrinks
2. Small subsamples see almost no information
3. The largest subsample's unclipped mean lies within 3 s.e. of the generator MI
"""

from tests.support.table_helpers import assert_within_standard_errors

from .base import ScenarioBase

TRUTH_SIGMAS = 3.0


class MiConvergence(ScenarioBase):
    def run(self) -> None:
        table = self.run_config("mi", "mi-synth.yaml")
        truth = table.metadata["true_mi_bits"]
        self.assert_close(truth, 0.3608, 1e-3, "generator MI")
        assert table.metadata["failures"] == []

        rows = sorted(table.rows, key=lambda row: row["N"])
        assert [row["N"] for row in rows] == [100, 1000, 10_000, 100_000]
        means = [row["mean_mi_bits"] for row in rows]
        assert means == sorted(means), f"clipped MI is not monotone in N: {means}"
        gaps = [abs(truth - mean) for mean in means]
        assert gaps == sorted(gaps, reverse=True), f"gap to the generator MI does not shrink with N: {gaps}"
        assert means[0] <= 0.05, f"N=100 clipped MI {means[0]}"

        top = rows[-1]
        assert top["std_error_unclipped_bits"] > 0
        assert_within_standard_errors(
            top["mean_mi_unclipped_bits"], top["std_error_unclipped_bits"], truth, TRUTH_SIGMAS, "N=1e5 unclipped MI"
        )
