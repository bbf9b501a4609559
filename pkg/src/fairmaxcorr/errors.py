"""Semantic exception hierarchy shared across the toolkit.

Every public function raises one of these instead of bare ValueError /
RuntimeError so callers (in particular the CLI) can map failures to exit
codes and tagged sweep rows.
"""


class FairMaxCorrError(Exception):
    """Base class for all toolkit errors."""


class InputError(FairMaxCorrError, ValueError):
    """Arguments violate a documented precondition (shape, range, emptiness)."""


class ComputationError(FairMaxCorrError, RuntimeError):
    """A numerical routine failed to converge or produced invalid output."""


class IngestionError(FairMaxCorrError):
    """A raw data file is missing columns, malformed, or otherwise unreadable."""


class MetricError(FairMaxCorrError):
    """Base class for evaluation-measure failures."""


class UndefinedMetricError(MetricError):
    """The metric is undefined on this input (e.g. single-class AUC)."""


class InfiniteDiscriminationError(MetricError):
    """Some group has zero positive rate, so the discrimination ratio diverges.

    Raised instead of silently returning a large number; the sweep harness
    records the row with an ``inf`` fairness value and an error tag.
    """


class ConfigError(FairMaxCorrError):
    """Experiment configuration is invalid; carries every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
