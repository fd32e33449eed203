"""Exception taxonomy shared across the engine."""


class DexpError(Exception):
    """Base class for all engine errors."""


class EmptySnapshot(DexpError):
    """A holdings snapshot contains no protocol records."""


class InsufficientSnapshots(DexpError):
    """Fewer than two snapshots, so no interval can be formed."""


class UnknownProtocol(DexpError):
    """A protocol id is not present where it is required."""


class EmptyCorpus(DexpError):
    """No usable text to fit the similarity model on."""


class MissingCategory(DexpError):
    """One or more protocols lack a sector/category label."""


class AllZero(DexpError):
    """Concentration asked for on values that sum to zero."""


class TooFewNodes(DexpError):
    """Metric needs at least two nodes."""


class InvalidTau(DexpError):
    """Distress threshold outside the open interval (0, 1)."""


class EmptySelection(DexpError):
    """A scenario rule matched no protocols."""


class DimensionMismatch(DexpError):
    """Tensor or embedding dimensions disagree."""


class ShapeMismatch(DexpError):
    """Optimizer state and gradient shapes disagree."""


class UnknownHorizon(DexpError):
    """Horizon not in the configured horizon set."""


class InsufficientHistory(DexpError):
    """Not enough weeks to form a single split fold."""


class NonFiniteLoss(DexpError):
    """Training loss became NaN or infinite."""


class DegenerateLabels(DexpError):
    """Ranking metric needs at least one positive and one negative."""


class NoPositives(DexpError):
    """Precision-recall metric needs at least one positive."""


class EmptyInput(DexpError):
    """Empty value list where at least one element is required."""


class MissingArtifact(DexpError):
    """A required on-disk artifact is absent."""


class InvalidConfig(DexpError):
    """Config file missing, unparsable, or failing validation."""
