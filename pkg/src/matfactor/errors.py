"""Exception hierarchy shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised when an input violates a documented precondition."""


class EstimationError(RuntimeError):
    """Numerical or estimation failure.

    ``stage`` names the pipeline step that failed (e.g. ``"loadings"``,
    ``"denoiser"``); the CLI maps these failures to exit code 2.
    """

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class NoSignalError(EstimationError):
    pass


class AlignmentError(EstimationError):
    pass


class DegenerateCovarianceError(EstimationError):
    pass


class RankCorrelationError(EstimationError):
    pass
