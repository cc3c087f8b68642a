"""Exception hierarchy shared by all acorsis modules."""


class AcorsisError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(AcorsisError, ValueError):
    pass


class ZeroVarianceColumn(AcorsisError, ValueError):
    def __init__(self, j, name=None):
        self.j = j
        self.name = name
        label = name if name is not None else f"column {j}"
        super().__init__(f"{label} has zero sample variance")


class ZeroVariance(AcorsisError, ValueError):
    pass


class DegenerateBinaryResponse(AcorsisError, ValueError):
    pass


class IndexOutOfRange(AcorsisError, IndexError):
    pass


class InvalidGamma(AcorsisError, ValueError):
    pass


class InvalidRho(AcorsisError, ValueError):
    pass


class GlmNonConvergence(AcorsisError, RuntimeError):
    def __init__(self, j, k, message="IRLS did not converge"):
        self.j = j
        self.k = k
        super().__init__(f"{message} for effect ({j}, {k})")


class MaxSweepsExceeded(AcorsisError, RuntimeError):
    """Coordinate descent hit its sweep limit; ``result`` holds the best iterate."""

    def __init__(self, result=None, sweeps=None):
        self.result = result
        self.sweeps = sweeps
        super().__init__(f"coordinate descent did not converge in {sweeps} sweeps")


class AllReplicatesFailed(AcorsisError, RuntimeError):
    pass


class ConfigError(AcorsisError, ValueError):
    pass
