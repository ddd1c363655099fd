"""Exception types raised by the library."""


class KoopmanPruneError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(KoopmanPruneError, ValueError):
    pass


class NotOrthonormal(KoopmanPruneError, ValueError):
    pass


class RankDeficient(KoopmanPruneError, ValueError):
    def __init__(self, message, matrix_name=None):
        super().__init__(message)
        self.matrix_name = matrix_name


class RankDeficientUpdate(RankDeficient):
    pass


class DegenerateData(KoopmanPruneError, ValueError):
    pass


class ZeroFunction(KoopmanPruneError, ValueError):
    pass


class NegativeRadicand(KoopmanPruneError, ValueError):
    pass


class OracleMismatch(KoopmanPruneError, RuntimeError):
    """Fast-path angles disagreed with a from-scratch recomputation."""
