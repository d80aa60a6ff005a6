"""Exception types raised by chainsep.

Every error derives from ChainsepError so callers can catch the whole family,
and additionally from the builtin it specializes so generic handlers
(``except ValueError``, ``except np.linalg.LinAlgError``) keep working.
"""
import numpy as np


class ChainsepError(Exception):
    pass


# audio io
class UnsupportedFormat(ChainsepError, ValueError):
    pass


class CorruptHeader(ChainsepError, ValueError):
    pass


class IoFailure(ChainsepError, IOError):
    pass


# stft
class SignalTooShort(ChainsepError, ValueError):
    pass


# linear algebra
class NotPositiveDefinite(ChainsepError, np.linalg.LinAlgError):
    pass


class SingularMatrix(ChainsepError, np.linalg.LinAlgError):
    pass


class ConvergenceFailure(ChainsepError, np.linalg.LinAlgError):
    pass


# metrics
class LengthMismatch(ChainsepError, ValueError):
    pass


class ZeroReference(ChainsepError, ValueError):
    pass


# configuration and orchestration
class ConfigError(ChainsepError, ValueError):
    pass


class StageError(ChainsepError, RuntimeError):

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super(StageError, self).__init__("[{}] {}".format(stage, message))
