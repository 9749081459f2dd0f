"""Exception types shared across the package."""


class BiascopeError(Exception):
    """Base class. ``code`` is the machine-readable name emitted by the CLI."""

    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class UserError(BiascopeError):
    exit_code = 2


class ResampleExhausted(BiascopeError):
    pass


class DegenerateAttractor(BiascopeError):
    pass


class UnsupportedFamily(UserError):
    pass


class SizeMismatch(UserError):
    pass


class ShapeMismatch(BiascopeError):
    pass


class NoLossRecorded(BiascopeError):
    pass


class ZeroNormEmbedding(BiascopeError):
    pass


class LabelOutOfRange(UserError):
    pass


class MissingLabels(UserError):
    pass


class TooFewSamples(UserError):
    pass


class Indeterminate(BiascopeError):
    pass


class EmptyResult(UserError):
    pass


class ConfigError(UserError):
    pass
