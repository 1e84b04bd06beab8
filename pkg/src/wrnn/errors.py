class WrnnError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(WrnnError):
    exit_code = 1


class DataError(WrnnError):
    exit_code = 2


class ShapeError(WrnnError, ValueError):
    exit_code = 2


class NumericalError(WrnnError):
    exit_code = 3


class CheckpointError(DataError):
    pass
