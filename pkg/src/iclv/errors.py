"""Exception hierarchy shared across the package."""


class ICLVError(Exception):
    """Base class for every error raised by :mod:`iclv`."""


class ConfigurationError(ICLVError):
    """A model specification or parameter set does not resolve (unknown names, bad shapes)."""


class ParameterError(ICLVError):
    """Parameter values violate a validity constraint (e.g. non-monotone thresholds)."""


class IdentificationError(ConfigurationError):
    """The requested specification cannot be identified."""


class DomainError(ICLVError):
    """A kernel was called outside its mathematical domain."""


class InputError(ICLVError):
    """A data file failed to parse or validate.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
