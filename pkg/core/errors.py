"""
Error taxonomy shared by the library and the CLI.
Each class carries the process exit code the CLI returns for it.
Exit code 2 is reserved for a rejected null hypothesis.
"""


class FkwcError(Exception):
    exit_code = 1


class InputError(FkwcError):
    """Unreadable or malformed input data"""

    exit_code = 1


class DimensionError(InputError):
    """Curves or grids of incompatible size"""


class ParameterError(FkwcError):
    """Invalid option or specification value"""

    exit_code = 3


class ConfigurationError(ParameterError):
    """Request that cannot be evaluated on the given data (e.g. J < 2)"""


class NumericalError(FkwcError):
    """A numerical routine failed"""

    exit_code = 4


class SmallSampleWarning(UserWarning):
    """Normal approximation used on very small groups"""


class DegenerateStatisticWarning(UserWarning):
    """Statistic computed from too few observations to be informative"""
