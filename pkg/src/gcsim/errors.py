"""Exception hierarchy; each class maps to one CLI exit code."""


class GCSError(Exception):
    exit_code = 1


class ConfigError(GCSError, ValueError):
    exit_code = 2


class EngineIncompatibility(GCSError, ValueError):
    exit_code = 3


class RegressionFailure(GCSError):
    exit_code = 4


class NumericalFailure(GCSError, ArithmeticError):
    exit_code = 5
