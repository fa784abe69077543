# app/models/errors.py


class ForgeError(Exception):
    """Base class for every failure raised by the engine."""

    exit_code = 1


class InputError(ForgeError, ValueError):
    """Malformed input files, unknown ids or bad command usage."""

    exit_code = 2


class GraphError(ForgeError):
    pass


class RingError(ForgeError, ArithmeticError):
    pass


class MoebiusError(ForgeError):
    pass


class SchottkyError(ForgeError):
    pass


class KZError(ForgeError):
    pass
