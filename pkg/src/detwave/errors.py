"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): input problems
(:class:`InputError`, exit 2) and numerical failures (:class:`NumericalError`,
exit 3).
"""


class DetwaveError(Exception):
    """Base class for every error raised by the package."""


class InputError(DetwaveError):
    pass


class NumericalError(DetwaveError):
    pass


class ValidationError(InputError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DomainError(InputError):
    pass


class NotAWave(InputError):
    pass


class IgnitionPlacementError(InputError):
    pass


class NotRestPoint(InputError):
    pass


class DegenerateProfile(InputError):
    pass


class UnsupportedData(InputError):
    pass


class CFLViolation(InputError):
    pass


class SonicError(InputError):
    pass


class BranchError(InputError):
    pass


class NoBranch(NumericalError):
    """No Rankine-Hugoniot root on the requested branch at this speed."""


class NoThreshold(DetwaveError):
    """Detonation case (i): no weak-detonation speed exists in the bracket.

    Not a failure; carries the separation value at the lower bracket end.
    """

    def __init__(self, message, d_lo=None):
        self.d_lo = d_lo
        super().__init__(message)


class NoSolution(NumericalError):
    pass


class NoConnection(NumericalError):
    pass


class SolveError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class PlateauError(NumericalError):
    pass


class NoPlateau(NumericalError):
    pass


class InconsistentIndex(NumericalError):
    pass


class ContourTooClose(NumericalError):
    pass


class NonIntegerWinding(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class DegenerateEndstate(UserWarning):
    """Right state sits exactly on an ignition threshold."""
