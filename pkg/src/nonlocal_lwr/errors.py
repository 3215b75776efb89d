class NonlocalLWRError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NonlocalLWRError, ValueError):
    """An argument lies outside the admissible range."""


class InvalidModelError(NonlocalLWRError, ValueError):
    """The velocity law cannot be evaluated or is malformed."""


class UsageError(NonlocalLWRError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class CFLViolationError(NonlocalLWRError, RuntimeError):
    """A time step left [0, rho_jam] even after repeated step halving."""


class ConfigError(NonlocalLWRError, ValueError):
    """Run configuration failed to parse or validate.

    ``problems`` lists every issue found, not just the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
