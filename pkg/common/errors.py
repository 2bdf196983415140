from typing import List, Tuple


class KPPLabError(Exception):
    """Base class for every error KPPLab raises on purpose."""

    def details(self) -> list:
        return []


class ConfigError(KPPLabError):
    """
    A run configuration could not be accepted.

    Carries every problem found, each as a (dotted.path, message) pair, so a
    single pass over the config reports all malformed fields at once.
    """
    def __init__(self, problems: List[Tuple[str, str]]):
        self.problems = list(problems)
        summary = "; ".join(f"{path}: {msg}" for path, msg in self.problems)
        super().__init__(f"{len(self.problems)} configuration error(s): {summary}")

    def details(self) -> list:
        return [{'path': path, 'message': msg} for path, msg in self.problems]


class HypothesisError(ConfigError):
    """A configured medium, reaction or kernel violates the standing hypotheses (drift bound, KPP conditions)."""


class MalformedProfileError(KPPLabError, ValueError):
    """A reaction profile was sampled outside [0, 1] or returned non-finite values."""


class UnknownGeneratorError(KPPLabError, KeyError):
    pass


class CFLViolationError(KPPLabError):
    """The explicit step would lose monotonicity for the requested dt."""


class StencilPositivityError(KPPLabError):
    """Off-diagonal diffusion is too large for the positive mixed stencil."""


class KernelValidationError(KPPLabError):
    pass


class DomainTooSmallError(KPPLabError):
    """The solution became active on the boundary of the truncated grid."""


class UnresolvedPassageError(KPPLabError):
    pass


class HorizonExceededError(KPPLabError):
    pass


class CubeCapExceededError(KPPLabError):
    pass


class ShapeError(KPPLabError, ValueError):
    pass
