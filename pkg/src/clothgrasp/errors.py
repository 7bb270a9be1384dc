"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: NoCandidatesError -> 3,
FormatError and OS errors -> 4, ParameterError -> 2.
"""


class ClothGraspError(Exception):
    """Base class for all package errors."""


class ParameterError(ClothGraspError, ValueError):
    """An argument is outside its documented domain."""


class FormatError(ClothGraspError):
    """A file or buffer does not match the expected on-disk format."""


class DegenerateInputError(ClothGraspError):
    """Input is structurally valid but geometrically unusable."""


class ZeroVectorError(DegenerateInputError):
    """A direction was requested between two identical points."""


class NoCandidatesError(ClothGraspError):
    """No grasp candidate survives the selection preconditions."""


class NoInnerEdgeError(NoCandidatesError):
    """The inner-edge point set is empty, so no correspondence exists."""


class InsufficientPointsError(ClothGraspError):
    """Too few points to estimate a spread statistic."""


class InvalidDepthError(ClothGraspError):
    """A depth lookup hit the invalid-pixel sentinel with no fallback."""
