"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary invalid arguments; the classes here
exist where callers need to distinguish the failure mode programmatically
(the CLI maps them to exit codes).
"""


class MvkitError(Exception):
    """Base class for package-specific failures."""


class SceneFormatError(MvkitError, ValueError):
    """A scene or report document violates the JSON schema.

    ``field_path`` names the offending location, e.g. ``frames[0][0]``.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class TrainingDivergedError(MvkitError, ArithmeticError):
    """Weight training produced a non-finite loss; try a smaller learning rate."""


class NumericalFailureError(MvkitError, ArithmeticError):
    """A block update hit a non-finite gradient; carries the schedule position."""

    def __init__(self, t: int, view: int, message: str = "non-finite gradient"):
        self.t = t
        self.view = view
        super().__init__(f"{message} at block (t={t}, view={view})")
