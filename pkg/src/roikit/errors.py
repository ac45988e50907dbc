"""Exception and warning taxonomy shared by all modules.

CLI exit-code mapping: InputError -> 1, NumericalError -> 2.
"""


class RoikitError(Exception):
    """Base class for all toolkit errors."""


class InputError(RoikitError):
    """Malformed or inconsistent input (bad file, dimension mismatch, bad box)."""


class NumericalError(RoikitError):
    """A computation is undefined or numerically unusable for the given input."""


class DegenerateWarning(UserWarning):
    """A metric hit a degenerate case and a defined fallback value was used."""


class DroppedItemWarning(UserWarning):
    """An input element was dropped (e.g. a box clipped away entirely)."""
