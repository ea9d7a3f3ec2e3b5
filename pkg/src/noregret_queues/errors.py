"""Exception types raised across the package."""


class QueueLearnError(Exception):
    """Base class for all package errors."""


class InvalidSpec(QueueLearnError, ValueError):
    pass


class DegenerateSystem(QueueLearnError, ValueError):
    pass


class NotDominating(QueueLearnError, ValueError):
    pass


class Infeasible(QueueLearnError, ValueError):
    pass


class DecompositionFailed(QueueLearnError, RuntimeError):
    pass


class ChoiceFromEmptyQueue(QueueLearnError, ValueError):
    pass


class CouplingBroken(QueueLearnError, RuntimeError):
    """Standard and dual engines disagreed on a coupled run."""


class OutOfOrder(QueueLearnError, RuntimeError):
    pass


class WrongModel(QueueLearnError, ValueError):
    pass


class IncompleteWindow(QueueLearnError, ValueError):
    pass


class InsufficientData(QueueLearnError, ValueError):
    pass


class NoFiniteWindow(QueueLearnError, ValueError):
    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class ConfigInvalid(QueueLearnError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
