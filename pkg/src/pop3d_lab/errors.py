"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class DimensionError(ContractError):
    """Array shapes do not compose."""


class DiagnosticsError(RuntimeError):
    """A numeric quantity went non-finite; carries a description of where."""


class UpdateAborted(RuntimeError):
    """Too many minibatches were skipped during one policy update."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
