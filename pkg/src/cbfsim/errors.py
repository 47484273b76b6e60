"""Exception types shared across the simulation stack."""


class SimulationDivergedError(RuntimeError):
    """A state or estimate became non-finite during integration.

    When raised by the scenario runner, ``trace`` holds the rows that were
    completed before the failure; elsewhere it is None.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
