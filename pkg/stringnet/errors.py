"""
Exception hierarchy for stringnet.

Every error raised by the core derives from :class:`StringNetError`, itself a
``ValueError``, so callers that only care about "bad input" can catch the
builtin. Errors tied to a node or an edge carry its index as an attribute.
"""
from typing import Optional


class StringNetError(ValueError):
    """Base class for all stringnet errors."""
    file: Optional[str] = None
    field: Optional[str] = None

    def located(self, file: str, field: Optional[str] = None) -> "StringNetError":
        """Prefix the message with the config file and dotted field it came from; first location wins."""
        if self.file is None:
            self.file, self.field = file, field
            location = f"{file}:{field}" if field else file
            self.args = (f"{location}: {self}",)
        return self


# --- Topology ---

class TopologyError(StringNetError):
    """The network description is not a rooted tree in canonical numbering."""


class CycleDetected(TopologyError):
    pass


class DisconnectedGraph(TopologyError):
    pass


class RootDegreeNotOne(TopologyError):
    pass


class NumberingViolation(TopologyError):
    """Edge ``i`` must end at node ``i`` and point away from the root."""

    def __init__(self, edge: int, message: str):
        self.edge = edge
        super().__init__(f"edge {edge}: {message}")


class NonPositiveSpeed(TopologyError):

    def __init__(self, edge: int, speed: float):
        self.edge = edge
        self.speed = speed
        super().__init__(f"edge {edge}: wave speed must be positive, got {speed}")


class NotExternalNode(TopologyError):

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"node {node} is not an external node")


# --- Junction algebra ---

class IllPosedAlpha(StringNetError):
    """alpha_n equals k_n at an internal node: no semigroup exists."""

    def __init__(self, node: int, alpha: float, k: int):
        self.node = node
        self.alpha = alpha
        self.k = k
        super().__init__(f"node {node}: alpha={alpha} equals k={k}, the problem is ill-posed")


class ConditionFTSViolated(StringNetError):

    def __init__(self, node: int, alpha: float, k: int):
        self.node = node
        self.alpha = alpha
        self.k = k
        super().__init__(
            f"node {node}: alpha={alpha} differs from k-2={k - 2}, no finite-time extinction is predicted"
        )


class SingularJunction(StringNetError):

    def __init__(self, k: int, alpha: float):
        self.k = k
        self.alpha = alpha
        super().__init__(f"junction with k={k}, alpha={alpha} has a singular coupling system")


# --- Simulation ---

class IncommensurableTimestep(StringNetError):

    def __init__(self, edge: int, cells: float):
        self.edge = edge
        self.cells = cells
        super().__init__(
            f"edge {edge}: 1/(c*dt) = {cells!r} is not an integer >= 2; dt must subdivide the travel time"
        )


class IncompatibleInitialData(StringNetError):

    def __init__(self, node: int, message: str):
        self.node = node
        super().__init__(f"node {node}: {message}")


class InvalidProfile(StringNetError):
    """A catalog entry was built with unusable parameters."""


class HorizonTooShort(StringNetError):

    def __init__(self, candidate: float, window: float, last_time: float):
        self.candidate = candidate
        self.window = window
        self.last_time = last_time
        super().__init__(
            f"extinction candidate t*={candidate} needs a persistence window of {window}, "
            f"but the trace ends at t={last_time}"
        )


# --- Spectrum ---

class BranchCut(StringNetError):
    pass


class NoEigenvalue(StringNetError):
    pass


class GridTooCoarse(StringNetError):
    pass


class DegenerateInput(StringNetError):
    pass


class InsufficientTrace(StringNetError):
    pass


class ZeroEnergy(StringNetError):
    pass


# --- Finite differences ---

class CourantViolation(StringNetError):

    def __init__(self, edge: int, courant: float):
        self.edge = edge
        self.courant = courant
        super().__init__(f"edge {edge}: Courant number {courant:.4f} exceeds 1")


# --- Configuration ---

class ConfigError(StringNetError):
    """A config file could not be parsed; ``field`` is the dotted location when known."""

    def __init__(self, file: str, field: Optional[str], message: str):
        self.file = file
        self.field = field
        location = f"{file}:{field}" if field else file
        super().__init__(f"{location}: {message}")
