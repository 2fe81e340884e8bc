"""Exception and warning types shared across the library."""


class ChainperfError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ChainperfError):
    """A chain document is malformed or fails validation."""


class SingularRouting(ChainperfError):
    """The routing matrix does not admit a unique arrival-rate solution."""


class Unstable(ChainperfError):
    """A node's offered load meets or exceeds its service capacity."""


class Infeasible(ChainperfError):
    """No allocation within the configured caps satisfies the target."""


class StateSpaceOverflow(ChainperfError):
    """Reachability exploration exceeded the marking cap."""


class ImmediateCycle(ChainperfError):
    """Immediate transitions form a cycle of vanishing markings."""


class Reducible(ChainperfError):
    """The tangible chain has more than one recurrent class."""


class NumericalError(ChainperfError):
    """A numerical result failed its internal consistency check."""


class EmptyCandidateSet(ChainperfError):
    """Candidate generation left some node with no feasible option."""


class NoFeasibleConfig(ChainperfError):
    """The configuration search found no chain meeting every target."""


class ApproximationWarning(UserWarning):
    """A queueing approximation was used outside its calibrated range."""


class DegenerateDeploymentWarning(UserWarning):
    """A deployment cannot meet its threshold even with everything up."""
