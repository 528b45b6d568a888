"""Exception hierarchy.

``InfeasibleError`` and its subclasses mark inputs that are structurally
valid but violate a feasibility constraint of the model; the CLI maps them
to exit code 2. Everything else maps to exit code 1.
"""


class ParetoRelayError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ParetoRelayError):
    """A document does not conform to the expected structure or types."""


class TopologyError(ParetoRelayError):
    """Invalid network description: ids, roles or geometry."""


class GridError(ParetoRelayError):
    """Invalid rate grid."""


class EnumerationCapError(ParetoRelayError):
    """Exact interfering-set enumeration would exceed the configured cap."""


class ClosedFormNotApplicableError(ParetoRelayError):
    """The single-feeder closed form does not apply to this instance."""


class NumericalError(ParetoRelayError):
    """A linear-algebra step failed or produced an unreliable result."""


class InfeasibleError(ParetoRelayError):
    """Input is well-formed but infeasible under the model constraints."""


class FlowConservationError(InfeasibleError):
    """A relay transmits more flow than it receives."""


class HalfDuplexError(InfeasibleError):
    """A node would have to receive more than its listening share allows."""


class InconsistentForwardingError(InfeasibleError):
    """Forwarding matrix does not reproduce the target transmission rates."""


class InfeasibleRateError(InfeasibleError):
    """A required forwarding probability exceeds 1."""


class InfeasibleTauError(InfeasibleError):
    """No forwarding matrix with entries in [0, 1] satisfies the rates."""


class ModelViolationError(InfeasibleError):
    """A relaying-matrix entry reaches 1, breaking the convergence premise."""


class DivergentSystemError(InfeasibleError):
    """Spectral radius of the relaying matrix is not safely below 1."""
