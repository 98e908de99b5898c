"""Exception hierarchy for the riccilab package."""


class RicciLabError(Exception):
    """Base class for all package errors."""


class NonPositiveWarp(RicciLabError):
    """Warp radius hit zero or below at an interior node (missed surgery)."""

    def __init__(self, node, value, t=None):
        self.node = int(node)
        self.value = float(value)
        self.t = t
        super().__init__(f"psi <= 0 at interior node {node} (psi={value:g}, t={t})")


class UnderResolved(RicciLabError):
    """Stencil span exceeds the local curvature scale."""

    def __init__(self, node, span, scale):
        self.node = int(node)
        self.span = float(span)
        self.scale = float(scale)
        super().__init__(
            f"stencil span {span:g} exceeds curvature scale {scale:g} at node {node}"
        )


class ResolutionCapExceeded(RicciLabError):
    """Regridding would require more nodes than the configured maximum."""


class DomainError(RicciLabError):
    """Argument outside the mathematical domain of an operation."""


class PreconditionError(RicciLabError):
    """An operation's precondition does not hold."""


class CFLViolation(RicciLabError):
    """Requested time step exceeds the stability bound."""


class MonitorViolation(RicciLabError):
    """A runtime monitor failed; carries the structured violation record."""

    def __init__(self, record):
        self.record = record
        super().__init__(f"monitor violation: {record}")


class InsufficientHistory(RicciLabError):
    """Requested time window precedes stored history or crosses a surgery."""


class WrongTopology(RicciLabError):
    """Operation applied to a slice with an incompatible topology tag."""


class NonPositiveScalar(RicciLabError):
    """Canonical classification requested at a node with R <= 0."""


class InvalidParameters(RicciLabError):
    """Surgery/cutoff parameters outside their admissible ranges."""


class NoValidSite(RicciLabError):
    """A component must be cut but no candidate site passes validation."""

    def __init__(self, component_id, diagnostics):
        self.component_id = component_id
        self.diagnostics = diagnostics
        super().__init__(
            f"component {component_id}: no validated cutoff site ({diagnostics})"
        )


class ProfileVerificationFailed(RicciLabError):
    """Constructed cap profile violates one of its invariants."""


class PostConditionFailed(RicciLabError):
    """A surgery post-contract failed; names the contract."""

    def __init__(self, contract, details):
        self.contract = contract
        self.details = details
        super().__init__(f"surgery contract '{contract}' failed: {details}")


class TopologyError(RicciLabError):
    """A cut produced an unrecognized topology tag combination."""


class InconsistentEvent(RicciLabError):
    """Surgery event does not fit the component graph."""


class NotExtinct(RicciLabError):
    """Reconstruction requested before the component graph is closed."""


class ScathedCurve(RicciLabError):
    """Spacetime curve meets a removed region."""

    def __init__(self, t_scathed):
        self.t_scathed = float(t_scathed)
        super().__init__(f"curve is scathed at t={t_scathed:g}")


class CorruptLog(RicciLabError):
    """Run directory event log cannot be parsed or fails invariants."""


class UsageError(RicciLabError):
    """Bad CLI arguments or scenario file."""
