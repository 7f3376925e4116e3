"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class MalformedObservation(EngineError):
    """An observation violates the input contract; the whole frame is rejected."""


class InsufficientPoints(EngineError):
    """Too few (or degenerate) points to fit a bounding box."""


class FrontMissing(EngineError):
    """A directional relation was requested against an object with no front."""


class DuplicateInstanceId(EngineError):
    """Two instances with the same id were handed to the graph builder."""


class UnsupportedFormat(EngineError):
    """Unknown export format name."""


class SchemaError(EngineError):
    """A structured document does not match its schema."""


class UnknownRelation(SchemaError):
    """Edge label outside the relation / action vocabulary."""


class UnknownAffordance(SchemaError):
    """Affordance token outside the five-token vocabulary."""


class DanglingEdge(SchemaError):
    """Edge references a node id that was never declared."""


class EmptyMatchingGraph(EngineError):
    """Content graph contains no real nodes to match against the scene."""


class MissingActionTarget(EngineError):
    """No action edge of the content node points at a matched instance."""


class MissingRequiredPart(EngineError):
    """The action needs an affordance part the anchor instance does not have."""
