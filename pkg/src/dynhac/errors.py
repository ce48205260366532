"""Exception hierarchy shared by every dynhac module."""


class DynHACError(Exception):
    """Base class for all errors raised by dynhac."""


class GraphError(DynHACError):
    pass


class UnknownVertexError(GraphError, KeyError):
    pass


class DuplicateVertexError(GraphError):
    pass


class MissingEdgeError(GraphError, KeyError):
    pass


class SelfLoopError(GraphError):
    pass


class IdCollisionError(DynHACError):
    pass


class DendrogramError(DynHACError):
    pass


class DuplicateMergeError(DendrogramError):
    pass


class NonRootError(DendrogramError):
    pass


class LeafHasParentError(DendrogramError):
    """A leaf scheduled for removal still has a parent (cleanup-order bug)."""


class UpdateError(DynHACError):
    """An update batch violates its preconditions."""


class SnapshotError(DynHACError):
    pass


class FormatError(DynHACError, ValueError):
    """A file on disk does not follow the expected layout."""
