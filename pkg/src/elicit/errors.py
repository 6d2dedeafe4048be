"""Exception hierarchy shared across the engine and the HTTP facade."""


class ElicitError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ElicitError):
    """Malformed or degenerate input data (files, records, matrices)."""


class ValidationError(ElicitError):
    """A request or argument violates an operation's contract."""


class StateConflictError(ElicitError):
    """Operation not legal in the current session state (terminal, pending, busy)."""


class NotFoundError(ElicitError):
    """A referenced entity (session, dataset, feature) does not exist."""


class SnapshotError(DataError):
    """A persisted session record is corrupt, truncated, or from another version."""
