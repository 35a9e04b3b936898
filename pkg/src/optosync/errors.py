"""Exception hierarchy shared by all optosync modules."""


class OptosyncError(Exception):
    """Base class for every error raised by this package."""


class SchedulingInPast(OptosyncError):
    """An event was scheduled before the engine's current time."""


class EmptyLabel(OptosyncError):
    """A random substream was requested with an empty label."""


class TimeBeforeUpdate(OptosyncError):
    """A clock was queried for an instant before its last update."""


class PpsDisabled(OptosyncError):
    """A 1PPS edge was requested from a clock with PPS output disabled."""


class LinkDown(OptosyncError):
    """A message was sent over a link that has already failed."""


class AlreadyFailed(OptosyncError):
    """A failure was injected into a link that is already down."""


class TimestampInLocalPast(OptosyncError):
    """A timed command carried a local timestamp that had already passed."""


class NoOffsetEstimate(OptosyncError):
    """Timestamp translation was requested for an unmeasured agent."""


class NoBackupPath(OptosyncError):
    """Recovery was requested for a link with no configured backup."""


class EmptyTrace(OptosyncError):
    """Statistics were requested over an empty sample trace."""


class IncompleteRecord(OptosyncError):
    """A recovery record was assembled with missing or disordered stages."""


class ParseError(OptosyncError):
    """A scenario file could not be read as structured text."""


class ValidationError(OptosyncError):
    """A scenario document violated the schema.

    Carries the full list of problems so a user can fix a file in one
    pass instead of replaying validation once per field.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownParameter(OptosyncError):
    """A sweep referenced a parameter path absent from the scenario."""
