"""Exception hierarchy.

Errors marked fatal end a framework run with ``terminated_by="fatal_error"``;
everything else is a programming or input error and propagates.
"""


class NoteloopError(Exception):
    pass


class ContractError(NoteloopError, ValueError):
    """A precondition or invariant was violated by the caller."""


class FatalRunError(NoteloopError):
    """Base for errors that abort a single question run."""


class TransportError(FatalRunError):
    """Network failure or timeout that survived the retry budget."""


class ProviderError(FatalRunError):
    """The provider answered but refused or returned an unusable payload."""


class PlaybackExhaustedError(FatalRunError):
    """No remaining playback entry matches the request."""


class FixtureMissError(TransportError):
    """An HTTP request has no recorded fixture (live calls are forbidden)."""


class NotFoundError(NoteloopError):
    """A requested page or document does not exist."""


class LoadError(NoteloopError):
    """A dataset, corpus, or script file could not be parsed."""


class ParseError(NoteloopError):
    """LM output does not follow the expected grammar."""


class JudgeParseError(ParseError):
    pass


class QualityParseError(ParseError):
    pass


class ConfigurationError(NoteloopError):
    pass
