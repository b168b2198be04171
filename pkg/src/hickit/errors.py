"""Exception types shared across the toolkit.

Everything raised on bad user input or bad files derives from ToolkitError so
the CLI can map it to a nonzero exit without swallowing genuine bugs.
"""


class ToolkitError(Exception):
    """Base class for recoverable, user-facing failures."""


class DatasetError(ToolkitError):
    """Malformed or inconsistent annotation data."""


class FormatError(ToolkitError):
    """A binary or line-oriented file does not follow its declared layout."""


class ScorerError(ToolkitError):
    """A scoring backend violated the request/response protocol."""
