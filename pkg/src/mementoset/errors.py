"""Exception hierarchy shared by all mementoset modules."""


class MementosetError(Exception):
    """Base class for all errors raised by this package."""


class MalformedUri(MementosetError):
    """Input could not be parsed as an absolute http(s) URI."""

    def __init__(self, uri: str, reason: str = "not an absolute http(s) URI"):
        super().__init__(f"{reason}: {uri!r}")
        self.uri = uri


class UnknownArchive(MementosetError):
    """No archive in the registry matches the given URI-M host."""

    def __init__(self, host: str):
        super().__init__(f"no registered archive matches host {host!r}")
        self.host = host


class ParseError(MementosetError):
    """Malformed TimeMap or compact-format input.

    ``offset`` is a byte offset for link-format input and a 1-based line
    number for line-oriented input.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class MissingOriginal(MementosetError):
    """TimeMap carries no rel="original" link and no URI-R hint was given."""


class NetworkError(MementosetError):
    """Transport-level failure (DNS, connect, timeout, exhausted retries)."""


class RedirectLoop(MementosetError):
    """A URI repeated within a redirect chain."""

    def __init__(self, uri: str, chain: list[str]):
        super().__init__(f"redirect loop at {uri!r} after {len(chain)} hops")
        self.uri = uri
        self.chain = chain


class HopLimitExceeded(MementosetError):
    """Redirect chain exceeded the configured hop limit."""

    def __init__(self, limit: int, chain: list[str]):
        super().__init__(f"more than {limit} redirects")
        self.limit = limit
        self.chain = chain


class EmptyTimeMap(MementosetError):
    """A TimeMap request yielded zero mementos.

    Not necessarily a failure: the initial-selection scan uses this as its
    "never archived" signal.
    """

    def __init__(self, urir: str):
        super().__init__(f"no mementos found for {urir!r}")
        self.urir = urir


class NoTimeMapEndpoint(MementosetError):
    """Archive has no native Memento support or no TimeMap URI template."""

    def __init__(self, archive_id: str):
        super().__init__(f"archive {archive_id!r} exposes no TimeMap endpoint")
        self.archive_id = archive_id


class RawAccessUnsupported(MementosetError):
    """Archive has no scheme for retrieving unaltered (raw) content."""

    def __init__(self, urim: str):
        super().__init__(f"no raw-access variant for {urim!r}")
        self.urim = urim


class EmptyProbe(MementosetError):
    """Budget estimation was given an empty probe sample."""
