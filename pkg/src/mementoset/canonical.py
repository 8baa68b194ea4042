"""URI canonicalization (SURT form), redirect resolution, path bucketing.

These are the three predicates the initial-selection scan uses to decide
whether two URI-Rs are the same page and where a page sits in the
path-length quota buckets.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Mapping
from urllib.parse import urljoin, urlsplit

import requests

from .errors import HopLimitExceeded, MalformedUri, NetworkError, RedirectLoop
from .model import PathBucket, header_value

logger = logging.getLogger(__name__)

DEFAULT_MAX_HOPS = 10
DEFAULT_TIMEOUT = 30.0

# (method, uri) -> (status, headers)
Fetch = Callable[[str, str], tuple[int, Mapping[str, str]]]

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")
_WWW_LABEL = re.compile(r"^www\d*$")


def _split_http_uri(uri: str):
    """Parse into urlsplit parts, tolerating scheme-less web URIs.

    Bare host forms like ``www.EXAMPLE.com`` are treated as http. Anything
    with an explicit non-http(s) scheme is rejected.
    """
    if not isinstance(uri, str) or not uri.strip():
        raise MalformedUri(str(uri), "empty input")
    candidate = uri.strip()
    lowered = candidate.lower()
    if lowered.startswith(("http://", "https://")):
        pass
    elif candidate.startswith("//"):
        candidate = "http:" + candidate
    elif m := _SCHEME_RE.match(candidate):
        # host:port looks like a scheme; a real scheme is never all-digit after ":"
        rest = candidate[m.end() :]
        if rest[:1].isdigit():
            candidate = "http://" + candidate
        else:
            raise MalformedUri(uri, "non-http(s) scheme")
    else:
        candidate = "http://" + candidate
    parts = urlsplit(candidate)
    try:
        host, port = parts.hostname, parts.port
    except ValueError as exc:
        raise MalformedUri(uri, str(exc)) from None
    if not host:
        raise MalformedUri(uri, "empty host")
    host = host.rstrip(".")
    if not host or any(not label for label in host.split(".")):
        raise MalformedUri(uri, "bad host")
    return parts, host, port


def surt(uri: str) -> str:
    """Canonicalize to a Sort-friendly URI Reordering Transform string.

    Committed rule set, applied deterministically:
    host lowercased; one leading ``www`` label (digit suffix allowed)
    stripped; host labels reversed and comma-joined, then ``)``; default
    ports 80/443 dropped, other ports kept; fragment dropped; path and
    query kept verbatim; empty path rendered ``/``.

    So ``http://www.EXAMPLE.com:80`` and ``https://example.com/`` both map
    to ``com,example)/`` -- the scheme never distinguishes resources.
    """
    parts, host, port = _split_http_uri(uri)
    labels = host.split(".")
    if len(labels) > 1 and _WWW_LABEL.match(labels[0]):
        labels = labels[1:]
    key = ",".join(reversed(labels))
    if port is not None and port not in (80, 443):
        key += f":{port}"
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    return f"{key}){path}"


def unsurt(key: str) -> str:
    """Rebuild an http URI from a SURT string (inverse up to scheme/www)."""
    head, sep, path = key.partition(")")
    if not sep:
        raise MalformedUri(key, "not a SURT string")
    hostpart, _, port = head.partition(":")
    host = ".".join(reversed(hostpart.split(",")))
    if not host:
        raise MalformedUri(key, "not a SURT string")
    netloc = f"{host}:{port}" if port else host
    return f"http://{netloc}{path or '/'}"


_BUCKETS = (PathBucket.S0, PathBucket.S1, PathBucket.S2, PathBucket.S3)


def path_length(uri: str) -> PathBucket:
    """Bucket by count of nonempty path segments (4 or more collapse).

    Query string, fragment, and trailing slashes never affect the bucket.
    """
    parts, _, _ = _split_http_uri(uri)
    n = sum(1 for seg in parts.path.split("/") if seg)
    return _BUCKETS[n] if n < 4 else PathBucket.S4PLUS


# Common multi-label public suffixes; enough for the archive domains we
# track and typical selection streams. Not a full public-suffix list.
_TWO_LEVEL_SUFFIXES = frozenset(
    {
        "ac.uk", "co.uk", "gov.uk", "ltd.uk", "me.uk", "net.uk", "nhs.uk",
        "org.uk", "plc.uk", "sch.uk",
        "gc.ca", "on.ca", "qc.ca", "bc.ca", "ab.ca",
        "com.au", "net.au", "org.au", "edu.au", "gov.au", "id.au",
        "co.jp", "ne.jp", "or.jp", "ac.jp", "go.jp",
        "co.nz", "net.nz", "org.nz", "govt.nz",
        "co.za", "org.za", "web.za",
        "com.br", "net.br", "org.br", "gov.br",
        "com.cn", "net.cn", "org.cn", "gov.cn",
        "com.mx", "com.ar", "com.tr", "com.tw", "com.sg", "com.hk",
        "co.in", "net.in", "org.in", "gov.in", "ac.in",
        "co.kr", "or.kr", "go.kr",
        "com.es", "org.es", "gob.es",
        "co.il", "org.il", "gov.il",
        "com.ua", "gov.ua", "in.ua",
    }
)


def registrable_domain(host_or_uri: str) -> str:
    """Host minus its public suffix (``a.b.example.co.uk`` -> ``example.co.uk``).

    Uses an embedded table of common two-level suffixes rather than a full
    public-suffix list; callers that need exact matching can compare full
    hosts instead.
    """
    if "/" in host_or_uri or ":" in host_or_uri or not host_or_uri:
        _, host, _ = _split_http_uri(host_or_uri)
    else:
        host = host_or_uri.lower().rstrip(".")
    labels = host.split(".")
    if len(labels) <= 2:
        return host
    if ".".join(labels[-2:]) in _TWO_LEVEL_SUFFIXES:
        return ".".join(labels[-3:])
    return ".".join(labels[-2:])


@dataclass(frozen=True, slots=True)
class RedirectChain:
    """The hops an HTTP HEAD walk took, ending at a non-redirect."""

    hops: tuple[tuple[str, int], ...]
    final_uri: str
    terminal_status: int


def _requests_fetch(method: str, uri: str, timeout: float = DEFAULT_TIMEOUT):
    try:
        resp = requests.request(
            method, uri, allow_redirects=False, timeout=timeout, stream=True
        )
        try:
            return resp.status_code, dict(resp.headers)
        finally:
            resp.close()
    except requests.RequestException as exc:
        raise NetworkError(f"{method} {uri}: {exc}") from exc


def resolve_redirects(
    uri: str,
    max_hops: int = DEFAULT_MAX_HOPS,
    fetch: Fetch | None = None,
) -> RedirectChain:
    """Follow 3xx Location hops until a non-redirect response.

    HEAD is tried first and replaced by a body-discarding GET when the
    server rejects it (405/501). Relative Locations resolve against the
    current URI. Raises RedirectLoop on a repeated URI, HopLimitExceeded
    past ``max_hops``, NetworkError on transport failure.
    """
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    do_fetch = fetch or _requests_fetch
    current = uri
    seen = {current}
    hops: list[tuple[str, int]] = []
    for _ in range(max_hops):
        status, headers = do_fetch("HEAD", current)
        if status in (405, 501):
            status, headers = do_fetch("GET", current)
        hops.append((current, status))
        if not 300 <= status <= 399:
            return RedirectChain(tuple(hops), current, status)
        location = header_value(headers, "Location")
        if not location:
            logger.warning("redirect without Location at %s (%d)", current, status)
            return RedirectChain(tuple(hops), current, status)
        nxt = urljoin(current, location.strip())
        if nxt in seen:
            raise RedirectLoop(nxt, [h[0] for h in hops])
        seen.add(nxt)
        current = nxt
    raise HopLimitExceeded(max_hops, [h[0] for h in hops])


def same_resource(
    a: str,
    b: str,
    max_hops: int = DEFAULT_MAX_HOPS,
    fetch: Fetch | None = None,
) -> bool:
    """True when two URI-Rs canonicalize or redirect to the same page."""
    if surt(a) == surt(b):
        return True
    final_a = resolve_redirects(a, max_hops, fetch).final_uri
    final_b = resolve_redirects(b, max_hops, fetch).final_uri
    return surt(final_a) == surt(final_b)


def original_resource(
    uri: str,
    final_uri: str | None = None,
    source: str | None = None,
    live_status: int | None = None,
):
    """Build an OriginalResource whose key/bucket derive from final_uri."""
    from .model import OriginalResource

    final = final_uri or uri
    return OriginalResource(
        uri=uri,
        canonical_key=surt(final),
        final_uri=final,
        path_bucket=path_length(final),
        source=source,
        live_status=live_status,
    )
