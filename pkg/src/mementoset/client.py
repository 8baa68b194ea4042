"""Network retrieval: TimeMap fetches, raw memento downloads, HEAD probes.

All traffic to one archive flows through a single serial "lane" that
enforces a minimum spacing between requests; lanes for different archives
run concurrently. Every operation can be replayed hermetically from a
fixture directory, and a recording transport captures live responses into
one.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import random
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Callable, Mapping, Protocol
from urllib.parse import urlsplit

import requests

from .canonical import RedirectChain, resolve_redirects
from .errors import (
    EmptyTimeMap,
    NetworkError,
    NoTimeMapEndpoint,
    RawAccessUnsupported,
)
from .linkformat import parse_link_entries, record_from_entries
from .model import (
    ArchiveDescriptor,
    ArchiveRegistry,
    Classification,
    Memento,
    Provenance,
    TimeMapRecord,
    classify_response,
    header_value,
    raw_variant,
)

logger = logging.getLogger(__name__)

# LANL-compatible; MemGator deployments use the same /timemap/link/ shape.
DEFAULT_AGGREGATOR_TEMPLATE = "http://timetravel.mementoweb.org/timemap/link/{uri}"

USER_AGENT = "mementoset/0.1 (+research dataset collection)"


@dataclass(frozen=True, slots=True)
class TransportResponse:
    status: int
    headers: dict[str, str]
    body: bytes


class Transport(Protocol):
    def request(
        self, method: str, uri: str, headers: Mapping[str, str] | None = None
    ) -> TransportResponse: ...


class RequestsTransport:
    """Live HTTP transport; redirects are never followed implicitly."""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout
        self._session = requests.Session()
        self._session.headers["User-Agent"] = USER_AGENT

    def request(self, method, uri, headers=None) -> TransportResponse:
        try:
            resp = self._session.request(
                method,
                uri,
                headers=dict(headers or {}),
                allow_redirects=False,
                timeout=self.timeout,
            )
            body = b"" if method == "HEAD" else resp.content
            return TransportResponse(resp.status_code, dict(resp.headers), body)
        except requests.RequestException as exc:
            raise NetworkError(f"{method} {uri}: {exc}") from exc


class FixtureStore:
    """Directory of canned responses keyed by request method + URI."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def key(method: str, uri: str) -> str:
        return hashlib.sha256(f"{method.upper()} {uri}".encode()).hexdigest()

    def _path(self, method: str, uri: str) -> Path:
        return self.root / f"{self.key(method, uri)}.json"

    def save(self, method: str, uri: str, response: TransportResponse) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = {
            "method": method.upper(),
            "uri": uri,
            "status": response.status,
            "headers": response.headers,
            "body_b64": base64.b64encode(response.body).decode("ascii"),
        }
        self._path(method, uri).write_text(json.dumps(payload, indent=1), "utf-8")

    def load(self, method: str, uri: str) -> TransportResponse | None:
        path = self._path(method, uri)
        if not path.exists():
            return None
        payload = json.loads(path.read_text("utf-8"))
        return TransportResponse(
            payload["status"],
            dict(payload["headers"]),
            base64.b64decode(payload["body_b64"]),
        )


class FixtureTransport:
    """Replays recorded responses; unknown requests fail loudly."""

    def __init__(self, store: FixtureStore | str | Path):
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)

    def request(self, method, uri, headers=None) -> TransportResponse:
        found = self.store.load(method, uri)
        if found is None:
            raise NetworkError(f"no fixture recorded for {method} {uri}")
        return found


class RecordingTransport:
    """Passes requests to a live transport and captures the responses."""

    def __init__(self, inner: Transport, store: FixtureStore | str | Path):
        self.inner = inner
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)

    def request(self, method, uri, headers=None) -> TransportResponse:
        response = self.inner.request(method, uri, headers)
        self.store.save(method, uri, response)
        return response


@dataclass(frozen=True, slots=True)
class FetchPolicy:
    """Politeness knobs; the default regime is one worker per archive."""

    per_archive_concurrency: int = 1
    min_request_interval: float = 1.0  # seconds between requests to one archive
    retries: int = 3
    timeout: float = 30.0

    def __post_init__(self):
        if self.per_archive_concurrency < 1:
            raise ValueError("per_archive_concurrency must be >= 1")
        if self.min_request_interval < 0 or self.timeout <= 0 or self.retries < 0:
            raise ValueError("bad fetch policy")


class _Lane:
    def __init__(self, concurrency: int):
        self.slots = threading.BoundedSemaphore(concurrency)
        self.gate = threading.Lock()
        self.last_done = 0.0


@dataclass(frozen=True, slots=True)
class RawContent:
    """Result of downloading a memento's unaltered content."""

    status: int
    headers: dict[str, str]
    body: bytes
    classification: Classification


@dataclass(frozen=True, slots=True)
class TimedDownload:
    content: RawContent
    elapsed: float


class ArchiveClient:
    """Rate-limited fetch operations against archives and aggregators.

    Thread-safe: many workers may call into one client; each archive's
    lane serializes and spaces their requests.
    """

    def __init__(
        self,
        registry: ArchiveRegistry,
        policy: FetchPolicy | None = None,
        transport: Transport | None = None,
        aggregator_template: str = DEFAULT_AGGREGATOR_TEMPLATE,
        clock: Callable[[], datetime] | None = None,
    ):
        self.registry = registry
        self.policy = policy or FetchPolicy()
        self.transport = transport or RequestsTransport(self.policy.timeout)
        self.aggregator_template = aggregator_template
        self.clock = clock  # None: records stamp themselves with now()
        self._lanes: dict[str, _Lane] = {}
        self._lanes_lock = threading.Lock()

    def _lane_key(self, uri: str) -> str:
        host = (urlsplit(uri).hostname or uri).lower()
        match = self.registry.match_host(host)
        return f"archive:{match.id}" if match else f"host:{host}"

    def _lane(self, uri: str) -> _Lane:
        key = self._lane_key(uri)
        with self._lanes_lock:
            lane = self._lanes.get(key)
            if lane is None:
                lane = self._lanes[key] = _Lane(self.policy.per_archive_concurrency)
        return lane

    def request(
        self, method: str, uri: str, headers: Mapping[str, str] | None = None
    ) -> TransportResponse:
        """One polite request: lane slot, spacing, retries with backoff."""
        lane = self._lane(uri)
        with lane.slots:
            last_error: NetworkError | None = None
            response = None
            for attempt in range(self.policy.retries + 1):
                response, last_error = self._attempt(lane, method, uri, headers)
                if response is not None and response.status not in (429, 503):
                    return response
                if attempt == self.policy.retries:
                    break
                time.sleep(self._backoff_delay(attempt, response))
            if last_error is not None:
                raise last_error
            return response  # exhausted retries on 429/503; caller classifies

    def _attempt(self, lane, method, uri, headers):
        # A serial lane (the default regime) spaces requests from the end
        # of the previous one; wider lanes space from the previous start
        # so their in-flight slots can actually overlap.
        serial = self.policy.per_archive_concurrency == 1
        with lane.gate:
            wait = lane.last_done + self.policy.min_request_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            if serial:
                try:
                    return self.transport.request(method, uri, headers), None
                except NetworkError as exc:
                    return None, exc
                finally:
                    lane.last_done = time.monotonic()
            lane.last_done = time.monotonic()
        try:
            return self.transport.request(method, uri, headers), None
        except NetworkError as exc:
            return None, exc

    def _backoff_delay(self, attempt: int, response: TransportResponse | None) -> float:
        if response is not None:
            retry_after = header_value(response.headers, "Retry-After")
            if retry_after and retry_after.strip().isdigit():
                return min(float(retry_after), self.policy.timeout)
        return 0.5 * (2**attempt) + random.uniform(0, 0.1)

    # -- fetch operations ------------------------------------------------

    def _fetch_timemap_entries(self, first_uri: str):
        """GET a TimeMap and follow rel="timemap" pages transitively."""
        queue = [first_uri]
        visited: set[str] = set()
        entries = []
        while queue:
            uri = queue.pop(0)
            if uri in visited:
                continue
            visited.add(uri)
            response = self.request("GET", uri)
            if response.status == 404 or (response.status == 200 and not response.body.strip()):
                continue
            if response.status != 200:
                raise NetworkError(f"GET {uri}: status {response.status}")
            page = parse_link_entries(response.body)
            entries.extend(page)
            queue.extend(
                e.target
                for e in page
                if "timemap" in e.rel and "self" not in e.rel and e.target not in visited
            )
        return entries

    def fetch_timemap_aggregator(
        self, urir: str, endpoint: str | None = None
    ) -> TimeMapRecord:
        """Aggregated TimeMap for a URI-R; EmptyTimeMap when never archived."""
        template = endpoint or self.aggregator_template
        if "{uri}" not in template:
            raise ValueError("aggregator endpoint needs a {uri} placeholder")
        entries = self._fetch_timemap_entries(template.format(uri=urir))
        record = record_from_entries(
            entries, urir_hint=urir, registry=self.registry,
            provenance=Provenance.AGGREGATOR,
            fetched_at=self.clock() if self.clock else None,
        ) if entries else None
        if record is None or not record.mementos:
            raise EmptyTimeMap(urir)
        return record

    def fetch_timemap_direct(
        self, archive: ArchiveDescriptor, urir: str
    ) -> TimeMapRecord:
        """TimeMap straight from one archive, bypassing aggregator caches."""
        if not archive.memento_native or not archive.timemap_template:
            raise NoTimeMapEndpoint(archive.id)
        entries = self._fetch_timemap_entries(archive.timemap_template.format(uri=urir))
        if not entries:
            raise EmptyTimeMap(urir)
        record = record_from_entries(
            entries, urir_hint=urir, registry=self.registry,
            provenance=Provenance.DIRECT_ARCHIVE,
            fetched_at=self.clock() if self.clock else None,
        )
        if not record.mementos:
            raise EmptyTimeMap(urir)
        # Everything in a direct TimeMap belongs to the archive that served it.
        attributed = [
            replace(m, archive_id=archive.id, raw_urim=raw_variant(m.urim, archive.raw_scheme))
            for m in record.mementos
        ]
        return record.with_mementos(attributed)

    def fetch_raw_memento(self, memento: Memento) -> RawContent:
        """Download unaltered content via the archive's raw-access scheme."""
        if memento.raw_urim is None:
            raise RawAccessUnsupported(memento.urim)
        response = self.request("GET", memento.raw_urim)
        return RawContent(
            status=response.status,
            headers=response.headers,
            body=response.body,
            classification=classify_response(response.status, response.headers),
        )

    def timed_download(self, memento: Memento) -> TimedDownload:
        """Raw download plus wall-clock cost, for budget estimation."""
        started = time.monotonic()
        content = self.fetch_raw_memento(memento)
        return TimedDownload(content, time.monotonic() - started)

    def resolve(self, uri: str, max_hops: int = 10) -> RedirectChain:
        """Redirect resolution routed through the polite request lanes."""
        return resolve_redirects(uri, max_hops, fetch=self._probe)

    def _probe(self, method: str, uri: str):
        response = self.request(method, uri)
        return response.status, response.headers
