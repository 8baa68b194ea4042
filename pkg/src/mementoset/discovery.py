"""URI-R discovery: source interleaving, the five-condition initial scan,
HTML link harvesting from raw mementos, and published-list ingestion.

Source tags are plain strings: ``moz``, ``memento-damage``,
``httparchive``, and ``wahr:<hashtag>`` for the tweet-derived lists.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterable, Iterator
from urllib.parse import urljoin, urlsplit

from .canonical import path_length, registrable_domain, surt
from .client import ArchiveClient
from .errors import (
    EmptyTimeMap,
    MalformedUri,
    MementosetError,
    NetworkError,
    ParseError,
)
from .linkformat import dedupe, parse_compact, yearly_first_filter
from .model import (
    ArchiveDescriptor,
    Memento,
    OriginalResource,
    PathBucket,
    Provenance,
    TimeMapRecord,
)

logger = logging.getLogger(__name__)

MOZ = "moz"
MEMENTO_DAMAGE = "memento-damage"
HTTP_ARCHIVE = "httparchive"
WAHR_PREFIX = "wahr:"

ROUND_SIZE = 10  # URI-Rs taken per source per interleave round


@dataclass(frozen=True, slots=True)
class SourceStream:
    """One loaded URI-R source, order preserved exactly as loaded."""

    name: str
    uris: tuple[str, ...]
    access_time: str | None = None


def load_source_file(path: str | Path, name: str | None = None) -> SourceStream:
    """Read a one-URI-per-line file; ``#`` comments and blanks skipped."""
    path = Path(path)
    uris = []
    for line in path.read_text("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        uris.append(line)
    return SourceStream(name or path.stem, tuple(uris))


def interleave_sources(
    moz: Iterable[str],
    damage: Iterable[str],
    httparchive: Iterable[str],
    wahr_by_hashtag: dict[str, Iterable[str]],
    round_size: int = ROUND_SIZE,
) -> list[tuple[str, str]]:
    """Merge the four sources into one ordered (uri, source_tag) stream.

    Cross-source duplicates are removed first-wins in priority order
    (moz, damage, httparchive, then hashtags as given). Moz leads, then
    the damage set, then alternating rounds of ``round_size`` URIs from
    HTTP Archive and from one hashtag, cycling hashtags between rounds
    and skipping exhausted sources.
    """
    seen: set[str] = set()

    def uniq(uris: Iterable[str]) -> list[str]:
        out = []
        for u in uris:
            if u not in seen:
                seen.add(u)
                out.append(u)
        return out

    stream = [(u, MOZ) for u in uniq(moz)]
    stream += [(u, MEMENTO_DAMAGE) for u in uniq(damage)]
    ha = uniq(httparchive)
    tags = [t if t.startswith(WAHR_PREFIX) else WAHR_PREFIX + t for t in wahr_by_hashtag]
    wahr = {tag: uniq(uris) for tag, uris in zip(tags, wahr_by_hashtag.values())}

    ha_pos = 0
    wahr_pos = {tag: 0 for tag in wahr}
    tag_cursor = 0
    while ha_pos < len(ha) or any(wahr_pos[t] < len(wahr[t]) for t in wahr):
        if ha_pos < len(ha):
            chunk = ha[ha_pos : ha_pos + round_size]
            stream += [(u, HTTP_ARCHIVE) for u in chunk]
            ha_pos += len(chunk)
        for _ in range(len(wahr)):
            tag = tags[tag_cursor]
            tag_cursor = (tag_cursor + 1) % len(tags)
            if wahr_pos[tag] < len(wahr[tag]):
                chunk = wahr[tag][wahr_pos[tag] : wahr_pos[tag] + round_size]
                stream += [(u, tag) for u in chunk]
                wahr_pos[tag] += len(chunk)
                break
    return stream


_ALL_BUCKETS = (PathBucket.S0, PathBucket.S1, PathBucket.S2, PathBucket.S3, PathBucket.S4PLUS)


@dataclass
class SelectionState:
    """Bookkeeping for the initial scan's uniqueness and quota conditions."""

    quota_per_bucket: int = 2000
    chosen: set[str] = field(default_factory=set)
    chosen_domains: dict[PathBucket, set[str]] = field(
        default_factory=lambda: {b: set() for b in _ALL_BUCKETS}
    )
    bucket_counts: dict[PathBucket, int] = field(
        default_factory=lambda: {b: 0 for b in _ALL_BUCKETS}
    )

    def bucket_full(self, bucket: PathBucket) -> bool:
        return self.bucket_counts[bucket] >= self.quota_per_bucket

    def all_full(self) -> bool:
        return all(self.bucket_full(b) for b in _ALL_BUCKETS)

    def admit(self, key: str, bucket: PathBucket, domain: str) -> None:
        if self.bucket_full(bucket):
            raise ValueError(f"bucket {bucket.value} is full")
        self.chosen.add(key)
        self.chosen_domains[bucket].add(domain)
        self.bucket_counts[bucket] += 1

    def to_dict(self) -> dict:
        return {
            "quota_per_bucket": self.quota_per_bucket,
            "chosen": sorted(self.chosen),
            "chosen_domains": {b.value: sorted(s) for b, s in self.chosen_domains.items()},
            "bucket_counts": {b.value: n for b, n in self.bucket_counts.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionState":
        state = cls(quota_per_bucket=d["quota_per_bucket"])
        state.chosen = set(d["chosen"])
        state.chosen_domains = {
            PathBucket(b): set(s) for b, s in d["chosen_domains"].items()
        }
        state.bucket_counts = {PathBucket(b): n for b, n in d["bucket_counts"].items()}
        return state


class MementoCollection:
    """Merged TimeMapRecords keyed by canonical URI-R, with archive tallies.

    Records are stored deduplicated and (by default) reduced to one
    memento per archive per year. Mementos that resolve to no registered
    archive are dropped on the way in: the tallies are per-archive by
    definition.
    """

    def __init__(self, one_per_year: bool = True):
        self.one_per_year = one_per_year
        self._records: dict[str, TimeMapRecord] = {}
        self._urims: dict[str, int] = {}
        self._urirs: dict[str, set[str]] = {}

    def __contains__(self, urir_key: str) -> bool:
        return urir_key in self._records

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> Iterator[TimeMapRecord]:
        return iter(self._records.values())

    def get(self, urir_key: str) -> TimeMapRecord | None:
        return self._records.get(urir_key)

    def urir_count(self, archive_id: str) -> int:
        return len(self._urirs.get(archive_id, ()))

    def urim_count(self, archive_id: str) -> int:
        return self._urims.get(archive_id, 0)

    def archive_ids(self) -> list[str]:
        return sorted(set(self._urims) | set(self._urirs))

    def totals(self) -> dict[str, tuple[int, int]]:
        """archive_id -> (urims, urirs)."""
        return {
            a: (self._urims.get(a, 0), len(self._urirs.get(a, ())))
            for a in self.archive_ids()
        }

    def mementos_of(self, archive_id: str) -> list[Memento]:
        """The archive's stored mementos in record-insertion order."""
        out = []
        for record in self._records.values():
            out.extend(m for m in record.mementos if m.archive_id == archive_id)
        return out

    def _reduce(self, record: TimeMapRecord) -> TimeMapRecord:
        attributed = [m for m in record.mementos if m.archive_id is not None]
        if len(attributed) != len(record.mementos):
            logger.debug(
                "dropped %d unattributed mementos for %s",
                len(record.mementos) - len(attributed),
                record.urir.uri,
            )
        record = dedupe(record.with_mementos(attributed))
        return yearly_first_filter(record) if self.one_per_year else record

    def _add_tally(self, record: TimeMapRecord) -> None:
        key = record.urir.canonical_key
        for m in record.mementos:
            self._urims[m.archive_id] = self._urims.get(m.archive_id, 0) + 1
        for archive_id in {m.archive_id for m in record.mementos}:
            self._urirs.setdefault(archive_id, set()).add(key)

    def add(self, record: TimeMapRecord) -> TimeMapRecord:
        """Merge a record in; returns the stored (reduced) form."""
        key = record.urir.canonical_key
        existing = self._records.get(key)
        if existing is not None:
            # Merging never loses an archive: the reduced union keeps at
            # least one memento per (archive, year) group already present.
            for m in existing.mementos:
                self._urims[m.archive_id] -= 1
            record = existing.with_mementos(existing.mementos + record.mementos)
        reduced = self._reduce(record)
        self._records[key] = reduced
        self._add_tally(reduced)
        return reduced


@dataclass(frozen=True, slots=True)
class ScreenResult:
    """Outcome of evaluating one stream candidate."""

    accepted: OriginalResource | None
    record: TimeMapRecord | None
    reason: str


def screen_candidate(
    uri: str,
    source: str,
    client: ArchiveClient,
    state: SelectionState,
    domain_mode: str = "registrable",
) -> ScreenResult:
    """Evaluate the selection conditions for one candidate URI-R.

    A candidate is accepted when (a) its canonical key is new, (b) its
    path bucket has quota left, (c) its domain is unused in that bucket,
    and (d) its TimeMap holds at least one memento after dedup. Network
    failures reject the candidate without aborting the scan.
    """
    try:
        chain = client.resolve(uri)
        final = chain.final_uri
        key = surt(final)
        bucket = path_length(final)
        host = urlsplit(final).hostname or ""
        domain = host.lower() if domain_mode == "host" else registrable_domain(final)
    except MementosetError as exc:
        logger.info("skipping %s: %s", uri, exc)
        return ScreenResult(None, None, f"error: {exc}")
    if key in state.chosen:
        return ScreenResult(None, None, "duplicate resource")
    if state.bucket_full(bucket):
        return ScreenResult(None, None, f"bucket {bucket.value} full")
    if domain in state.chosen_domains[bucket]:
        return ScreenResult(None, None, f"domain {domain} already used in {bucket.value}")
    try:
        record = dedupe(client.fetch_timemap_aggregator(final))
    except EmptyTimeMap:
        return ScreenResult(None, None, "empty timemap")
    except (NetworkError, ParseError) as exc:
        logger.info("timemap fetch failed for %s: %s", uri, exc)
        return ScreenResult(None, None, f"error: {exc}")
    if not record.mementos:
        return ScreenResult(None, None, "empty timemap")
    resource = OriginalResource(
        uri=uri,
        canonical_key=key,
        final_uri=final,
        path_bucket=bucket,
        source=source,
        live_status=chain.terminal_status,
    )
    state.admit(key, bucket, domain)
    return ScreenResult(resource, replace(record, urir=resource), "accepted")


def select_initial(
    stream: Iterable[tuple[str, str]],
    client: ArchiveClient,
    state: SelectionState | None = None,
    target: int = 10_000,
    domain_mode: str = "registrable",
    sink: Callable[[TimeMapRecord], None] | None = None,
) -> list[OriginalResource]:
    """Scan the interleaved stream in order until quotas or target are met."""
    state = state if state is not None else SelectionState()
    accepted: list[OriginalResource] = []
    for uri, source in stream:
        if state.all_full() or len(accepted) >= target:
            break
        result = screen_candidate(uri, source, client, state, domain_mode)
        if result.accepted is not None:
            accepted.append(result.accepted)
            if sink is not None:
                sink(result.record)
    return accepted


class _AnchorHrefParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value.strip())
                    break


def extract_urirs_from_html(body: bytes | str, base: str) -> list[str]:
    """Harvest absolute http(s) URI-Rs from ``<a href>`` attributes.

    Relative links resolve against ``base``; document order is kept and
    exact-string duplicates are dropped. Tolerant of broken markup;
    non-HTML input simply yields nothing.
    """
    text = body.decode("utf-8", errors="replace") if isinstance(body, bytes) else body
    parser = _AnchorHrefParser()
    try:
        parser.feed(text)
        parser.close()
    except Exception:  # html.parser is robust; belt and braces
        logger.debug("HTML parse aborted for base %s", base)
    out: list[str] = []
    seen: set[str] = set()
    for href in parser.hrefs:
        absolute = urljoin(base, href)
        if not absolute.lower().startswith(("http://", "https://")):
            continue
        if absolute in seen:
            continue
        seen.add(absolute)
        out.append(absolute)
    return out


def method2_expand(
    archive: ArchiveDescriptor,
    collection: MementoCollection,
    client: ArchiveClient,
    min_urirs: int = 200,
    max_new: int | None = None,
) -> list[TimeMapRecord]:
    """Grow an underfilled archive from links inside its own mementos.

    Downloads the raw content of the archive's already-collected
    mementos, harvests URI-Rs, and pulls the TimeMap of each one not yet
    selected. Every archive's tallies grow from those TimeMaps, not just
    the target's. Stops at ``min_urirs`` for the target archive.
    """
    new_records: list[TimeMapRecord] = []
    if collection.urir_count(archive.id) >= min_urirs:
        return new_records
    attempted: set[str] = set()
    for memento in collection.mementos_of(archive.id):
        if memento.raw_urim is None:
            continue
        base_record = collection.get(memento.urir_key)
        base = base_record.urir.final_uri if base_record else memento.urim
        try:
            raw = client.fetch_raw_memento(memento)
        except MementosetError as exc:
            logger.info("raw fetch failed for %s: %s", memento.urim, exc)
            continue
        for uri in extract_urirs_from_html(raw.body, base):
            try:
                key = surt(uri)
            except MalformedUri:
                continue
            if key in collection or key in attempted:
                continue
            attempted.add(key)
            try:
                record = client.fetch_timemap_aggregator(uri)
            except EmptyTimeMap:
                continue
            except (NetworkError, ParseError) as exc:
                logger.info("timemap fetch failed for %s: %s", uri, exc)
                continue
            collection.add(record)
            new_records.append(record)
            if collection.urir_count(archive.id) >= min_urirs:
                return new_records
            if max_new is not None and len(new_records) >= max_new:
                return new_records
    return new_records


_EMBEDDED = re.compile(r"/(\d{14})(?:id_)?/(.+)$")


def embedded_urir(urim: str) -> str | None:
    """The URI-R a Wayback-style URI-M embeds after its timestamp, if any."""
    m = _EMBEDDED.search(urim)
    if not m:
        return None
    rest = m.group(2)
    return rest if rest.lower().startswith(("http://", "https://")) else "http://" + rest


def ingest_published_list(
    path: str | Path,
    list_format: str,
    archive: ArchiveDescriptor,
    collection: MementoCollection,
    client: ArchiveClient,
    min_urirs: int = 200,
) -> list[TimeMapRecord]:
    """Ingest an archive-published URI list until the archive hits its minimum.

    ``urirs_only`` lists hold one URI-R per line; each TimeMap is fetched
    via the aggregator and must contain at least one memento in the owning
    archive. ``urirs_and_urims`` lists are compact two-column files whose
    records are built directly, grouped by the URI-R embedded in each
    URI-M. Unusable lines are skipped and logged.
    """
    if list_format not in ("urirs_only", "urirs_and_urims"):
        raise ValueError(f"unknown list format {list_format!r}")
    text = Path(path).read_text("utf-8")
    new_records: list[TimeMapRecord] = []

    if list_format == "urirs_only":
        for lineno, line in enumerate(text.splitlines(), start=1):
            uri = line.strip()
            if not uri or uri.startswith("#"):
                continue
            if collection.urir_count(archive.id) >= min_urirs:
                break
            try:
                key = surt(uri)
            except MalformedUri as exc:
                logger.info("line %d skipped: %s", lineno, exc)
                continue
            if key in collection:
                continue
            try:
                record = dedupe(client.fetch_timemap_aggregator(uri))
            except EmptyTimeMap:
                continue
            except (NetworkError, ParseError) as exc:
                logger.info("timemap fetch failed for %s: %s", uri, exc)
                continue
            if not any(m.archive_id == archive.id for m in record.mementos):
                continue
            collection.add(record)
            new_records.append(record)
        return new_records

    # urirs_and_urims: compact lines grouped by their embedded URI-R.
    groups: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stamp, sep, urim = line.partition(" ")
        urir = embedded_urir(urim) if sep else None
        if not sep or len(stamp) != 14 or not stamp.isdigit() or urir is None:
            logger.info("line %d skipped: not a compact memento line", lineno)
            continue
        groups.setdefault(urir, []).append(line)
    for urir, lines in groups.items():
        if collection.urir_count(archive.id) >= min_urirs:
            break
        try:
            key = surt(urir)
        except MalformedUri as exc:
            logger.info("group %s skipped: %s", urir, exc)
            continue
        if key in collection:
            continue
        try:
            record = parse_compact(
                "\n".join(lines),
                urir,
                registry=client.registry,
                provenance=Provenance.PUBLISHED_LIST,
            )
        except ParseError as exc:
            logger.info("group %s skipped: %s", urir, exc)
            continue
        collection.add(record)
        new_records.append(record)
    return new_records
