"""application/link-format TimeMap parsing, compact format, yearly filter.

The compact format is two columns per memento: the 14-digit UTC capture
timestamp and the URI-M, separated by one space. It exists because full
link-format TimeMaps carry far more metadata than the sampling pipeline
needs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable

from .canonical import original_resource
from .errors import MissingOriginal, ParseError, UnknownArchive
from .model import (
    ArchiveRegistry,
    Memento,
    Provenance,
    TimeMapRecord,
    archive_of,
    compact14,
    format_http_datetime,
    parse_compact14,
    parse_http_datetime,
    raw_variant,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class LinkEntry:
    """One ``<target>; attr="value"`` member of a link-format document."""

    target: str
    rel: tuple[str, ...]
    datetime: datetime | None = None
    type_attr: str | None = None
    from_attr: datetime | None = None

    def is_memento(self) -> bool:
        return "memento" in self.rel


def _split_members(text: str):
    """Yield (char_offset, raw_member) split on top-level commas.

    Commas inside ``<...>`` targets or quoted values do not split.
    """
    start = 0
    in_target = False
    in_quote = False
    escaped = False
    for i, ch in enumerate(text):
        if escaped:
            escaped = False
            continue
        if in_quote:
            if ch == "\\":
                escaped = True
            elif ch == '"':
                in_quote = False
        elif in_target:
            if ch == ">":
                in_target = False
        elif ch == '"':
            in_quote = True
        elif ch == "<":
            in_target = True
        elif ch == ",":
            yield start, text[start:i]
            start = i + 1
    yield start, text[start:]


def _split_params(raw: str):
    """Split ``; a="b"; c=d`` on semicolons outside quotes."""
    parts = []
    start = 0
    in_quote = False
    escaped = False
    for i, ch in enumerate(raw):
        if escaped:
            escaped = False
        elif in_quote:
            if ch == "\\":
                escaped = True
            elif ch == '"':
                in_quote = False
        elif ch == '"':
            in_quote = True
        elif ch == ";":
            parts.append(raw[start:i])
            start = i + 1
    parts.append(raw[start:])
    return parts


def _byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


def _parse_member(text: str, offset: int, raw: str, strict: bool) -> LinkEntry | None:
    member = raw.strip()
    if not member:
        return None
    if not member.startswith("<"):
        raise ParseError("member does not start with <target>", _byte_offset(text, offset))
    end = member.find(">")
    if end < 0:
        raise ParseError("unterminated <target>", _byte_offset(text, offset))
    target = member[1:end].strip()
    if not target:
        raise ParseError("empty target", _byte_offset(text, offset))
    attrs: dict[str, str] = {}
    for part in _split_params(member[end + 1 :]):
        part = part.strip()
        if not part:
            continue
        name, eq, value = part.partition("=")
        name = name.strip().lower()
        if not eq or not name:
            raise ParseError(f"bad parameter {part!r}", _byte_offset(text, offset))
        value = value.strip()
        if value.startswith('"'):
            if not value.endswith('"') or len(value) < 2:
                raise ParseError(
                    f"unterminated quoted value in {part!r}", _byte_offset(text, offset)
                )
            value = value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        elif strict:
            raise ParseError(
                f"unquoted parameter value in {part!r}", _byte_offset(text, offset)
            )
        attrs.setdefault(name, value)
    rel = tuple(attrs.get("rel", "").split())
    if not rel:
        raise ParseError(f"member {target!r} has no rel", _byte_offset(text, offset))
    dt = from_dt = None
    try:
        if "datetime" in attrs:
            dt = parse_http_datetime(attrs["datetime"])
        if "from" in attrs:
            from_dt = parse_http_datetime(attrs["from"])
    except ValueError as exc:
        raise ParseError(str(exc), _byte_offset(text, offset)) from None
    return LinkEntry(
        target=target,
        rel=rel,
        datetime=dt,
        type_attr=attrs.get("type"),
        from_attr=from_dt,
    )


def parse_link_entries(body: bytes | str, strict: bool = False) -> list[LinkEntry]:
    """Tokenize a link-format document into entries, order preserved."""
    if isinstance(body, bytes):
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}", exc.start) from None
    else:
        text = body
    if not text.strip():
        raise ParseError("empty link-format document", 0)
    entries = []
    for offset, raw in _split_members(text):
        entry = _parse_member(text, offset, raw, strict)
        if entry is not None:
            entries.append(entry)
    if not entries:
        raise ParseError("no members found", 0)
    return entries


def _attribute(urim: str, registry: ArchiveRegistry | None) -> str | None:
    if registry is None:
        return None
    try:
        return archive_of(urim, registry).id
    except Exception:
        logger.debug("no registered archive for %s", urim)
        return None


def _build_memento(
    urim: str, dt: datetime, urir_key: str, registry: ArchiveRegistry | None
) -> Memento:
    archive_id = _attribute(urim, registry)
    raw = None
    if archive_id is not None:
        raw = raw_variant(urim, registry.get(archive_id).raw_scheme)
    return Memento(
        urim=urim,
        memento_datetime=dt,
        urir_key=urir_key,
        archive_id=archive_id,
        raw_urim=raw,
    )


def record_from_entries(
    entries: Iterable[LinkEntry],
    urir_hint: str | None = None,
    registry: ArchiveRegistry | None = None,
    provenance: Provenance = Provenance.AGGREGATOR,
    fetched_at: datetime | None = None,
) -> TimeMapRecord:
    """Assemble a TimeMapRecord from parsed entries.

    The rel="original" entry names the URI-R; ``urir_hint`` is used when
    absent. Every entry whose rel includes "memento" (also "first
    memento"/"last memento") becomes one Memento, in document order.
    """
    entries = list(entries)
    original = next((e.target for e in entries if "original" in e.rel), None)
    urir = original or urir_hint
    if urir is None:
        raise MissingOriginal("no rel=original entry and no URI-R hint")
    resource = original_resource(urir)
    mementos = []
    for e in entries:
        if not e.is_memento():
            continue
        if e.datetime is None:
            raise ParseError(f"memento {e.target!r} lacks a datetime attribute")
        mementos.append(_build_memento(e.target, e.datetime, resource.canonical_key, registry))
    return TimeMapRecord(
        urir=resource,
        mementos=tuple(mementos),
        fetched_at=fetched_at or datetime.now(timezone.utc),
        provenance=provenance,
    )


def parse_timemap(
    body: bytes | str,
    urir_hint: str | None = None,
    registry: ArchiveRegistry | None = None,
    provenance: Provenance = Provenance.AGGREGATOR,
    strict: bool = False,
    fetched_at: datetime | None = None,
) -> TimeMapRecord:
    """Parse a link-format TimeMap body into a TimeMapRecord."""
    entries = parse_link_entries(body, strict=strict)
    return record_from_entries(entries, urir_hint, registry, provenance, fetched_at)


def serialize_compact(record: TimeMapRecord) -> str:
    """One ``YYYYMMDDhhmmss URI-M`` line per memento, order preserved."""
    lines = [f"{compact14(m.memento_datetime)} {m.urim}" for m in record.mementos]
    return "\n".join(lines) + "\n" if lines else ""


def parse_compact(
    text: str,
    urir: str,
    registry: ArchiveRegistry | None = None,
    provenance: Provenance = Provenance.PUBLISHED_LIST,
    fetched_at: datetime | None = None,
) -> TimeMapRecord:
    """Parse compact two-column text back into a record.

    Blank lines and ``#`` comment lines are skipped.
    """
    resource = original_resource(urir)
    mementos = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stamp, sep, urim = line.partition(" ")
        if not sep or not urim or " " in urim:
            raise ParseError(f"expected '14-digit-stamp URI', got {line!r}", lineno)
        try:
            dt = parse_compact14(stamp)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        mementos.append(_build_memento(urim, dt, resource.canonical_key, registry))
    return TimeMapRecord(
        urir=resource,
        mementos=tuple(mementos),
        fetched_at=fetched_at or datetime.now(timezone.utc),
        provenance=provenance,
    )


def serialize_linkformat(record: TimeMapRecord) -> str:
    """Render a record back to application/link-format text."""
    members = [f'<{record.urir.uri}>; rel="original"']
    for m in record.mementos:
        members.append(
            f'<{m.urim}>; rel="memento"; '
            f'datetime="{format_http_datetime(m.memento_datetime)}"'
        )
    return ",\n".join(members) + "\n"


def dedupe(record: TimeMapRecord) -> TimeMapRecord:
    """Drop mementos with an already-seen URI-M string, keeping the first."""
    seen: set[str] = set()
    kept = []
    for m in record.mementos:
        if m.urim in seen:
            continue
        seen.add(m.urim)
        kept.append(m)
    return record.with_mementos(kept)


def yearly_first_filter(record: TimeMapRecord) -> TimeMapRecord:
    """Keep the earliest memento per (archive, UTC year).

    Ties on datetime break toward the lexicographically smallest URI-M.
    Output groups archives in order of first appearance, years ascending
    within each archive, which makes the filter idempotent.
    """
    winners: dict[str, dict[int, Memento]] = {}
    for m in record.mementos:
        if m.archive_id is None:
            raise UnknownArchive(m.urim)
        years = winners.setdefault(m.archive_id, {})
        best = years.get(m.year)
        if best is None or (m.memento_datetime, m.urim) < (best.memento_datetime, best.urim):
            years[m.year] = m
    kept = [
        years[year]
        for years in winners.values()
        for year in sorted(years)
    ]
    return record.with_mementos(kept)
