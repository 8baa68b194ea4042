"""Downsampling: per-archive download budgets, the memento cap,
non-archival error pruning, and final dataset summaries.

A "selection" here is a mapping of archive id to that archive's chosen
mementos. The persisted form is one compact two-column file per archive
plus a tab-delimited manifest of (archive, URI-R, URI-M, datetime,
classification) rows.
"""

from __future__ import annotations

import logging
import math
import random
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .canonical import path_length, unsurt
from .errors import EmptyProbe, MementosetError, ParseError
from .model import (
    Classification,
    Memento,
    PathBucket,
    SelectionConstraints,
    TimeMapRecord,
    compact14,
    parse_compact14,
)

logger = logging.getLogger(__name__)

Selection = dict[str, list[Memento]]


@dataclass(frozen=True, slots=True)
class ArchiveBudget:
    """How many mementos one archive may contribute under the time budget."""

    archive_id: str
    probe_mean_cost: float  # seconds per memento
    allowed_count: int


def estimate_budget(
    archive_id: str,
    probe: Sequence[float],
    constraints: SelectionConstraints,
) -> ArchiveBudget:
    """Derive the per-archive cap from measured download costs.

    ``probe`` holds wall-clock durations in seconds (timed_download
    results). The allowance is the download budget divided by the mean
    cost, never above the configured per-archive maximum.
    """
    durations = [getattr(d, "elapsed", d) for d in probe]
    if not durations:
        raise EmptyProbe(f"no probe downloads for {archive_id}")
    mean = sum(durations) / len(durations)
    budget = constraints.download_budget.total_seconds()
    if mean <= 0:
        allowed = constraints.max_urims_per_archive
    else:
        allowed = min(math.floor(budget / mean), constraints.max_urims_per_archive)
    return ArchiveBudget(archive_id, mean, max(allowed, 0))


def group_by_archive(records: Iterable[TimeMapRecord]) -> Selection:
    """Flatten records into per-archive memento lists, order preserved."""
    selection: Selection = {}
    for record in records:
        for m in record.mementos:
            if m.archive_id is None:
                continue
            selection.setdefault(m.archive_id, []).append(m)
    return selection


PROBE_SIZE = 20  # mementos timed per archive to estimate download cost


def probe_archives(
    client,
    selection: Selection,
    per_archive: int = PROBE_SIZE,
) -> tuple[dict[str, list[float]], dict[str, Classification]]:
    """Timed raw downloads of each archive's first mementos.

    Runs one worker per archive (the client's lanes keep each archive
    serial and spaced). Returns wall-clock durations per archive for
    budget estimation plus the response classification of every probed
    URI-M. Mementos without raw access or with failing downloads are
    skipped and logged.
    """
    durations: dict[str, list[float]] = {}
    classifications: dict[str, Classification] = {}
    lock = threading.Lock()

    def worker(archive_id: str) -> None:
        for m in selection[archive_id][:per_archive]:
            if m.raw_urim is None:
                continue
            try:
                timed = client.timed_download(m)
            except MementosetError as exc:
                logger.info("probe failed for %s: %s", m.urim, exc)
                continue
            with lock:
                durations.setdefault(archive_id, []).append(timed.elapsed)
                classifications[m.urim] = timed.content.classification

    if selection:
        with ThreadPoolExecutor(max_workers=len(selection)) as pool:
            list(pool.map(worker, selection))
    return durations, classifications


def _cap_one(mementos: list[Memento], allowed: int, rng: random.Random) -> list[Memento]:
    # Dedupe by URI-M defensively; order of first occurrence.
    seen: set[str] = set()
    pool = [m for m in mementos if not (m.urim in seen or seen.add(m.urim))]
    if len(pool) <= allowed:
        return sorted(pool, key=lambda m: (m.memento_datetime, m.urim))
    if allowed <= 0:
        return []

    by_urir: dict[str, list[Memento]] = {}
    for m in pool:
        by_urir.setdefault(m.urir_key, []).append(m)
    for ms in by_urir.values():
        ms.sort(key=lambda m: (m.memento_datetime, m.urim))

    urirs = sorted(by_urir)
    rng.shuffle(urirs)

    chosen: list[Memento] = []
    chosen_urims: set[str] = set()
    year_counts: Counter[int] = Counter()

    # Pass 1: one memento per URI-R, favoring years not covered yet.
    for key in urirs:
        if len(chosen) >= allowed:
            break
        candidates = by_urir[key]
        pick = next((m for m in candidates if m.year not in year_counts), candidates[0])
        chosen.append(pick)
        chosen_urims.add(pick.urim)
        year_counts[pick.year] += 1

    # Pass 2: fill remaining slots from the least-covered years.
    by_year: dict[int, list[Memento]] = {}
    for m in pool:
        if m.urim not in chosen_urims:
            by_year.setdefault(m.year, []).append(m)
    for ms in by_year.values():
        ms.sort(key=lambda m: (m.memento_datetime, m.urim))
    while len(chosen) < allowed and by_year:
        year = min(by_year, key=lambda y: (year_counts[y], y))
        pick = by_year[year].pop(0)
        if not by_year[year]:
            del by_year[year]
        chosen.append(pick)
        year_counts[year] += 1

    return sorted(chosen, key=lambda m: (m.memento_datetime, m.urim))


def cap_mementos(
    selection: Selection,
    budgets: Mapping[str, ArchiveBudget],
    seed: int = 0,
) -> Selection:
    """Trim each archive to its budgeted allowance.

    Keeps at least one memento per URI-R whenever the allowance permits,
    then spreads remaining slots across capture years. Deterministic for
    a given seed; each archive's output is sorted by (datetime, URI-M).
    """
    capped: Selection = {}
    for archive_id, mementos in selection.items():
        budget = budgets[archive_id]
        rng = random.Random(f"{seed}:{archive_id}")
        capped[archive_id] = _cap_one(mementos, budget.allowed_count, rng)
    return capped


def prune_non_archival(
    selection: Selection,
    probe_results: Mapping[str, Classification],
    keep_quota: int = 0,
) -> Selection:
    """Remove mementos whose responses were non-archival 4xx/5xx.

    ``keep_quota`` of them survive for tracking, chosen deterministically
    (ordered by archive, then URI-M). Archival responses, including
    archival error pages, are always kept.
    """
    missing = [
        m.urim
        for mementos in selection.values()
        for m in mementos
        if m.urim not in probe_results
    ]
    if missing:
        raise ValueError(f"{len(missing)} mementos lack a classification: {missing[:3]}")
    non_archival = sorted(
        (archive_id, m.urim)
        for archive_id, mementos in selection.items()
        for m in mementos
        if probe_results[m.urim] is Classification.NON_ARCHIVAL_ERROR
    )
    tracked = {urim for _, urim in non_archival[:keep_quota]}
    pruned: Selection = {}
    for archive_id, mementos in selection.items():
        pruned[archive_id] = [
            m
            for m in mementos
            if probe_results[m.urim] is not Classification.NON_ARCHIVAL_ERROR
            or m.urim in tracked
        ]
    return pruned


@dataclass(frozen=True, slots=True)
class DatasetSummary:
    """Counts the final selection is reported with."""

    per_archive: dict[str, tuple[int, int]]  # archive -> (urirs, urims)
    per_year: dict[int, int]
    per_archive_year: dict[str, dict[int, int]]
    path_histogram: dict[PathBucket, int]  # unique URI-Rs per bucket
    total_urims: int
    total_unique_urirs: int


def finalize(selection: Selection) -> DatasetSummary:
    """Summarize a pruned selection; totals reconcile by construction."""
    per_archive: dict[str, tuple[int, int]] = {}
    per_year: Counter[int] = Counter()
    per_archive_year: dict[str, dict[int, int]] = {}
    all_keys: set[str] = set()
    total = 0
    for archive_id, mementos in selection.items():
        keys = {m.urir_key for m in mementos}
        all_keys |= keys
        per_archive[archive_id] = (len(keys), len(mementos))
        total += len(mementos)
        years: Counter[int] = Counter(m.year for m in mementos)
        per_archive_year[archive_id] = dict(sorted(years.items()))
        per_year.update(years)
    histogram = Counter(path_length(unsurt(key)) for key in all_keys)
    return DatasetSummary(
        per_archive=per_archive,
        per_year=dict(sorted(per_year.items())),
        per_archive_year=per_archive_year,
        path_histogram={b: histogram.get(b, 0) for b in PathBucket},
        total_urims=total,
        total_unique_urirs=len(all_keys),
    )


@dataclass(frozen=True, slots=True)
class ManifestRow:
    archive_id: str
    urir: str
    urim: str
    memento_datetime: datetime
    classification: Classification


MANIFEST_HEADER = ("archive", "urir", "urim", "datetime", "classification")


def rows_from_selection(
    selection: Selection,
    urir_by_key: Mapping[str, str],
    classifications: Mapping[str, Classification],
) -> list[ManifestRow]:
    rows = []
    for archive_id in sorted(selection):
        for m in selection[archive_id]:
            rows.append(
                ManifestRow(
                    archive_id=archive_id,
                    urir=urir_by_key.get(m.urir_key, unsurt(m.urir_key)),
                    urim=m.urim,
                    memento_datetime=m.memento_datetime,
                    classification=classifications[m.urim],
                )
            )
    return rows


def write_manifest(rows: Iterable[ManifestRow], path: str | Path) -> None:
    """Tab-delimited manifest; URIs never contain raw tabs."""
    lines = ["\t".join(MANIFEST_HEADER)]
    for r in rows:
        lines.append(
            "\t".join(
                (
                    r.archive_id,
                    r.urir,
                    r.urim,
                    compact14(r.memento_datetime),
                    r.classification.value,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_manifest(path: str | Path) -> list[ManifestRow]:
    rows = []
    text = Path(path).read_text("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if lineno == 1:
            if tuple(line.rstrip("\n").split("\t")) != MANIFEST_HEADER:
                raise ParseError(f"bad manifest header {line!r}", lineno)
            continue
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_HEADER):
            raise ParseError(f"expected {len(MANIFEST_HEADER)} columns", lineno)
        archive_id, urir, urim, stamp, classification = parts
        try:
            rows.append(
                ManifestRow(
                    archive_id=archive_id,
                    urir=urir,
                    urim=urim,
                    memento_datetime=parse_compact14(stamp),
                    classification=Classification(classification),
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return rows


def write_compact_files(selection: Selection, out_dir: str | Path) -> list[Path]:
    """One compact two-column file per archive."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for archive_id in sorted(selection):
        lines = [
            f"{compact14(m.memento_datetime)} {m.urim}" for m in selection[archive_id]
        ]
        path = out_dir / f"{archive_id}.txt"
        path.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
        written.append(path)
    return written
