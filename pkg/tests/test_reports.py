from datetime import datetime, timezone

import pytest

from mementoset import Classification, ParseError
from mementoset.model import OriginalResource, PathBucket
from mementoset.reports import (
    build_archive_totals,
    build_path_histogram,
    build_source_bucket_table,
    build_status_table,
    build_urims_per_year,
    read_urir_table,
    write_csv,
    write_urir_table,
)
from mementoset.sampler import ManifestRow


def row(archive, year, urir, idx=0):
    return ManifestRow(
        archive_id=archive,
        urir=urir,
        urim=f"http://{archive}/web/{year}0101{idx:04d}00/{urir}",
        memento_datetime=datetime(year, 1, 1, idx // 60, idx % 60, tzinfo=timezone.utc),
        classification=Classification.ARCHIVAL_OK,
    )


def resource(uri, bucket, source, status):
    return OriginalResource(
        uri=uri, canonical_key=uri, final_uri=uri,
        path_bucket=bucket, source=source, live_status=status,
    )


class TestUrimsPerYear:
    def test_totals_reconcile(self):
        rows = [row("a.org", 2000, "http://x/", 1), row("a.org", 2001, "http://x/", 2),
                row("b.org", 2000, "http://y/", 3)]
        table = build_urims_per_year(rows)
        assert table[0] == ["archive", "total", "2000", "2001"]
        body = {r[0]: r for r in table[1:]}
        assert body["a.org"] == ["a.org", "2", "1", "1"]
        assert body["b.org"] == ["b.org", "1", "1", "0"]
        total = body["Total"]
        assert total[1] == "3"
        # Column sums equal the stated totals.
        for col in range(2, 4):
            assert int(total[col]) == sum(
                int(body[a][col]) for a in ("a.org", "b.org")
            )

    def test_empty_manifest_header_only_with_default_years(self):
        table = build_urims_per_year([])
        assert table[0][:2] == ["archive", "total"]
        assert table[0][2] == "1996" and table[0][-1] == "2017"
        assert table[1][0] == "Total" and table[1][1] == "0"

    def test_ordering_by_total_desc(self):
        rows = [row("small.org", 2000, "http://x/", 1)]
        rows += [row("big.org", 2000, "http://y/", i) for i in range(2, 5)]
        table = build_urims_per_year(rows)
        assert [r[0] for r in table[1:]] == ["big.org", "small.org", "Total"]


class TestArchiveTotals:
    def test_counts_and_order(self):
        rows = [
            row("a.org", 2000, "http://x/", 1),
            row("a.org", 2001, "http://y/", 2),
            row("b.org", 2000, "http://x/", 3),
        ]
        table = build_archive_totals(rows)
        assert table[0] == ["archive", "urirs", "urims"]
        assert table[1] == ["a.org", "2", "2"]
        assert table[2] == ["b.org", "1", "1"]
        assert table[3] == ["Total", "2", "3"]  # unique URI-Rs overall


class TestPathHistogram:
    def test_unique_urirs_bucketed(self):
        rows = [
            row("a.org", 2000, "http://x.example/", 1),
            row("b.org", 2001, "http://x.example/", 2),  # same URI-R twice
            row("a.org", 2000, "http://y.example/a/b", 3),
        ]
        table = build_path_histogram(rows)
        as_dict = {r[0]: r[1] for r in table[1:]}
        assert as_dict["s0"] == "1"
        assert as_dict["s2"] == "1"
        assert as_dict["Total"] == "2"


class TestSourceAndStatusTables:
    def test_source_bucket_table(self):
        resources = [
            resource("http://a/", PathBucket.S0, "moz", 200),
            resource("http://b/", PathBucket.S0, "moz", 200),
            resource("http://c/x", PathBucket.S1, "wahr:#paris", 404),
        ]
        table = build_source_bucket_table(resources)
        assert table[0] == ["source", "s0", "s1", "s2", "s3", "s4plus", "total"]
        body = {r[0]: r for r in table[1:]}
        assert body["moz"][1] == "2" and body["moz"][-1] == "2"
        assert body["wahr:#paris"][2] == "1"
        assert body["Total"][-1] == "3"

    def test_status_table(self):
        resources = [
            resource("http://a/", PathBucket.S0, "moz", 200),
            resource("http://b/", PathBucket.S0, "moz", 503),
            resource("http://c/", PathBucket.S0, "moz", None),
        ]
        table = build_status_table(resources)
        body = {r[0]: r for r in table[1:]}
        assert body["s0"] == ["s0", "1", "1", "1", "3"]
        assert body["Total"] == ["Total", "1", "1", "1", "3"]


class TestPublishedSelectionTables:
    """The 10,000-URI-R selection reproduces both printed marginals."""

    def test_source_bucket_marginals(self):
        from published_counts import SOURCE_BUCKETS, build_published_urir_table

        table = build_source_bucket_table(build_published_urir_table())
        assert table[0] == ["source", "s0", "s1", "s2", "s3", "s4plus", "total"]
        body = {r[0]: [int(v) for v in r[1:]] for r in table[1:]}
        assert body["moz"] == [286, 17, 3, 2, 1, 309]
        assert body["httparchive"] == [1581, 42, 70, 2, 0, 1695]
        assert body["memento-damage"] == [114, 63, 62, 42, 60, 341]
        assert body["wahr:#WomensMarch"][-1] == 2943
        assert body["Total"] == [2000, 2000, 2000, 2000, 2000, 10000]
        # Row order follows first appearance in the selection.
        assert [r[0] for r in table[1:]] == list(SOURCE_BUCKETS) + ["Total"]

    def test_status_marginals(self):
        from published_counts import build_published_urir_table

        table = build_status_table(build_published_urir_table())
        body = {r[0]: [int(v) for v in r[1:]] for r in table[1:]}
        assert body["s0"] == [1870, 130, 0, 2000]
        assert body["s1"] == [1651, 349, 0, 2000]
        assert body["s2"] == [1715, 285, 0, 2000]
        assert body["s3"] == [1720, 280, 0, 2000]
        assert body["s4plus"] == [1731, 269, 0, 2000]
        assert body["Total"] == [8687, 1313, 0, 10000]


class TestUrirTable:
    def test_round_trip(self, tmp_path):
        resources = [
            resource("http://a/", PathBucket.S0, "moz", 200),
            resource("http://b/x", PathBucket.S1, None, None),
        ]
        path = tmp_path / "urirs.tsv"
        write_urir_table(resources, path)
        assert read_urir_table(path) == resources

    def test_bad_header(self, tmp_path):
        path = tmp_path / "urirs.tsv"
        path.write_text("wrong\n")
        with pytest.raises(ParseError):
            read_urir_table(path)


class TestWriteCsv:
    def test_plain_lf_output(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv([["a", "b"], ["1", "2"]], path)
        assert path.read_text() == "a,b\n1,2\n"
