import json

import pytest

from mementoset.cli import main
from mementoset.client import FixtureStore, TransportResponse
from mementoset.linkformat import parse_compact, serialize_linkformat
from mementoset.model import default_registry

from published_counts import build_published_manifest
from mementoset.sampler import write_manifest
from test_pipeline import AGG, build_fixture_corpus, write_config

URIR_FOM = "http://www.futureofmusic.org/about/positions.cfm"


class TestCanon:
    def test_single_uri(self, capsys):
        assert main(["canon", "http://www.EXAMPLE.com"]) == 0
        assert capsys.readouterr().out == "com,example)/\n"

    def test_multiple_uris(self, capsys):
        code = main(["canon", "http://www.example.com", "https://a.b.co.uk/P/q.html"])
        assert code == 0
        assert capsys.readouterr().out == "com,example)/\nuk,co,b,a)/P/q.html\n"

    def test_no_args_usage_exit(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["canon"])
        assert info.value.code == 2

    def test_invalid_stops_without_keep_going(self, capsys):
        code = main(["canon", "mailto:x@y", "http://ok.example/"])
        assert code == 1
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "error" in captured.err

    def test_keep_going_prints_valid_lines(self, capsys):
        code = main(["canon", "--keep-going", "http://a.com/", "mailto:x@y", "http://b.com/"])
        assert code == 1
        assert capsys.readouterr().out == "com,a)/\ncom,b)/\n"


@pytest.fixture()
def aggregator_fixture(tmp_path, fom_full_compact):
    """Fixture dir whose aggregator response is the 64-memento TimeMap."""
    store = FixtureStore(tmp_path / "fixtures")
    record = parse_compact(fom_full_compact, URIR_FOM, registry=default_registry())
    body = serialize_linkformat(record).encode()
    store.save("GET", AGG.format(uri=URIR_FOM), TransportResponse(200, {}, body))
    return tmp_path / "fixtures"


def timemap_args(fixtures, *extra):
    return [
        "timemap", "--fixtures", str(fixtures), "--endpoint", AGG,
        "--interval", "0", *extra,
    ]


class TestTimemap:
    def test_yearly_compact_matches_filtered_fixture(
        self, aggregator_fixture, fom_yearly_compact, capsys
    ):
        code = main(timemap_args(aggregator_fixture, "--filter-yearly", "--compact", URIR_FOM))
        assert code == 0
        assert capsys.readouterr().out == fom_yearly_compact

    def test_unfiltered_compact_keeps_all(self, aggregator_fixture, fom_full_compact, capsys):
        code = main(timemap_args(aggregator_fixture, "--compact", URIR_FOM))
        assert code == 0
        assert capsys.readouterr().out == fom_full_compact

    def test_linkformat_output_default(self, aggregator_fixture, capsys):
        code = main(timemap_args(aggregator_fixture, URIR_FOM))
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith(f'<{URIR_FOM}>; rel="original"')
        assert out.count('rel="memento"') == 64

    def test_direct_archive_fetch(self, tmp_path, perma_timemap, capsys):
        store = FixtureStore(tmp_path)
        urir = "http://www.whitehouse.gov/"
        store.save(
            "GET",
            f"https://perma-archives.org/warc/timemap/*/{urir}",
            TransportResponse(200, {}, perma_timemap),
        )
        code = main(timemap_args(tmp_path, "--direct", "perma.cc", "--compact", urir))
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 57

    def test_empty_timemap_exit_three(self, tmp_path, capsys):
        store = FixtureStore(tmp_path)
        store.save("GET", AGG.format(uri="http://gone.example/"),
                   TransportResponse(404, {}, b""))
        code = main(timemap_args(tmp_path, "http://gone.example/"))
        assert code == 3
        assert "empty timemap" in capsys.readouterr().err

    def test_network_failure_exit_one(self, tmp_path, capsys):
        code = main(timemap_args(tmp_path, "http://unrecorded.example/"))
        assert code == 1


class TestStats:
    def test_published_dataset_reports(self, tmp_path, capsys):
        rows = build_published_manifest()
        manifest = tmp_path / "manifest.tsv"
        write_manifest(rows, manifest)
        out_dir = tmp_path / "reports"
        code = main(["stats", "--manifest", str(manifest), "--out", str(out_dir)])
        assert code == 0
        per_year = (out_dir / "urims-per-year.csv").read_text().splitlines()
        assert per_year[0].startswith("archive,total,1996,")
        assert per_year[-1].startswith("Total,16627,137,121,110,109,114,")
        assert per_year[-1].endswith(",926")
        totals = {
            line.split(",")[0]: line.split(",")[1:]
            for line in (out_dir / "archive-totals.csv").read_text().splitlines()[1:]
        }
        assert totals["web.archive.org"] == ["1566", "1566"]
        assert totals["perma.cc"] == ["175", "182"]
        assert totals["Total"] == ["3698", "16627"]
        histogram = dict(
            line.split(",")
            for line in (out_dir / "path-histogram.csv").read_text().splitlines()[1:]
        )
        assert histogram["s0"] == "1996"

    def test_empty_manifest_header_only(self, tmp_path):
        manifest = tmp_path / "empty.tsv"
        write_manifest([], manifest)
        out_dir = tmp_path / "reports"
        assert main(["stats", "--manifest", str(manifest), "--out", str(out_dir)]) == 0
        lines = (out_dir / "urims-per-year.csv").read_text().splitlines()
        assert lines[0].startswith("archive,total,1996")
        assert len(lines) == 2  # header + all-zero Total row

    def test_bad_manifest_exit_one(self, tmp_path, capsys):
        manifest = tmp_path / "bad.tsv"
        manifest.write_text("not a manifest\n")
        assert main(["stats", "--manifest", str(manifest), "--out", str(tmp_path)]) == 1

    def test_urir_table_enables_extra_reports(self, tmp_path):
        from mementoset.model import OriginalResource, PathBucket
        from mementoset.reports import write_urir_table

        manifest = tmp_path / "m.tsv"
        write_manifest([], manifest)
        urirs = tmp_path / "urirs.tsv"
        write_urir_table(
            [OriginalResource("http://a/", "a)/", "http://a/", PathBucket.S0, "moz", 200)],
            urirs,
        )
        out_dir = tmp_path / "reports"
        code = main([
            "stats", "--manifest", str(manifest), "--urirs", str(urirs),
            "--out", str(out_dir),
        ])
        assert code == 0
        assert (out_dir / "source-buckets.csv").exists()
        assert (out_dir / "live-status.csv").exists()


class TestDiscoverCommand:
    def test_end_to_end(self, tmp_path, capsys):
        fixtures_dir = tmp_path / "fixtures"
        build_fixture_corpus(fixtures_dir)
        config_path = write_config(tmp_path, fixtures_dir)
        code = main(["discover", "--config", str(config_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "discovery stopped at stage: done" in out
        assert "selected URI-Rs: 4" in out
        assert (tmp_path / "out" / "counts_method4.csv").exists()

    def test_missing_config(self, capsys, monkeypatch):
        monkeypatch.delenv("MEMENTOSET_CONFIG", raising=False)
        assert main(["discover"]) == 2

    def test_config_from_env(self, tmp_path, capsys, monkeypatch):
        fixtures_dir = tmp_path / "fixtures"
        build_fixture_corpus(fixtures_dir)
        config_path = write_config(tmp_path, fixtures_dir, out_name="envout")
        monkeypatch.setenv("MEMENTOSET_CONFIG", str(config_path))
        assert main(["discover"]) == 0
        assert (tmp_path / "envout" / "state.json").exists()
