"""Tests for corpus evaluation, report aggregation and the repeated-run summary."""

import shutil

import numpy as np
import pytest
from rich.console import Console

from crvae.core.exceptions import AlignmentError
from crvae.schemas.corpus import load_mixtures
from crvae.schemas.report import AVERAGE_ROW, REPORT_HEADER, ItemScore, NoiseGroup
from crvae.services.evaluate import aggregate, evaluate_corpus, render_report, summarize_runs, write_report


def item(noise: str, snr: int, value: float, group: NoiseGroup = NoiseGroup.SEEN) -> ItemScore:
    return ItemScore(
        item_id=f"{noise}_{snr}_{value}",
        noise=noise,
        group=group,
        snr_db=snr,
        estoi_noisy=value / 100,
        estoi_enhanced=value / 50,
        si_sdr_noisy=value,
        si_sdr_enhanced=2 * value,
    )


# ── aggregation ───────────────────────────────────────────────────────────────


def test_single_item_aggregates_to_itself():
    report = aggregate([item("white", 0, 3.0)])
    row = report.rows[0]
    assert (row.noise, row.si_sdr_noisy, row.estoi_enhanced) == ("white", 3.0, 0.06)
    assert report.by_snr[0].stats.std["si_sdr_noisy"] == 0.0
    assert [r.noise for r in report.rows] == ["white", AVERAGE_ROW]


def test_noise_rows_average_per_snr_means_then_groups_average_rows():
    items = [
        item("white", 0, 1.0),
        item("white", 0, 3.0),
        item("white", 6, 8.0),
        item("pink", 0, 4.0),
        item("babble", 0, -2.0, NoiseGroup.UNSEEN),
    ]
    report = aggregate(items)
    rows = {(r.group, r.noise): r for r in report.rows}
    assert [r.noise for r in report.rows] == ["white", "pink", "babble", AVERAGE_ROW, AVERAGE_ROW]
    assert rows[NoiseGroup.SEEN, "white"].si_sdr_noisy == pytest.approx((2.0 + 8.0) / 2)
    assert rows[NoiseGroup.SEEN, AVERAGE_ROW].si_sdr_noisy == pytest.approx((5.0 + 4.0) / 2)
    assert rows[NoiseGroup.UNSEEN, AVERAGE_ROW].si_sdr_enhanced == pytest.approx(-4.0)
    assert len(report.average_rows()) == 2


def test_report_tsv_schema(tmp_path):
    report = aggregate([item("white", 0, 1.234)])
    path = tmp_path / "out" / "report.tsv"
    write_report(report, path)
    lines = path.read_text().splitlines()
    assert lines[0] == REPORT_HEADER == (
        "group\tnoise\testoi_noisy\testoi_noisy_std\testoi_enhanced\testoi_enhanced_std"
        "\tsi_sdr_noisy\tsi_sdr_noisy_std\tsi_sdr_enhanced\tsi_sdr_enhanced_std"
    )
    assert lines[1] == "seen\twhite\t0.01\t0.00\t0.02\t0.00\t1.23\t0.00\t2.47\t0.00"
    assert lines[2].startswith("seen\tAVE\t")


def test_rows_carry_spread_into_tsv_and_table():
    items = [item("white", 0, 1.0), item("white", 0, 3.0), item("white", 6, 8.0), item("pink", 0, 4.0)]
    report = aggregate(items)
    white, pink, average_row = report.rows
    assert white.std["si_sdr_noisy"] == pytest.approx(np.std([1.0, 3.0, 8.0]))
    assert pink.std["si_sdr_enhanced"] == 0.0
    assert average_row.std["si_sdr_noisy"] == pytest.approx(0.5)

    fields = report.to_tsv().splitlines()[3].split("\t")
    assert len(fields) == len(REPORT_HEADER.split("\t"))
    assert fields[6:8] == ["4.50", "0.50"]

    console = Console(record=True, width=160)
    render_report(report, console)
    assert "4.50 ± 0.50" in console.export_text()


def test_rendering_lists_average_rows():
    console = Console(record=True, width=120)
    render_report(aggregate([item("white", 0, 1.0)]), console, averages_only=True)
    text = console.export_text()
    assert "AVE" in text and "white" not in text


def test_summary_across_runs_reports_mean_and_spread():
    runs = [aggregate([item("white", 0, v)]) for v in (1.0, 3.0)]
    summary = summarize_runs(runs)
    assert [(row.noise, row.stats.count) for row in summary] == [("white", 2), (AVERAGE_ROW, 2)]
    assert summary[0].stats.mean["si_sdr_noisy"] == pytest.approx(2.0)
    assert summary[0].stats.std["si_sdr_noisy"] == pytest.approx(1.0)
    assert summarize_runs([]) == []


# ── end to end on files ───────────────────────────────────────────────────────


def test_clean_against_itself_scores_perfectly(toy_corpus, tiny_config):
    test_dir = tiny_config.paths.corpus_dir / "test"
    mixtures = load_mixtures(test_dir / "mixtures.tsv")
    report = evaluate_corpus(test_dir / "clean", test_dir / "clean", test_dir / "noisy", mixtures)
    assert len(report.items) == len(mixtures)
    assert not report.missing
    for row in report.rows:
        assert row.estoi_enhanced == pytest.approx(1.0, abs=1e-6)
        assert row.si_sdr_enhanced == pytest.approx(100.0)
        assert row.si_sdr_enhanced > row.si_sdr_noisy
    assert {row.noise for row in report.rows} == {"white", "pink", "babble", AVERAGE_ROW}
    assert [r.group for r in report.average_rows()] == [NoiseGroup.SEEN, NoiseGroup.UNSEEN]


def test_noisy_input_scores_track_snr(toy_corpus, tiny_config):
    test_dir = tiny_config.paths.corpus_dir / "test"
    mixtures = load_mixtures(test_dir / "mixtures.tsv")
    report = evaluate_corpus(test_dir / "clean", test_dir / "noisy", test_dir / "noisy", mixtures)
    by_snr = {(agg.noise, agg.snr_db): agg.stats.mean["si_sdr_noisy"] for agg in report.by_snr}
    assert by_snr["white", 6] > by_snr["white", 0]


def test_missing_estimates_are_listed(toy_corpus, tiny_config, tmp_path):
    test_dir = tiny_config.paths.corpus_dir / "test"
    mixtures = load_mixtures(test_dir / "mixtures.tsv")
    partial = tmp_path / "partial"
    shutil.copytree(test_dir / "noisy", partial)
    (partial / f"{mixtures[0].id}.wav").unlink()

    report = evaluate_corpus(test_dir / "clean", partial, test_dir / "noisy", mixtures)
    assert report.missing == [mixtures[0].id]
    assert len(report.items) == len(mixtures) - 1

    with pytest.raises(AlignmentError) as excinfo:
        evaluate_corpus(test_dir / "clean", tmp_path / "nothing", test_dir / "noisy", mixtures)
    assert len(excinfo.value.missing) == len(mixtures)


def test_snr_filter(toy_corpus, tiny_config):
    test_dir = tiny_config.paths.corpus_dir / "test"
    mixtures = load_mixtures(test_dir / "mixtures.tsv")
    report = evaluate_corpus(test_dir / "clean", test_dir / "noisy", test_dir / "noisy", mixtures, snrs=[6])
    assert {i.snr_db for i in report.items} == {6}
