"""Corpus-level evaluation: per-item ESTOI and SI-SDR, aggregated per noise type and SNR."""

from collections import OrderedDict
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import structlog
from rich.console import Console
from rich.table import Table

from ..audio.metrics import estoi, si_sdr
from ..audio.wav import read_wav
from ..core.exceptions import AlignmentError
from ..core.utils.pool import parallel_map
from ..schemas.corpus import MixtureRecord
from ..schemas.report import (
    AVERAGE_ROW,
    METRIC_COLUMNS,
    ItemScore,
    MetricReport,
    MetricStats,
    NoiseGroup,
    ReportRow,
    RunSummaryRow,
    SnrAggregate,
)

logger = structlog.get_logger(__name__)


def metric_stats(rows: Sequence[ItemScore | ReportRow]) -> MetricStats:
    """Mean and population standard deviation of every report column."""
    values = {column: np.array([getattr(row, column) for row in rows], dtype=np.float64) for column in METRIC_COLUMNS}
    return MetricStats(
        count=len(rows),
        mean={column: float(v.mean()) for column, v in values.items()},
        std={column: float(v.std()) for column, v in values.items()},
    )


def score_item(record: MixtureRecord, ref_dir: Path, est_dir: Path, noisy_dir: Path) -> ItemScore:
    name = f"{record.id}.wav"
    reference = read_wav(ref_dir / name)
    enhanced = read_wav(est_dir / name)
    noisy = read_wav(noisy_dir / name)
    return ItemScore(
        item_id=record.id,
        noise=record.noise_type,
        group=NoiseGroup.SEEN if record.seen else NoiseGroup.UNSEEN,
        snr_db=record.snr_db,
        estoi_noisy=estoi(reference, noisy),
        estoi_enhanced=estoi(reference, enhanced),
        si_sdr_noisy=si_sdr(reference, noisy),
        si_sdr_enhanced=si_sdr(reference, enhanced),
    )


def aggregate(items: list[ItemScore], missing: list[str] | None = None) -> MetricReport:
    """Per noise: mean over SNRs of the per-SNR means with the spread over all its items.

    AVE rows average the noise rows of each group; their spread is over those rows.
    """
    by_noise: OrderedDict[str, OrderedDict[int, list[ItemScore]]] = OrderedDict()
    groups: dict[str, NoiseGroup] = {}
    for item in items:
        by_noise.setdefault(item.noise, OrderedDict()).setdefault(item.snr_db, []).append(item)
        groups[item.noise] = item.group

    rows: list[ReportRow] = []
    by_snr: list[SnrAggregate] = []
    for noise, per_snr in by_noise.items():
        snr_means = []
        for snr, scored in per_snr.items():
            stats = metric_stats(scored)
            by_snr.append(SnrAggregate(noise=noise, snr_db=snr, stats=stats))
            snr_means.append(stats.mean)
        means = {column: float(np.mean([m[column] for m in snr_means])) for column in METRIC_COLUMNS}
        pooled = metric_stats([item for scored in per_snr.values() for item in scored])
        rows.append(ReportRow(group=groups[noise], noise=noise, std=pooled.std, **means))

    for group in NoiseGroup:
        members = [row for row in rows if row.group is group]
        if members:
            stats = metric_stats(members)
            rows.append(ReportRow(group=group, noise=AVERAGE_ROW, std=stats.std, **stats.mean))
    return MetricReport(items=items, rows=rows, by_snr=by_snr, missing=missing or [])


def evaluate_corpus(
    ref_dir: Path,
    est_dir: Path,
    noisy_dir: Path,
    mixtures: list[MixtureRecord],
    snrs: Iterable[int] | None = None,
) -> MetricReport:
    """Score every listed mixture present in all three directories; absent ones are reported as missing."""
    wanted = set(snrs) if snrs is not None else None
    records = [r for r in mixtures if wanted is None or r.snr_db in wanted]
    present, missing = [], []
    for record in records:
        name = f"{record.id}.wav"
        if all((Path(d) / name).is_file() for d in (ref_dir, est_dir, noisy_dir)):
            present.append(record)
        else:
            missing.append(record.id)
    if missing:
        logger.warning("Items missing from evaluation", count=len(missing), missing=missing[:10])
    if not present:
        raise AlignmentError("no aligned reference/estimate pairs to evaluate", missing)

    items = parallel_map(lambda r: score_item(r, Path(ref_dir), Path(est_dir), Path(noisy_dir)), present)
    logger.info("Evaluation finished", items=len(items), missing=len(missing))
    return aggregate(items, missing)


def write_report(report: MetricReport, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_tsv(), encoding="utf-8")


def render_report(report: MetricReport, console: Console | None = None, averages_only: bool = False) -> None:
    console = console or Console()
    table = Table(title="Speech enhancement metrics")
    for header in ("group", "noise", "ESTOI noisy", "ESTOI enhanced", "SI-SDR noisy", "SI-SDR enhanced"):
        table.add_column(header, justify="left" if header in ("group", "noise") else "right")
    for row in report.average_rows() if averages_only else report.rows:
        table.add_row(row.group.value, row.noise, *(row.cell(c) for c in METRIC_COLUMNS))
    console.print(table)


def summarize_runs(reports: Sequence[MetricReport]) -> list[RunSummaryRow]:
    """Mean and standard deviation of each report row across repeated runs."""
    if not reports:
        return []
    keyed: OrderedDict[tuple[NoiseGroup, str], list[ReportRow]] = OrderedDict()
    for report in reports:
        for row in report.rows:
            keyed.setdefault((row.group, row.noise), []).append(row)
    return [RunSummaryRow(group=group, noise=noise, stats=metric_stats(rows)) for (group, noise), rows in keyed.items()]


def render_summary(summary: list[RunSummaryRow], console: Console | None = None) -> None:
    console = console or Console()
    table = Table(title="Mean ± std over repeated runs")
    table.add_column("group")
    table.add_column("noise")
    for column in METRIC_COLUMNS:
        table.add_column(column, justify="right")
    for row in summary:
        cells = (f"{row.stats.mean[c]:.2f} ± {row.stats.std[c]:.2f}" for c in METRIC_COLUMNS)
        table.add_row(row.group.value, row.noise, *cells)
    console.print(table)
