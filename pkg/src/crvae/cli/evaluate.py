import argparse
from pathlib import Path

import structlog
from rich.console import Console

from ..core.exceptions import AlignmentError
from ..schemas.config import RunConfig
from ..schemas.corpus import load_mixtures
from ..services.evaluate import evaluate_corpus, render_report, render_summary, summarize_runs, write_report

logger = structlog.get_logger(__name__)

NAME = "evaluate"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="score enhanced files against clean references")
    parser.add_argument("ref_dir", type=Path, help="clean reference WAV directory")
    parser.add_argument("est_dirs", type=Path, nargs="+", help="enhanced WAV directory, one per repeated run")
    parser.add_argument("--noisy-dir", type=Path, default=None, help="default: <corpus_dir>/test/noisy")
    parser.add_argument("--mixtures", type=Path, default=None, help="default: <corpus_dir>/test/mixtures.tsv")
    parser.add_argument("--report", type=Path, default=None, help="default: paths.run_dir/report.tsv")
    parser.set_defaults(handler=run)


def _report_path(base: Path, run: int, runs: int) -> Path:
    return base if runs == 1 else base.with_name(f"{base.stem}_run{run}{base.suffix}")


def run(args: argparse.Namespace, config: RunConfig) -> int:
    test_dir = config.paths.corpus_dir / "test"
    noisy_dir = args.noisy_dir or test_dir / "noisy"
    mixtures = load_mixtures(args.mixtures or test_dir / "mixtures.tsv")
    report_base = args.report or config.paths.report_path
    console = Console()

    reports, missing = [], []
    for run_index, est_dir in enumerate(args.est_dirs, start=1):
        report = evaluate_corpus(args.ref_dir, est_dir, noisy_dir, mixtures, config.data.test_snrs)
        path = _report_path(report_base, run_index, len(args.est_dirs))
        write_report(report, path)
        logger.info("Report written", path=str(path), items=len(report.items))
        render_report(report, console, averages_only=True)
        reports.append(report)
        missing.extend(report.missing)

    if len(reports) > 1:
        render_summary(summarize_runs(reports), console)
    if missing:
        raise AlignmentError(f"{len(missing)} items have no reference/estimate pair: {', '.join(missing)}", missing)
    return 0
