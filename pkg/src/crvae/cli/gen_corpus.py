import argparse
from pathlib import Path

import structlog

from ..schemas.config import RunConfig
from ..services.corpus import generate_toy_corpus

logger = structlog.get_logger(__name__)

NAME = "gen-corpus"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="synthesize the toy speech/noise corpus and its test mixtures")
    parser.add_argument("--out-dir", type=Path, default=None, help="corpus root (default: paths.corpus_dir)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: RunConfig) -> int:
    manifest = generate_toy_corpus(config, args.out_dir)
    logger.info("Corpus ready", root=str(manifest.root), entries=len(manifest.entries))
    return 0
