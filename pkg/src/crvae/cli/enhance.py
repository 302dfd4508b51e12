import argparse
from pathlib import Path

from ..schemas.config import RunConfig
from ..services.enhance import enhance_paths, load_model

NAME = "enhance"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="enhance a noisy WAV file or a directory of them")
    parser.add_argument("input", type=Path, help="noisy WAV file or directory")
    parser.add_argument("out_dir", type=Path, help="directory for the enhanced WAV files")
    parser.add_argument("--checkpoint", type=Path, default=None, help="default: paths.run_dir/best.ckpt")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(config, args.checkpoint)
    enhance_paths(model, config, args.input, args.out_dir)
    return 0
