import argparse
from pathlib import Path

from ..cli import COMMANDS
from .config import settings


def create_application() -> argparse.ArgumentParser:
    """Build the `crvae` argument parser: global flags plus one subparser per command."""
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Complex recurrent VAE for STFT-domain speech enhancement.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    parser.add_argument("--config", type=Path, default=None, help="run configuration file (key = value lines)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--verbose", action="store_true", help="debug-level console logging")

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        command.register(subparsers)
    return parser
