import argparse

import numpy as np
import structlog

from ..engine.checkpoint import load_checkpoint
from ..engine.model import CrvaeModel
from ..schemas.config import RunConfig
from ..schemas.corpus import CorpusManifest
from ..services.dataset import prepare_training_data
from ..services.train import train_loop

logger = structlog.get_logger(__name__)

NAME = "train"
# seed stream of the weight initialization
INIT_STREAM = 11


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="train a model on the corpus named by the config")
    parser.add_argument("--resume", action="store_true", help="continue from paths.run_dir/last.ckpt")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: RunConfig) -> int:
    manifest = CorpusManifest.load(config.paths.manifest_path)
    resume = load_checkpoint(config.paths.last_checkpoint) if args.resume else None
    if resume is not None:
        resume.check_compatible(config)

    train_data, dev_data = prepare_training_data(config, manifest)
    model = CrvaeModel.initialize(config.model, np.random.default_rng([config.seed, INIT_STREAM]))
    logger.info(
        "Model initialized",
        arch=config.model.arch.value,
        parameters=model.num_parameters(),
        train_segments=len(train_data),
        dev_segments=len(dev_data),
    )

    config.paths.run_dir.mkdir(parents=True, exist_ok=True)
    (config.paths.run_dir / "config.conf").write_text(config.to_text(), encoding="utf-8")
    result = train_loop(model, train_data, dev_data, config, resume=resume)
    logger.info("Best checkpoint", path=str(config.paths.best_checkpoint), dev_loss=result.best_dev_loss)
    return 0
