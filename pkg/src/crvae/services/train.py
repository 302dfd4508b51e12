"""Training loop: Adam with unitarity projection, dev-loss early stopping, checkpoints and a metrics log."""

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from ..core.exceptions import ConfigError
from ..engine.checkpoint import Checkpoint, TrainingState, save_checkpoint
from ..engine.cvae import LossBreakdown
from ..engine.model import CrvaeModel
from ..engine.optim import AdamMoments, adam_step
from ..schemas.config import RunConfig
from .dataset import TrainingData

logger = structlog.get_logger(__name__)

# seed stream of the frozen dev-set noise
DEV_STREAM = 7


@dataclass(slots=True)
class TrainResult:
    epochs: int
    best_dev_loss: float
    stopped_early: bool


def make_checkpoint(
    model: CrvaeModel, config: RunConfig, state: TrainingState, moments: AdamMoments
) -> Checkpoint:
    optimizer: OrderedDict[str, np.ndarray] = OrderedDict()
    for name in model.named_parameters():
        optimizer[f"m/{name}"] = moments.m[name].copy()
    for name in model.named_parameters():
        optimizer[f"v/{name}"] = moments.v[name].copy()
    return Checkpoint(
        model=config.model,
        train=config.train,
        dsp=config.dsp,
        state=state.model_copy(deep=True),
        tensors=OrderedDict((name, t.copy()) for name, t in model.named_parameters().items()),
        optimizer=optimizer,
    )


def restore_moments(ckpt: Checkpoint, model: CrvaeModel) -> AdamMoments:
    moments = AdamMoments.zeros_like(model.named_parameters())
    for name, tensor in model.named_parameters().items():
        for kind, store in (("m", moments.m), ("v", moments.v)):
            key = f"{kind}/{name}"
            if key not in ckpt.optimizer or ckpt.optimizer[key].shape != tensor.shape:
                raise ConfigError(f"checkpoint optimizer state is missing or mis-shaped for {name}")
            value = ckpt.optimizer[key]
            store[name][...] = value if np.iscomplexobj(tensor) else value.real
    return moments


def _batch(data: TrainingData, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Time-major (segment_len, B, step_dim) views of the selected segments."""
    return data.noisy[index].transpose(1, 0, 2), data.clean[index].transpose(1, 0, 2)


def evaluate_loss(model: CrvaeModel, data: TrainingData, config: RunConfig) -> LossBreakdown:
    """Mean per-step loss over a split, with latent noise drawn from a fixed seed."""
    rng = np.random.default_rng([config.seed, DEV_STREAM])
    total = LossBreakdown()
    size = config.train.batch_size
    for start in range(0, len(data), size):
        index = np.arange(start, min(start + size, len(data)))
        noisy, clean = _batch(data, index)
        _, _, loss = model.forward_step(noisy, rng, target=clean)
        total = total + loss.scaled(len(index))
    return total.scaled(1.0 / max(len(data), 1))


def _metrics_line(epoch: int, train: LossBreakdown, dev: LossBreakdown) -> str:
    values = (train.rec_real, train.rec_imag, train.rec_mag, train.kl, train.total, dev.total)
    return f"{epoch}\t" + "\t".join(f"{v:.6f}" for v in values) + "\n"


def _truncate_metrics(path: Path, epochs: int) -> None:
    if not path.exists():
        return
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    path.write_text("".join(lines[:epochs]), encoding="utf-8")


def train_loop(
    model: CrvaeModel,
    train_data: TrainingData,
    dev_data: TrainingData,
    config: RunConfig,
    resume: Checkpoint | None = None,
) -> TrainResult:
    if len(train_data) == 0:
        raise ConfigError("training set is empty")
    if len(dev_data) == 0:
        raise ConfigError("dev set is empty")

    paths, train_cfg = config.paths, config.train
    paths.run_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    if resume is not None:
        resume.check_compatible(config)
        model.load_state(resume.tensors)
        moments = restore_moments(resume, model)
        state = resume.state.model_copy(deep=True)
        rng.bit_generator.state = state.rng_state
        _truncate_metrics(paths.metrics_log, state.epoch)
        logger.info("Resuming training", epoch=state.epoch, step=state.step, best_dev_loss=state.best_dev_loss)
    else:
        moments = AdamMoments.zeros_like(model.named_parameters())
        state = TrainingState(rng_state=rng.bit_generator.state)
        paths.metrics_log.write_text("", encoding="utf-8")

    params = model.named_parameters()
    constrained = model.constrained_names()
    snapshot = make_checkpoint(model, config, state, moments)

    try:
        while state.epoch < train_cfg.max_epochs:
            if state.best_dev_loss is not None and state.epochs_since_best >= train_cfg.patience_epochs:
                break
            epoch = state.epoch + 1
            structlog.contextvars.bind_contextvars(epoch=epoch)

            order = rng.permutation(len(train_data))
            running = LossBreakdown()
            for start in range(0, len(order), train_cfg.batch_size):
                index = order[start : start + train_cfg.batch_size]
                noisy, clean = _batch(train_data, index)
                latent_shape = (noisy.shape[0], noisy.shape[1], config.model.latent_dim)
                eps_r = rng.standard_normal(latent_shape)
                eps_i = rng.standard_normal(latent_shape)
                loss, grads = model.loss_and_grads(noisy, clean, eps_r, eps_i)
                state.step += 1
                adam_step(params, grads, moments, state.step, train_cfg, constrained)
                running = running + loss.scaled(len(index))

            train_loss = running.scaled(1.0 / len(train_data))
            dev_loss = evaluate_loss(model, dev_data, config)
            improved = state.best_dev_loss is None or dev_loss.total < state.best_dev_loss
            state.epoch = epoch
            state.rng_state = rng.bit_generator.state
            if improved:
                state.best_dev_loss = dev_loss.total
                state.epochs_since_best = 0
                save_checkpoint(paths.best_checkpoint, make_checkpoint(model, config, state, moments))
            else:
                state.epochs_since_best += 1

            with paths.metrics_log.open("a", encoding="utf-8") as log:
                log.write(_metrics_line(epoch, train_loss, dev_loss))
            snapshot = make_checkpoint(model, config, state, moments)
            save_checkpoint(paths.last_checkpoint, snapshot)

            logger.info(
                "Epoch finished",
                train_loss=round(train_loss.total, 6),
                dev_loss=round(dev_loss.total, 6),
                best_dev_loss=round(state.best_dev_loss, 6),
                improved=improved,
            )
    except KeyboardInterrupt:
        # state as of the last completed epoch
        save_checkpoint(paths.last_checkpoint, snapshot)
        logger.warning("Training interrupted; last checkpoint written", epoch=snapshot.state.epoch)
        raise
    finally:
        structlog.contextvars.unbind_contextvars("epoch")

    stopped_early = state.epoch < train_cfg.max_epochs
    logger.info("Training finished", epochs=state.epoch, best_dev_loss=state.best_dev_loss, early_stop=stopped_early)
    return TrainResult(
        epochs=state.epoch,
        best_dev_loss=float(state.best_dev_loss if state.best_dev_loss is not None else np.inf),
        stopped_early=stopped_early,
    )
