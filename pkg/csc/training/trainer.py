"""Epoch loop with the speech-to-speaker PIT switch, checkpointing and resumption."""

from __future__ import annotations

import time
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from common.logging import get_logger
from csc.autodiff import ops
from csc.autodiff.tensor import Tape, backward
from csc.config import RunConfig
from csc.exceptions import ConfigurationError, NonFiniteError, TrainingAbortedError
from csc.models import EpochSummary, ExampleRecord, MixtureExample, PitMode, StepMetrics
from csc.objectives.pit import upit_assign
from csc.objectives.si_snr import si_snr_improvement, si_snr_value
from csc.persistence import latest_checkpoint, load_checkpoint, save_checkpoint
from csc.simulation.corpus import Corpus
from csc.training.metrics_sink import MetricsSink, TrainingDiagnostic
from csc.training.objective import joint_loss
from csc.training.state import TrainingState, build_training_state

logger = get_logger("csc.train")

Clock = Callable[[], float]


def mode_for_epoch(epoch: int, switch_epoch: int) -> PitMode:
    """Epochs are 1-based; those before ``switch_epoch`` enumerate speech-loss permutations."""
    if epoch < 1 or switch_epoch < 1:
        raise ConfigurationError("epochs and the switch epoch are 1-based")
    return PitMode.SPEECH if epoch < switch_epoch else PitMode.SPEAKER


def epoch_order(records: Sequence[ExampleRecord], seed: int, epoch: int) -> list[ExampleRecord]:
    order = np.random.default_rng([seed, epoch]).permutation(len(records))
    return [records[int(index)] for index in order]


def validation_si_snri(state: TrainingState, examples: Sequence[MixtureExample]) -> float | None:
    """Mean SI-SNR improvement over the mixture, each estimate matched to its source by SI-SNR."""
    if not examples:
        return None
    gains: list[float] = []
    for example in examples:
        estimates = [estimate.numpy() for estimate in state.model(example.mixture).estimates]
        scores = np.array([[-si_snr_value(est, src) for src in example.sources] for est in estimates])
        permutation = upit_assign(scores).permutation
        for c, estimate in enumerate(estimates):
            gains.append(si_snr_improvement(estimate, example.sources[permutation[c]], example.mixture))
    return float(np.mean(gains))


class Trainer:
    """Runs the joint objective over the training split.

    Each example gets its own tape; gradients of ``total / batch`` accumulate
    over the batch before one Adam step. Embeddings are folded into the
    speaker bank after the step, in example order.
    """

    def __init__(
        self,
        state: TrainingState,
        corpus: Corpus,
        sink: MetricsSink,
        *,
        checkpoint_root: str | Path | None = None,
        clock: Clock = time.perf_counter,
    ) -> None:
        manifest = corpus.manifest
        if manifest.sources != state.config.corpus.sources:
            raise ConfigurationError(
                f"corpus mixes {manifest.sources} sources but the model separates {state.config.corpus.sources}"
            )
        if len(corpus.train_speaker_ids) != state.bank.num_speakers:
            raise ConfigurationError(
                f"corpus has {len(corpus.train_speaker_ids)} training speakers, bank holds {state.bank.num_speakers}"
            )
        self.state = state
        self._corpus = corpus
        self._sink = sink
        self._checkpoint_root = Path(checkpoint_root) if checkpoint_root is not None else None
        self._clock = clock
        self._train_records = corpus.records("train")
        self._validation: list[MixtureExample] | None = None
        if not self._train_records:
            raise ConfigurationError("the corpus has no training examples")

    @classmethod
    def resume(
        cls,
        corpus: Corpus,
        sink: MetricsSink,
        checkpoint_root: str | Path,
        *,
        fallback: TrainingState,
        clock: Clock = time.perf_counter,
    ) -> "Trainer":
        """Continue from the newest checkpoint under ``checkpoint_root``, or start from ``fallback``."""
        latest = latest_checkpoint(checkpoint_root)
        state = fallback if latest is None else load_checkpoint(latest, config=fallback.config)
        if latest is not None:
            logger.info(
                "resuming from checkpoint",
                extra={"event": "csc.train.resumed", "epoch": state.epoch, "context": {"path": str(latest)}},
            )
        truncate = getattr(sink, "truncate_after", None)
        if callable(truncate):
            truncate(state.epoch)
        return cls(state, corpus, sink, checkpoint_root=checkpoint_root, clock=clock)

    def _validation_examples(self) -> list[MixtureExample]:
        if self._validation is None:
            self._validation = list(self._corpus.examples("validation"))
        return self._validation

    def run(self) -> TrainingState:
        config = self.state.config.train
        for epoch in range(self.state.epoch + 1, config.epochs + 1):
            self.train_epoch(epoch)
        return self.state

    def train_epoch(self, epoch: int) -> EpochSummary:
        config = self.state.config.train
        mode = mode_for_epoch(epoch, config.pit_switch_epoch)
        records = epoch_order(self._train_records, config.seed, epoch)
        steps: list[StepMetrics] = []
        for step, start in enumerate(range(0, len(records), config.batch_size), start=1):
            batch = records[start : start + config.batch_size]
            steps.append(self._train_step(epoch, step, mode, batch))

        summary = EpochSummary(
            epoch=epoch,
            mode=mode,
            steps=len(steps),
            mean_si_snr_loss=float(np.mean([s.si_snr_loss for s in steps])),
            mean_csc_loss=float(np.mean([s.csc_loss for s in steps])),
            mean_reg_loss=float(np.mean([s.reg_loss for s in steps])),
            mean_total=float(np.mean([s.total for s in steps])),
            validation_si_snri_db=validation_si_snri(self.state, self._validation_examples()),
            mean_step_ms=float(np.mean([s.wall_ms for s in steps])),
        )
        self._sink.write_epoch(summary)
        self.state.epoch = epoch
        if self._checkpoint_root is not None:
            save_checkpoint(self.state, self._checkpoint_root)
        logger.info(
            "epoch finished",
            extra={
                "event": "csc.train.epoch_end",
                "epoch": epoch,
                "context": {
                    "mode": mode.value,
                    "mean_total": summary.mean_total,
                    "validation_si_snri_db": summary.validation_si_snri_db,
                    "alpha": self.state.alpha.item(),
                },
            },
        )
        return summary

    def _abort(
        self, epoch: int, step: int, example_id: str, reason: str, values: dict[str, float]
    ) -> TrainingAbortedError:
        self._sink.write_diagnostic(
            TrainingDiagnostic(epoch=epoch, step=step, example_id=example_id, reason=reason, values=values)
        )
        logger.error(
            "training aborted",
            extra={
                "event": "csc.train.aborted",
                "epoch": epoch,
                "step": step,
                "context": {"example_id": example_id, "reason": reason},
            },
        )
        return TrainingAbortedError(
            f"training aborted at epoch {epoch} step {step} ({example_id}): {reason}",
            epoch=epoch,
            step=step,
            example_id=example_id,
        )

    def _train_step(self, epoch: int, step: int, mode: PitMode, batch: Sequence[ExampleRecord]) -> StepMetrics:
        state = self.state
        config = state.config.train
        started = self._clock()
        state.zero_grad()

        totals = {"si_snr_loss": 0.0, "csc_loss": 0.0, "reg_loss": 0.0, "total": 0.0}
        commits: list[tuple[np.ndarray, int]] = []
        changed = 0
        evaluations = 0
        for record in batch:
            values: dict[str, float] = {}
            try:
                example = self._corpus.example(record)
                with Tape() as tape:
                    result = joint_loss(
                        example,
                        state.model,
                        state.bank,
                        state.alpha,
                        mode,
                        lam=config.lam,
                        contrastive=config.contrastive_loss,
                    )
                    values = result.values()
                    scaled = ops.scale(result.total, 1.0 / len(batch))
                backward(scaled, tape)
            except (NonFiniteError, FloatingPointError) as exc:
                raise self._abort(epoch, step, record.example_id, str(exc), values) from exc

            for key in totals:
                totals[key] += values[key] / len(batch)
            previous = state.pit_history.get(record.example_id)
            permutation = result.assignment.permutation
            if previous is not None and previous != permutation:
                changed += 1
            state.pit_history[record.example_id] = permutation
            evaluations += result.permutation_evaluations
            commits.extend((z.numpy(), speaker_id) for z, speaker_id in result.labelled_embeddings)

        try:
            state.optimizer.step()
        except NonFiniteError as exc:
            raise self._abort(epoch, step, batch[-1].example_id, str(exc), totals) from exc
        for embedding, speaker_id in commits:
            state.bank.commit(embedding, speaker_id)
        state.bank.check_rows()

        metrics = StepMetrics(
            epoch=epoch,
            step=step,
            mode=mode,
            si_snr_loss=totals["si_snr_loss"],
            csc_loss=totals["csc_loss"],
            reg_loss=totals["reg_loss"],
            total=totals["total"],
            pi_changed=changed,
            wall_ms=(self._clock() - started) * 1000.0,
            permutation_evaluations=evaluations,
        )
        self._sink.write_step(metrics)
        return metrics


def train(
    config: RunConfig,
    corpus: Corpus,
    sink: MetricsSink,
    *,
    checkpoint_root: str | Path | None = None,
    resume: bool = False,
) -> TrainingState:
    """Train from scratch, or from the newest checkpoint when ``resume`` is set."""
    fresh = build_training_state(config)
    if resume and checkpoint_root is not None:
        trainer = Trainer.resume(corpus, sink, checkpoint_root, fallback=fresh)
    else:
        trainer = Trainer(fresh, corpus, sink, checkpoint_root=checkpoint_root)
    return trainer.run()


__all__ = ["Trainer", "epoch_order", "mode_for_epoch", "train", "validation_si_snri"]
