"""Ablation variants that swap one component and keep corpus and seeds fixed."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence, TextIO

from common.logging import get_logger
from csc.config import RunConfig, write_effective_config
from csc.evaluation.trials import evaluate, write_trials
from csc.exceptions import ConfigurationError
from csc.simulation.corpus import Corpus
from csc.training.metrics_sink import JsonlMetricsSink
from csc.training.trainer import train, validation_si_snri

logger = get_logger("csc.ablation")

ABLATION_NAME = "ablation.csv"
ABLATION_COLUMNS = ("variant", "eer", "auc", "final_si_snr")


class LossKind(str, Enum):
    CSC = "csc"
    INFONCE = "infonce"


class PoolKind(str, Enum):
    CROSS_ATTENTION = "attention"
    MEAN = "mean"


@dataclass(frozen=True)
class AblationVariant:
    name: str
    loss: LossKind
    pool: PoolKind

    def apply(self, config: RunConfig) -> RunConfig:
        return config.model_copy(
            update={
                "model": config.model.model_copy(update={"pooling": self.pool.value}),
                "train": config.train.model_copy(update={"contrastive_loss": self.loss.value}),
            }
        )


VARIANTS: dict[str, AblationVariant] = {
    "csc": AblationVariant("csc", LossKind.CSC, PoolKind.CROSS_ATTENTION),
    "infonce": AblationVariant("infonce", LossKind.INFONCE, PoolKind.CROSS_ATTENTION),
    "meanpool": AblationVariant("meanpool", LossKind.CSC, PoolKind.MEAN),
}


@dataclass(frozen=True)
class AblationRow:
    variant: str
    eer: float
    auc: float
    final_si_snr: float | None

    def csv_fields(self) -> list[str]:
        return [self.variant, repr(self.eer), repr(self.auc), "" if self.final_si_snr is None else repr(self.final_si_snr)]


def write_ablation_csv(rows: Sequence[AblationRow], handle: TextIO) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(ABLATION_COLUMNS)
    writer.writerows(row.csv_fields() for row in rows)


def parse_variants(raw: str) -> list[AblationVariant]:
    names = [name.strip() for name in raw.split(",") if name.strip()]
    if not names:
        raise ConfigurationError("--ablate needs at least one variant")
    unknown = [name for name in names if name not in VARIANTS]
    if unknown:
        raise ConfigurationError(f"unknown ablation variants {unknown}; choose from {sorted(VARIANTS)}")
    return [VARIANTS[name] for name in names]


def run_ablation(
    config: RunConfig, variants: Sequence[AblationVariant], corpus: Corpus, output_dir: str | Path
) -> list[AblationRow]:
    """Train and evaluate every variant on the same corpus and seeds; write ``ablation.csv``."""

    root = Path(output_dir)
    rows: list[AblationRow] = []
    validation = list(corpus.examples("validation"))
    for variant in variants:
        variant_config = variant.apply(config)
        variant_dir = root / variant.name
        write_effective_config(variant_config, variant_dir)
        state = train(
            variant_config,
            corpus,
            JsonlMetricsSink(variant_dir),
            checkpoint_root=variant_dir / "checkpoints",
        )
        trial_set, curve, summary = evaluate(corpus, state.model, state.bank.aggregator, variant_config.eval)
        write_trials(trial_set, curve, summary, variant_dir / "eval")
        rows.append(
            AblationRow(
                variant=variant.name,
                eer=summary.eer,
                auc=summary.auc,
                final_si_snr=validation_si_snri(state, validation),
            )
        )
        logger.info(
            "ablation variant finished",
            extra={"event": "csc.ablation.variant", "context": {"variant": variant.name, "eer": summary.eer}},
        )

    root.mkdir(parents=True, exist_ok=True)
    with (root / ABLATION_NAME).open("w", newline="", encoding="utf-8") as handle:
        write_ablation_csv(rows, handle)
    return rows


__all__ = [
    "ABLATION_COLUMNS",
    "ABLATION_NAME",
    "VARIANTS",
    "AblationRow",
    "AblationVariant",
    "LossKind",
    "PoolKind",
    "parse_variants",
    "run_ablation",
    "write_ablation_csv",
]
