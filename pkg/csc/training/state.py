from __future__ import annotations

from dataclasses import dataclass, field

from csc.autodiff.tensor import Tensor
from csc.config import RunConfig
from csc.network.separator import SeparativeCodingModel
from csc.objectives.bank import AlphaParam, GlobalSpeakerBank
from csc.simulation.base import derive_seed
from csc.training.optimizer import Adam

_MODEL_STREAM = 11
_BANK_STREAM = 12


@dataclass
class TrainingState:
    """Everything a resumed run needs: weights, bank, optimizer moments and counters."""

    config: RunConfig
    model: SeparativeCodingModel
    bank: GlobalSpeakerBank
    alpha: AlphaParam
    optimizer: Adam
    epoch: int = 0
    pit_history: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def zero_grad(self) -> None:
        self.optimizer.zero_grad()


def trainable_parameters(model: SeparativeCodingModel, bank: GlobalSpeakerBank, alpha: AlphaParam) -> dict[str, Tensor]:
    named: dict[str, Tensor] = {}
    for prefix, module in (("model", model), ("bank", bank), ("alpha", alpha)):
        for name, tensor in module.named_parameters(prefix=f"{prefix}."):
            named[name] = tensor
    return named


def build_training_state(config: RunConfig) -> TrainingState:
    """Fresh state; initialisation depends only on the training seed and model shape."""
    seed = config.train.seed
    model = SeparativeCodingModel(config.model, config.corpus.sources, derive_seed(seed, _MODEL_STREAM))
    bank = GlobalSpeakerBank(config.corpus.train_speakers, config.model.feature_dim, derive_seed(seed, _BANK_STREAM))
    alpha = AlphaParam(config.model.alpha_init)
    optimizer = Adam(
        trainable_parameters(model, bank, alpha),
        lr=config.train.lr,
        beta1=config.train.beta1,
        beta2=config.train.beta2,
        eps=config.train.eps,
    )
    return TrainingState(config=config, model=model, bank=bank, alpha=alpha, optimizer=optimizer)


__all__ = ["TrainingState", "build_training_state", "trainable_parameters"]
