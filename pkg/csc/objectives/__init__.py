from csc.objectives.bank import AlphaParam, GatedAggregator, GlobalSpeakerBank, update_speaker_bank
from csc.objectives.contrastive import (
    csc_loss,
    decomposition_paths,
    density_score,
    infonce_loss,
    norm_cancellation,
    reg_loss,
    rescaling_identity,
)
from csc.objectives.pit import upit_assign
from csc.objectives.si_snr import si_snr, si_snr_improvement, si_snr_value

__all__ = [
    "AlphaParam",
    "GatedAggregator",
    "GlobalSpeakerBank",
    "csc_loss",
    "decomposition_paths",
    "density_score",
    "infonce_loss",
    "norm_cancellation",
    "reg_loss",
    "rescaling_identity",
    "si_snr",
    "si_snr_improvement",
    "si_snr_value",
    "update_speaker_bank",
    "upit_assign",
]
