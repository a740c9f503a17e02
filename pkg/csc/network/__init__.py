from csc.network.attention import CrossAttention, MeanPool, attend_pool, attention_map
from csc.network.blocks import BlockStack, SequenceBlock, sequence_block_forward
from csc.network.encoder import WaveformDecoder, WaveformEncoder, encode_waveform
from csc.network.film import FiLM, film_modulate
from csc.network.module import Linear, Module
from csc.network.separator import SeparationOutput, SeparativeCodingModel, separate

__all__ = [
    "BlockStack",
    "CrossAttention",
    "FiLM",
    "Linear",
    "MeanPool",
    "Module",
    "SeparationOutput",
    "SeparativeCodingModel",
    "SequenceBlock",
    "WaveformDecoder",
    "WaveformEncoder",
    "attend_pool",
    "attention_map",
    "encode_waveform",
    "film_modulate",
    "separate",
    "sequence_block_forward",
]
