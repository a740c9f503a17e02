from csc.simulation.corpus import Corpus, build_corpus, build_manifest, load_corpus, write_corpus
from csc.simulation.mixing import mix_at_sir, mix_sources
from csc.simulation.speakers import make_speaker, render_utterance

__all__ = [
    "Corpus",
    "build_corpus",
    "build_manifest",
    "load_corpus",
    "make_speaker",
    "mix_at_sir",
    "mix_sources",
    "render_utterance",
    "write_corpus",
]
