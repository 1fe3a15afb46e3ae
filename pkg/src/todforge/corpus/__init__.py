from . import grammar
from .instructions import InstructionBlock, render_instructions
from .io import read_corpus, write_corpus
from .schema_mgmt import SchemaRegistry, schema_emissions
from .serialize import Segment, TrainingSample, serialize_session, turn_plan
from .stats import CorpusStats, corpus_stats

__all__ = [
    "grammar",
    "InstructionBlock",
    "render_instructions",
    "read_corpus",
    "write_corpus",
    "SchemaRegistry",
    "schema_emissions",
    "Segment",
    "TrainingSample",
    "serialize_session",
    "turn_plan",
    "CorpusStats",
    "corpus_stats",
]
