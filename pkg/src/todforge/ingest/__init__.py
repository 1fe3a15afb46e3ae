from .bundle import CorpusBundle, read_bundle, validate_bundle, write_bundle
from .fixtures import FIXTURE_DOMAINS, synth_fixtures
from .sgd import adapt_schema_guided

__all__ = [
    "CorpusBundle",
    "read_bundle",
    "validate_bundle",
    "write_bundle",
    "FIXTURE_DOMAINS",
    "synth_fixtures",
    "adapt_schema_guided",
]
