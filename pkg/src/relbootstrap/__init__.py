"""relbootstrap: bootstrap multilingual relation-classification datasets.

Distant-supervised harvesting, embedding-similarity noise filtering, marker
markup, translated silver data with fuzzy span projection, cross-lingual
transfer scenarios, a deterministic pooled-embedding probe classifier, and a
human review service.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    ENTITY_TYPES,
    EntityMention,
    Instance,
    Provenance,
    RelationLabel,
    read_records,
    validate_instance,
    write_records,
)
from .markup import MarkupScheme, lexical_distance, parse_markup, render_markup  # noqa: F401
from .silver import batch_silver, levenshtein_distance, make_silver, project_spans  # noqa: F401
from .scenarios import (  # noqa: F401
    ScenarioSpec,
    SplitSpec,
    assemble_scenario,
    few_shot_sample,
    split_gold,
)
from .probe import PooledSummary, TokenEmbeddings, ensemble_per_relation, pool, predict, train  # noqa: F401
from .metrics import evaluate, lexical_profile, pairwise_agreement, render_transfer_matrix  # noqa: F401
