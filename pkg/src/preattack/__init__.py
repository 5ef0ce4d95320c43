"""Multi-class preferential-attachment classifiers for new-account fake detection."""

from .graph_core import (
    FAKE,
    REAL,
    Direction,
    EdgeEvent,
    EdgeStream,
    FormatError,
    LabeledNetwork,
    ingest_network,
    ingest_stream,
    write_labels,
    write_stream,
)
from .kcdpa_sim import ActivityDistribution, AlphaSpec, SimConfig, sample_labels, sample_stream
from .pa_tables import PATable, build_homophily_table, build_plusplus_table, build_preattack_table
from .classifier import PosteriorReport, classify, classify_multiclass, classify_prefixes
from .bounds import BoundReport, compute_bounds
from .oracle import ExactPosterior, exact_posterior, sequence_log_prob

__version__ = "0.1.0"
