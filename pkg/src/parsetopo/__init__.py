"""Topological quality of grammar parse trees against protein contact maps."""

from .contacts import (
    ContactMap,
    PairSets,
    build_pair_sets,
    extract_from_pdb,
    format_contact_list,
    load_contact_list,
)
from .errors import (
    BracketSyntaxError,
    ContactError,
    EmptyPairClassError,
    GrammarError,
    ParsetopoError,
    SequenceError,
    UndefinedMeasureError,
)
from .measures import (
    TopologyReport,
    classification_metrics,
    d1,
    evaluate,
    local_measures,
    mean_class_distances,
    r1,
    s1,
    weighted_measures,
)
from .nullmodel import BaselineSummary, baseline_distribution, random_binary_tree
from .pcfg import (
    Pcfg,
    ViterbiResult,
    batch_score,
    inside_logprob,
    load_grammar,
    map_sequence,
    viterbi_parse,
)
from .tree import (
    ParseTree,
    leaf_distance,
    leaf_distance_matrix,
    parse_bracket,
    serialize_bracket,
    weighted_leaf_distance,
    weighted_leaf_distance_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ContactMap",
    "PairSets",
    "build_pair_sets",
    "extract_from_pdb",
    "format_contact_list",
    "load_contact_list",
    "BracketSyntaxError",
    "ContactError",
    "EmptyPairClassError",
    "GrammarError",
    "ParsetopoError",
    "SequenceError",
    "UndefinedMeasureError",
    "TopologyReport",
    "classification_metrics",
    "d1",
    "evaluate",
    "local_measures",
    "mean_class_distances",
    "r1",
    "s1",
    "weighted_measures",
    "BaselineSummary",
    "baseline_distribution",
    "random_binary_tree",
    "Pcfg",
    "ViterbiResult",
    "batch_score",
    "inside_logprob",
    "load_grammar",
    "map_sequence",
    "viterbi_parse",
    "ParseTree",
    "leaf_distance",
    "leaf_distance_matrix",
    "parse_bracket",
    "serialize_bracket",
    "weighted_leaf_distance",
    "weighted_leaf_distance_matrix",
]
