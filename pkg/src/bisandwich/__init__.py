"""Random biregular bipartite graphs: exact enumeration, samplers, the
edge-process coupling with binomial random graphs, and pseudorandomness
verifiers."""

from .core import (
    BLUE,
    RED,
    AltWalk,
    BiregularParams,
    BipartiteGraph,
    BlueRed,
    ColoredInstance,
    Vertex,
    V1,
    V2,
    codegree,
    complement,
    theta,
)
from .enumeration import (
    Constraint,
    codegree_class_counts,
    conditional_edge_prob,
    count_biregular,
    list_biregular,
)
from .schedule import Overrides, build_schedule, upper_params

__all__ = [
    "BLUE", "RED", "AltWalk", "BiregularParams", "BipartiteGraph", "BlueRed", "ColoredInstance",
    "Vertex", "V1", "V2", "codegree", "complement", "theta", "Constraint", "codegree_class_counts",
    "conditional_edge_prob", "count_biregular", "list_biregular", "Overrides", "build_schedule",
    "upper_params",
]
