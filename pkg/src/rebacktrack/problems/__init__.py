from .dominating_set import DominatingSetProblem
from .graph import (
    InstanceWarning,
    JournaledGraph,
    ParseError,
    bits,
    is_dominating_set,
    is_vertex_cover,
    load_graph,
    mask_of,
    parse_dimacs,
    parse_edge_list,
    random_graph,
    to_dimacs,
)
from .trees import FullBinaryTree, PathTree, RandomTree
from .vertex_cover import VertexCoverProblem

PROBLEMS = {"vc": VertexCoverProblem, "ds": DominatingSetProblem}


def make_problem(kind: str, graph: JournaledGraph, **options):
    try:
        cls = PROBLEMS[kind]
    except KeyError:
        raise ValueError(f"unknown problem {kind!r}; expected one of {sorted(PROBLEMS)}") from None
    return cls(graph, **options)


def verify_certificate(kind: str, graph: JournaledGraph, vertices) -> bool:
    if any(not 0 <= v < graph.n for v in vertices):
        return False
    if kind == "vc":
        return is_vertex_cover(graph, vertices)
    if kind == "ds":
        return is_dominating_set(graph, vertices)
    raise ValueError(f"unknown problem {kind!r}")


__all__ = [
    "PROBLEMS",
    "DominatingSetProblem",
    "FullBinaryTree",
    "InstanceWarning",
    "JournaledGraph",
    "ParseError",
    "PathTree",
    "RandomTree",
    "VertexCoverProblem",
    "bits",
    "is_dominating_set",
    "is_vertex_cover",
    "load_graph",
    "make_problem",
    "mask_of",
    "parse_dimacs",
    "parse_edge_list",
    "random_graph",
    "to_dimacs",
    "verify_certificate",
]
