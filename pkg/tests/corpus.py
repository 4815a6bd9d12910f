"""Instances shared by the equivalence and termination checks."""

from pathlib import Path

from rebacktrack.problems import load_graph, random_graph

DATA = Path(__file__).parent / "data"

DATA_FILES = sorted(p.name for p in DATA.iterdir() if p.suffix in (".el", ".clq"))

# (n, p, seed); dominating set gets sparser graphs only where they stay cheap
RANDOM_VC = [(40, 0.1, 1), (50, 0.3, 2), (60, 0.1, 3), (60, 0.2, 7), (60, 0.3, 4), (60, 0.5, 5)]
RANDOM_DS = [(30, 0.3, 1), (40, 0.5, 2), (45, 0.1, 7), (50, 0.15, 7), (60, 0.2, 7), (60, 0.5, 3)]


def corpus():
    """``(label, problem kind, graph)`` for every instance."""
    out = []
    for name in DATA_FILES:
        g = load_graph(DATA / name)
        out.append((name, "vc", g))
        out.append((name, "ds", g))
    for kind, table in (("vc", RANDOM_VC), ("ds", RANDOM_DS)):
        for n, p, seed in table:
            out.append((f"G({n},{p})#{seed}", kind, random_graph(n, p, seed)))
    return out
