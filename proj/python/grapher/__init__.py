"""Python access to the grapher reranking core."""

from ._grapher import (
    GrapherError,
    build_graph,
    perfect_recall_at_k,
    rerank,
    run_cli,
    solve_oracle,
    tokenize,
)

__all__ = [
    "GrapherError",
    "build_graph",
    "perfect_recall_at_k",
    "rerank",
    "run_cli",
    "solve_oracle",
    "tokenize",
]
