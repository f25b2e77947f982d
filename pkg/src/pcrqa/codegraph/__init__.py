"""Code snippet analysis: language detection, tolerant AST, DFG/CFG/PDG."""

from .language import Language, detect_language, score_languages
from .parser import AstNode, CodeSnippet, make_snippet, parse_ast
from .graphs import (
    DepGraph,
    GraphEdge,
    GraphNode,
    GraphMergeError,
    build_cfg,
    build_dfg,
    build_pdg,
    graph_for_source,
    validate_graph,
)

__all__ = [
    "Language",
    "detect_language",
    "score_languages",
    "AstNode",
    "CodeSnippet",
    "make_snippet",
    "parse_ast",
    "DepGraph",
    "GraphEdge",
    "GraphNode",
    "GraphMergeError",
    "build_cfg",
    "build_dfg",
    "build_pdg",
    "graph_for_source",
    "validate_graph",
]
