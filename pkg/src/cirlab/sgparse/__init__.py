from .embed import TextSummaryEncoder, embed_graph, to_subject_centric, whole_graph_token
from .graph import (
    GraphTokenTable,
    NeighborToken,
    SceneGraph,
    Subject,
    SubjectCentricGraph,
)
from .rule_parser import ExternalParserBackend, RuleParserBackend, parse_scene_graph

__all__ = [
    "TextSummaryEncoder",
    "embed_graph",
    "to_subject_centric",
    "whole_graph_token",
    "GraphTokenTable",
    "NeighborToken",
    "SceneGraph",
    "Subject",
    "SubjectCentricGraph",
    "ExternalParserBackend",
    "RuleParserBackend",
    "parse_scene_graph",
]
