from .gat import SCORINGS, EntityTokens, GraphAttentionAggregator, aggregate, aggregate_meanpool

__all__ = [
    "SCORINGS",
    "EntityTokens",
    "GraphAttentionAggregator",
    "aggregate",
    "aggregate_meanpool",
]
