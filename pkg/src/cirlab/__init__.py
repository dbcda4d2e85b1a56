"""Composed-image-retrieval lab: modification-text parsing, entity-guided
composition and training, retrieval evaluation, and the human-in-the-loop
annotation pipeline with its review service."""

__version__ = "0.1.0"
