"""Quality-estimation metric analysis: ingestion, similarity, and smooth models."""

__version__ = "0.1.0"
