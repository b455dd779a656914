"""Span-based semantic role labeling and coreference with syntactic scaffolds."""

__version__ = "0.1.0"
