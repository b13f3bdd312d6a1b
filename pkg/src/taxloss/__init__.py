"""Taxonomy-aware losses for flat multi-class classifiers."""

from .taxonomy import Taxonomy, load_taxonomy, parse_taxonomy

__version__ = "0.1.0"

__all__ = ["Taxonomy", "load_taxonomy", "parse_taxonomy", "__version__"]
