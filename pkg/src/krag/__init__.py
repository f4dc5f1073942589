"""Inference-graph reasoning over a knowledge set of pattern graphs.

Statements compile to condition/exception graphs, courtroom acts establish
facts under burden-of-proof semantics, hybrid retrieval selects the pattern
graph matching a query, and answers ship with explanation trees and rendered
graphs.
"""

__version__ = "0.1.0"
