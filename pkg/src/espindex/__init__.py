"""Compressed self-index built on an edit-sensitive parsing grammar."""
from .esp import esp_comp
from .grammar import Dictionary
from .index import EspIndex, IndexFormatError, UnsupportedOperation, build_index
from .search import Searcher, count_adjacency, count_core_verify, extract, fact, locate

__all__ = [
    "Dictionary", "EspIndex", "IndexFormatError", "Searcher", "UnsupportedOperation",
    "build_index", "count_adjacency", "count_core_verify", "esp_comp", "extract", "fact",
    "locate",
]
__version__ = "0.1.0"
