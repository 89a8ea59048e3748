from .base import SearchHit, VectorIndex
from .flat import FlatIndex
from .hnsw import HnswIndex, HnswParams
from .ivf import IvfIndex, IvfParams
from .snapshot import load_index, read_header, save_index

__all__ = [
    "FlatIndex",
    "HnswIndex",
    "HnswParams",
    "IvfIndex",
    "IvfParams",
    "SearchHit",
    "VectorIndex",
    "load_index",
    "read_header",
    "save_index",
]
