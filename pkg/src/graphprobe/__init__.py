"""Probe which topological vertex features are recoverable from
unsupervised graph embeddings.

The pipeline: load a graph, compute seven per-vertex topological features,
train vertex embeddings by five methods (uniform and biased random-walk
skip-gram in Euclidean and hyperbolic geometry, plus an adjacency
autoencoder), then measure how well each feature's order of magnitude can
be predicted from each embedding space, against rule-based baselines.
"""

__version__ = "0.1.0"

from .embedding import Embedding, read_embedding, write_embedding
from .features import FeatureTable, compute_all
from .graph import Graph, load_edge_list, load_edge_list_file
from .probe import ProbeExperimentConfig, ProbeReport, run_probe_experiment
from .projection import Projection2D, tsne
from .sdne import SdneConfig
from .skipgram import SkipGramConfig, make_method

__all__ = [
    "__version__",
    "Embedding",
    "FeatureTable",
    "Graph",
    "ProbeExperimentConfig",
    "ProbeReport",
    "Projection2D",
    "SdneConfig",
    "SkipGramConfig",
    "compute_all",
    "load_edge_list",
    "load_edge_list_file",
    "make_method",
    "read_embedding",
    "run_probe_experiment",
    "tsne",
    "write_embedding",
]
