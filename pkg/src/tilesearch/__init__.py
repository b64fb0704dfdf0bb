"""Desk-scale visual search over tiled raster imagery.

Images become 512-bit binary codes; queries retrieve the k most similar
tiles either by exact Hamming brute force or by bit-sampling LSH with exact
re-ranking, served through a CLI, an HTTP API, and a browser map UI.
"""

from ._kernels import BACKEND as kernel_backend
from .bitvec import (
    FEATURE_BITS,
    FEATURE_BYTES,
    BinaryFeature,
    bulk_hamming,
    hamming,
)
from .exact import QuerySpec, SearchResult, brute_force_search, top_k_select
from .featurizer import (
    FeaturizerSpec,
    binarize,
    featurize,
    import_float_features,
    load_tile_ids,
    write_float_features,
)
from .ingest import IngestJob, IngestReport, load_job_config, run_ingest
from .lsh import (
    HashFamily,
    LshIndex,
    build_index,
    collision_probability,
    hash_key,
    lsh_search,
    make_family,
    measure_recall,
    predicted_recall,
    retrieval_probability,
)
from .store import FeatureStore, FeatureStoreBuilder
from .tiler import (
    Scene,
    TileGrid,
    TileId,
    enumerate_tiles,
    extract,
    load_scene,
    tile_geo,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryFeature",
    "FEATURE_BITS",
    "FEATURE_BYTES",
    "FeatureStore",
    "FeatureStoreBuilder",
    "FeaturizerSpec",
    "HashFamily",
    "IngestJob",
    "IngestReport",
    "LshIndex",
    "QuerySpec",
    "Scene",
    "SearchResult",
    "TileGrid",
    "TileId",
    "binarize",
    "brute_force_search",
    "build_index",
    "bulk_hamming",
    "collision_probability",
    "enumerate_tiles",
    "extract",
    "featurize",
    "hamming",
    "hash_key",
    "import_float_features",
    "kernel_backend",
    "load_job_config",
    "load_tile_ids",
    "load_scene",
    "lsh_search",
    "make_family",
    "measure_recall",
    "predicted_recall",
    "retrieval_probability",
    "run_ingest",
    "tile_geo",
    "top_k_select",
    "write_float_features",
    "__version__",
]
