"""Privacy-preserving content-based image retrieval over block-scrambled images.

The pipeline: owners encrypt images with per-image keys (block permutation,
dihedral transforms, negative-positive inversion on a 16x16 grid), a third
party indexes them with descriptors that are invariant to that encryption,
and users retrieve by visual similarity without anyone decrypting anything.
"""

from .codebook import (
    Codebook,
    KMeansConfig,
    KMeansResult,
    TrainMeta,
    assign_words,
    build_codebook,
    collect_training_descriptors,
    fnv1a64,
    kmeans,
    nearest_word,
)
from .crypto import EncryptionPlan, KeySet, decrypt, derive_plan, encrypt, keygen, load_keyset, save_keyset
from .descriptor import (
    DEFAULT_PARAMS,
    DIM,
    DescriptorParams,
    base_descriptor,
    mcedd,
    mcedd_batch,
    patch_descriptors,
)
from .errors import (
    BlockAlignmentError,
    CodebookMismatchError,
    DuplicateIdError,
    EmptyGridError,
    EmptyTrainingSetError,
    EmptyTruthSetError,
    EtcCbirError,
    FileFormatError,
    FormatVersionError,
    ImageTooSmallError,
    NoQueriesError,
    TooFewPointsError,
    TruncatedFileError,
)
from .esimple import ESimpleVector, esimple, histogram, l2_normalize, weight
from .evaluate import (
    ApReport,
    EvalManifest,
    ManifestEntry,
    average_precision,
    mean_average_precision,
    owner_keys,
    run_experiment,
    shuffled_ranking_map,
    ukbench_manifest,
)
from .index import IndexEntry, RankedResult, RetrievalIndex
from .prng import SplitMix64
from .raster import (
    BLOCK,
    DIHEDRAL_INVERSE,
    apply_dihedral,
    block_grid,
    crop_to_block_multiple,
    dihedral_transform,
    from_blocks,
    load_image,
    negate_block,
    save_image,
    to_blocks,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCK",
    "BlockAlignmentError",
    "Codebook",
    "CodebookMismatchError",
    "DEFAULT_PARAMS",
    "DIHEDRAL_INVERSE",
    "DIM",
    "DescriptorParams",
    "DuplicateIdError",
    "ESimpleVector",
    "EmptyGridError",
    "EmptyTrainingSetError",
    "EmptyTruthSetError",
    "EncryptionPlan",
    "EtcCbirError",
    "EvalManifest",
    "ApReport",
    "FileFormatError",
    "FormatVersionError",
    "ImageTooSmallError",
    "IndexEntry",
    "KMeansConfig",
    "KMeansResult",
    "KeySet",
    "ManifestEntry",
    "NoQueriesError",
    "RankedResult",
    "RetrievalIndex",
    "SplitMix64",
    "TooFewPointsError",
    "TrainMeta",
    "TruncatedFileError",
    "apply_dihedral",
    "assign_words",
    "average_precision",
    "base_descriptor",
    "block_grid",
    "build_codebook",
    "collect_training_descriptors",
    "crop_to_block_multiple",
    "decrypt",
    "derive_plan",
    "dihedral_transform",
    "encrypt",
    "esimple",
    "fnv1a64",
    "from_blocks",
    "histogram",
    "keygen",
    "kmeans",
    "l2_normalize",
    "load_image",
    "load_keyset",
    "mcedd",
    "mcedd_batch",
    "mean_average_precision",
    "negate_block",
    "nearest_word",
    "owner_keys",
    "patch_descriptors",
    "run_experiment",
    "save_image",
    "save_keyset",
    "shuffled_ranking_map",
    "to_blocks",
    "ukbench_manifest",
    "__version__",
]
