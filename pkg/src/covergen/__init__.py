"""covergen: book-cover image generation from user-authored layout graphs.

A layout graph (objects with grid locations and sizes, solid regions, one
title, spatial relations) is encoded by a graph network into per-object
embeddings, decoded into boxes and masks, composed into an appearance-filled
layout feature map and rendered into a cover image by an adversarially
trained encoder-decoder.  The placeholder title is then replaced with the
user's text through a pluggable style-transfer stage.
"""

from .config import (
    ConfigError,
    DataConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    config_hash,
    load_config,
    profile,
    save_config,
)
from .cover import CoverGenerator
from .data import (
    AugmentedSample,
    DataError,
    SceneSample,
    augment_with_solid_and_title,
    build_layout_maps,
    derive_relations,
    ingest_book_covers,
    ingest_scene_dataset,
    load_training_set,
    location_from_box,
)
from .discriminators import (
    BookCoverDiscriminator,
    LayoutDiscriminator,
    MaskDiscriminator,
    ObjectDiscriminator,
)
from .encoder import GraphEncoder, GraphTensors, collate_graph_tensors, graph_tensors
from .graphs import (
    APPEARANCE_MODES,
    GRID_CELLS,
    GRID_SIDE,
    LOCATION_BITS,
    PREDICATES,
    SIZE_LEVELS,
    SOLID_CATEGORY,
    TITLE_CATEGORY,
    Appearance,
    CategoryVocabulary,
    GraphError,
    LayoutGraph,
    LayoutObject,
    LocationVector,
    Relation,
    ValidationReport,
    decode_location,
    encode_location,
    graph_to_doc,
    inverse_predicate,
    parse_graph,
    parse_graph_doc,
    serialize_graph,
    validate_graph,
)
from .losses import LossBundle, LossWeights
from .objects import (
    AppearanceEncoder,
    BoxRegressionNet,
    MaskGenerator,
    compose_feature_map,
    crop_bbox,
    normalize_boxes,
    place_mask,
)
from .perception import PerceptionNetwork, PerceptionUnavailableError
from .pipeline import GenerationPipeline, GenerationResult, InvalidGraphError, RequestError
from .synthetic import make_cover_corpus, make_scene_dataset
from .titles import (
    FallbackStyler,
    StyleTransferResult,
    TitleRegion,
    paste_title,
    render_placeholder,
    transfer_title_style,
)
from .training import NonFiniteLossError, Trainer, TrainingBatch, build_networks

__all__ = [name for name in dir() if not name.startswith("_")]
