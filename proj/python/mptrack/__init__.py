# SPDX-License-Identifier: Apache-2.0
# Copyright (c) 2026 mptrack contributors
"""Motion-prompt tracking: trajectory encoding, cross-attention fusion, and a
synthetic tracking testbed. The heavy lifting lives in the C++ extension."""

from ._mptrack import (
    Box,
    Episode,
    EvalMode,
    Model,
    ModelConfig,
    SceneConfig,
    SearchRegion,
    __version__,
    denormalize_from_region,
    giou,
    instantaneous_frequency,
    iou,
    normalize_to_region,
    nyquist_alpha,
    raster_iou,
    region_around,
    run_episode,
    simulate_episode,
    temporal_pe_table,
)

__all__ = [
    "Box",
    "Episode",
    "EvalMode",
    "Model",
    "ModelConfig",
    "SceneConfig",
    "SearchRegion",
    "__version__",
    "denormalize_from_region",
    "giou",
    "instantaneous_frequency",
    "iou",
    "normalize_to_region",
    "nyquist_alpha",
    "raster_iou",
    "region_around",
    "run_episode",
    "simulate_episode",
    "temporal_pe_table",
]
