"""Spatial reasoning toolkit: region tokens, two-phase inference, curation, eval."""

__version__ = "0.1.0"

from .codec import (
    GridSpec,
    RegionBox,
    RegionTokenQuad,
    decode_quad,
    encode_region,
    format_quad,
    parse_region_tokens,
)

__all__ = [
    "__version__",
    "GridSpec",
    "RegionBox",
    "RegionTokenQuad",
    "decode_quad",
    "encode_region",
    "format_quad",
    "parse_region_tokens",
]
