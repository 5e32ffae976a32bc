"""Learned image-augmentation policies: ops, policy text format, search helpers."""

from ._core import (
    DecodeError,
    ParseError,
    Policy,
    affine,
    apply_policy,
    autocontrast,
    bench,
    child_accuracy,
    cutout,
    decode_tokens,
    derive_seed,
    encode_policy,
    enhance,
    equalize,
    invert,
    op_names,
    parse_policy,
    posterize,
    sample_pair,
    search_space_size,
    solarize,
    synth_invariance,
)

__all__ = [
    "DecodeError",
    "ParseError",
    "Policy",
    "affine",
    "apply_policy",
    "autocontrast",
    "bench",
    "child_accuracy",
    "cutout",
    "decode_tokens",
    "derive_seed",
    "encode_policy",
    "enhance",
    "equalize",
    "invert",
    "op_names",
    "parse_policy",
    "posterize",
    "sample_pair",
    "search_space_size",
    "solarize",
    "synth_invariance",
]
