"""Signature tail asymptotics: tensor series, Brownian signatures and hyperbolic development."""

__version__ = "0.1.0"

from .tensor_algebra import (  # noqa: E402
    NormKind,
    Permutation,
    TruncatedTensorSeries,
    apply_permutation,
    half_factorial_log,
    is_group_like,
    level_norm,
    segment_exp,
    shuffle_product,
    truncated_product,
)
from .path_signature import (  # noqa: E402
    PiecewiseLinearPath,
    SignatureRecord,
    normalized_level_sequence,
    reverse_signature,
    signature,
)

__all__ = [
    "NormKind",
    "Permutation",
    "PiecewiseLinearPath",
    "SignatureRecord",
    "TruncatedTensorSeries",
    "apply_permutation",
    "half_factorial_log",
    "is_group_like",
    "level_norm",
    "normalized_level_sequence",
    "reverse_signature",
    "segment_exp",
    "shuffle_product",
    "signature",
    "truncated_product",
]
