"""fastjl: randomness-efficient fast Johnson-Lindenstrauss sketching.

A block-projection transform with counted randomness, the rival sparse
constructions it is measured against, a statistical harness for the
norm-preservation and restricted-isometry claims, differentially private
matrix publication with singular-value lifting, and the distinguishing
attacks showing the sign-entried rivals leak.
"""

from .errors import (
    ContractError,
    DimensionError,
    FastJlError,
    ParameterRangeError,
    PrivacyPreconditionError,
    ResourceError,
    SingularMatrixError,
)
from .randomness import BitSource, derive_stream
from .transforms import JlTransform, TransformKind, apply, build, parse_kind

__version__ = "0.1.0"

__all__ = [
    "BitSource",
    "ContractError",
    "DimensionError",
    "FastJlError",
    "JlTransform",
    "ParameterRangeError",
    "PrivacyPreconditionError",
    "ResourceError",
    "SingularMatrixError",
    "TransformKind",
    "apply",
    "build",
    "derive_stream",
    "parse_kind",
]
