"""Dense-array power and Fourier series with Lie-transform normal forms."""

from .analysis import (
    contopoulos,
    henon_heiles,
    level_map,
    norm_sequence,
    optimal_truncation,
    poincare_section,
    stability_time,
)
from .errors import (
    AccuracyError,
    CapacityError,
    DimensionError,
    LieSeriesError,
    RangeError,
    SequencingError,
)
from .indexing import build_tables, index_poly, index_trig, unindex_poly, unindex_trig
from .normalform import (
    HamiltonianExpansion,
    bracket_residual,
    first_integral,
    from_complex,
    lie_transform_apply,
    normalize,
    to_complex,
)
from .series import HomogeneousBlock, PolynomialSeries, TrigBlock, poisson_bracket
from .sparse import SparseCoefficientTree

__version__ = "0.1.0"
