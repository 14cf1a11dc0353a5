"""Chronological (totally ordered measured) trees, their exact contour
coding, truncation by time change, and splitting-tree / spectrally positive
Levy process simulation with a statistical verification harness."""

from .chrono import (
    ChronoTree,
    DegenerateSubtreeError,
    EPS,
    Individual,
    InvalidPointError,
    InvalidTreeError,
    PointRef,
    alive_count,
    canonical_serialization,
    dist,
    explore,
    isomorphic,
    measure_left,
    mrca,
    normalize_point,
    order_cmp,
    subtree_right,
    subtree_rooted,
    truncate,
    validate,
)
from .contour import (
    Excursion,
    Fall,
    InvalidContourError,
    Jump,
    PLJContour,
    canonicalize,
    contour_distance,
    contour_from_sizes,
    decode,
    encode,
    excursions_above_min,
    time_change,
    upcrossings,
)
from .laws import Exponential, Fixed, Table, parse_law
from .levy import (
    LevyParams,
    SampledPath,
    SimulationError,
    conjugate,
    excise_above,
    kill_at_zero,
    largest_root,
    phi_inverse,
    psi_eval,
    psi_prime0,
    reflect_below,
    rng_from,
    sample_passage_contour,
    sample_path,
    simulate_Qxr,
    simulate_qxr_contour,
    simulate_splitting_tree,
    sojourn_of,
    synthesize,
    path_sup_distance,
    paths_equal,
)
from .splitting import (
    TestReport,
    XiMeasure,
    binary_and_class_check,
    consistent_family,
    path_measure,
    poisson_splitting_test,
    sojourn_check,
    timechange_consistency_test,
    xi_extract,
    xi_from_contour,
    xi_multisets_equal,
)

__version__ = "0.1.0"
