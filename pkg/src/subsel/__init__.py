"""Submodular data subset selection and filtered diversified active learning."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    ClassPartition,
    FeatureDataset,
    Selection,
    make_rng,
    partition_by_label,
    validate_dataset,
)
from .kernels import (  # noqa: E402
    cosine_similarity,
    euclidean_distance,
    knn_sparsify,
    rbf_similarity,
)
from .objectives import (  # noqa: E402
    Dispersion,
    FacilityLocation,
    LabelAware,
    Mixture,
    SparseFacilityLocation,
)
from .optimizer import brute_force, dispersion_greedy, lazy_greedy, naive_greedy  # noqa: E402
