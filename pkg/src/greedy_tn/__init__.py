"""Greedy structure learning for tensor networks."""

from .als import (
    AlsConfig,
    LossSpec,
    ObservationSet,
    StaleStateError,
    als_sweep,
    loss,
    optimize,
    optimize_new_slices,
    update_core,
)
from .baselines import RankSweepSpec, SweepPoint, make_structure, rank_sweep, structure_params
from .network import (
    TensorNetwork,
    augment_singletons,
    edge_list,
    environment,
    evaluate,
    evaluate_at,
    init_rank_one,
    param_count,
    random_network,
    ranks_from_edges,
    remove_singletons,
)
from .search import (
    BudgetExhausted,
    GreedyConfig,
    IterationRecord,
    SearchTrace,
    SplitEvent,
    find_best_edge,
    greedy_search,
    heldout_error,
    random_edge,
    relative_error,
    split_nodes,
)
from .tensor_ops import (
    ContractionShapeError,
    InvalidBipartitionError,
    OracleTooLargeError,
    brute_force_tn_eval,
    contract_pair,
    frobenius,
    inner,
    matricize,
    mode_n_product,
    unmatricize,
)
from .transfer import SliceInitPolicy, add_slice, increment_edge

__version__ = "0.1.0"
