"""Link-level simulator and optimizer for downlink cluster-free NOMA."""

__version__ = "0.1.0"

from .channel import (
    ChannelGenConfig,
    NetworkInstance,
    extract_cell,
    generate_multi_cell,
    generate_single_cell,
    pairwise_correlation,
)
from .sic import (
    BeamformingSolution,
    RateReport,
    Scheme,
    SicMatrix,
    decoding_order,
    rate_report,
    scheme_bb_noma,
    scheme_cb_noma,
    scheme_sdma,
    sum_rate,
    validate,
)
from .beamforming import (
    OptimizerConfig,
    OptimTrace,
    finite_difference_gradient,
    optimize_beams,
    smoothed_sum_rate,
    zf_init,
    zf_init_all,
)
from .search import (
    SearchConfig,
    exhaustive_search,
    greedy_correlation,
    local_search,
)
from .coordination import (
    CENTER,
    GnnArchitecture,
    GnnWeights,
    OverheadLedger,
    centralized_optimize,
    distributed_optimize,
    gnn_forward,
    gnn_overhead_closed_form,
    init_gnn_weights,
    load_gnn_weights,
    overhead_bits,
    save_gnn_weights,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ResultRow,
    parse_config,
    run_overhead,
    run_sweep,
)
