"""Tools for quantum setups with indefinite input-output direction.

Layered as: tensor_core (labeled tensor algebra), channels (Kraus/Choi forms
and the input-output inversion), supermaps (setup cones and the coherently
controlled time-direction setup), sdp (conic solver and robustness programs),
witness (decomposition, Born probabilities, resampling), game (two-gate
direction-guessing game), cli (command-line front end).
"""

from .channels import (
    KrausChannel,
    choi_to_kraus,
    input_output_inversion,
    is_bistochastic,
    kraus_to_choi,
)
from .game import (
    GatePair,
    builtin_gate_sets,
    builtin_gate_table,
    compute_pmax_fixed_direction,
    game_witness,
    play_game,
    qtf_strategy,
    qtf_strategy_operator,
    switch_strategy,
    switch_strategy_operator,
    verify_gate_table,
)
from .sdp import ConicProgram, SolveReport, solve, solve_cone_value, solve_max_robustness
from .supermaps import (
    ConeId,
    SetupOperator,
    SlotSpec,
    apply_supermap,
    check_multipartite,
    check_setup,
    definite_split,
    qtf_choi,
    qtf_plus_control,
)
from .tensor_core import (
    HermitianOperator,
    Ket,
    Norms,
    SystemLayout,
    double_ket,
    hs_inner,
    identity,
    norms,
    partial_trace,
    partial_transpose,
    permute_factors,
    psd_project,
    qubits,
    tensor_product,
    trace_and_replace,
)
from .witness import (
    DecompositionTerm,
    ProbabilityRecord,
    Witness,
    WitnessReport,
    born_probabilities,
    decompose_witness,
    estimate_robustness,
    poisson_resample,
    validate_witness,
    z_score,
)

__all__ = [
    "ConeId",
    "ConicProgram",
    "DecompositionTerm",
    "GatePair",
    "HermitianOperator",
    "Ket",
    "KrausChannel",
    "Norms",
    "ProbabilityRecord",
    "SetupOperator",
    "SlotSpec",
    "SolveReport",
    "SystemLayout",
    "Witness",
    "WitnessReport",
    "apply_supermap",
    "born_probabilities",
    "builtin_gate_sets",
    "builtin_gate_table",
    "check_multipartite",
    "check_setup",
    "choi_to_kraus",
    "compute_pmax_fixed_direction",
    "decompose_witness",
    "definite_split",
    "double_ket",
    "estimate_robustness",
    "game_witness",
    "hs_inner",
    "identity",
    "input_output_inversion",
    "is_bistochastic",
    "kraus_to_choi",
    "norms",
    "partial_trace",
    "partial_transpose",
    "permute_factors",
    "play_game",
    "poisson_resample",
    "psd_project",
    "qtf_choi",
    "qtf_plus_control",
    "qtf_strategy",
    "qtf_strategy_operator",
    "qubits",
    "solve",
    "solve_cone_value",
    "solve_max_robustness",
    "switch_strategy",
    "switch_strategy_operator",
    "tensor_product",
    "trace_and_replace",
    "validate_witness",
    "verify_gate_table",
    "z_score",
]

__version__ = "0.1.0"
