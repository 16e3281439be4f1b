"""modswitch: link-level simulator and modulation-switching engine.

Gray-mapped BPSK/QPSK/M-QAM modems over AWGN, closed-form and Monte Carlo
BER, a QoS cost-function modulation selector, and a framed link with a
switch handshake that keeps transmitter and receiver in tandem.
"""

from .adapt import (
    EnvDistribution,
    EnvTuple,
    POLICY_PRESETS,
    QoSPolicy,
    SelectionMode,
    bit_rate,
    expected_cost,
    local_cost,
    select_modulation,
    threshold_table,
    uniform_env_distribution,
)
from .channel import (
    ChannelKind,
    ChannelModel,
    LinkBudget,
    apply_channel,
    ebn0_to_noise_sigma,
    free_space_path_loss_db,
    link_budget_ebn0,
)
from .errors import ModSwitchError
from .link import (
    ControllerState,
    DecodeFailure,
    Frame,
    LinkStats,
    audit_tandem,
    controller_step,
    decode_frame,
    encode_frame,
    run_session,
)
from .metrics import (
    BerEstimate,
    ber_sweep,
    measure_ber,
    q_function,
    theoretical_ber,
)
from .modem import (
    ModulationScheme,
    SchemeId,
    SymbolBlock,
    build_scheme,
    demap_symbols,
    map_bits,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SchemeId",
    "ModulationScheme",
    "SymbolBlock",
    "build_scheme",
    "map_bits",
    "demap_symbols",
    "ChannelKind",
    "ChannelModel",
    "LinkBudget",
    "ebn0_to_noise_sigma",
    "apply_channel",
    "free_space_path_loss_db",
    "link_budget_ebn0",
    "BerEstimate",
    "q_function",
    "theoretical_ber",
    "measure_ber",
    "ber_sweep",
    "SelectionMode",
    "QoSPolicy",
    "EnvTuple",
    "EnvDistribution",
    "POLICY_PRESETS",
    "bit_rate",
    "local_cost",
    "expected_cost",
    "uniform_env_distribution",
    "select_modulation",
    "threshold_table",
    "Frame",
    "DecodeFailure",
    "ControllerState",
    "LinkStats",
    "encode_frame",
    "decode_frame",
    "controller_step",
    "run_session",
    "audit_tandem",
    "ModSwitchError",
]
