"""Channel information measures and Choi-state capacities by global optimization."""

__version__ = "0.1.0"

from .errors import CapExceeded, DimensionMismatch, InvariantViolation, SpecError
from .qmath import (
    DensityMatrix,
    DimLayout,
    basis_state,
    ebit,
    fidelity,
    flat_state,
    partial_trace,
    pure_state,
    random_density,
    random_unitary,
    tensor,
    trace_distance,
    von_neumann_entropy,
)
from .channels import (
    ChoiState,
    KrausChannel,
    StinespringDilation,
    apply,
    channel_from_spec,
    choi_of,
    complementary,
    compose,
    isi_readout,
    kraus_from_choi,
    purified_choi,
    stinespring,
)
from .superchannels import Superchannel, apply_to_choi, bipartite_kraus, induced_channel
from .information import (
    Ensemble,
    InfoValue,
    choi_coherent_information,
    choi_mutual_information,
    coherent_information,
    holevo_chi,
    mutual_information,
    n_shot,
)
from .optimize import (
    CAReport,
    ChainReport,
    GapReport,
    OptimizerConfig,
    OptResult,
    StateParam,
    ca_capacities,
    capacity_chain,
    decode,
    degradability_residual,
    maximize,
    scan,
    superadditivity_gap,
)
from .qec import CodeProjector, KLReport, entanglement_fidelity, kl_check
