"""Contraction geometry of coarse-graining channels on quantum spin systems.

The package computes how collective fluctuation observables contract under
channels that mix depolarizing noise, permutation averaging and lattice
diffusion: dense finite-size spectra, exact closed forms on symmetric
sectors, their bosonic large-n limits, and ring-lattice regularizations of
smoothed fluctuation fields.
"""

from .channels import (
    Channel,
    ComposedChannel,
    DepolarizingChannel,
    HomogeneousCoarseGraining,
    PermutationAverage,
    ProductChannel,
    SuperoperatorChannel,
    SwapDiffusion,
    commutation_deviation,
    homogeneous_coarse_graining,
)
from .errors import ConfigError, DimensionBudgetError, FlabError, NumericalError
from .focklimit import (
    FockBlock,
    SingleParticleSpace,
    beta_bound_decreasing,
    beta_bound_test,
    beta_bound_value,
    clt_convergence,
    depolarizing_fock_setup,
    finite_limit_comparison,
    finite_n_inner,
    fock_block_spectrum,
    generating_operator,
    generating_overlap,
    limiting_inner,
    permanent,
    single_particle_channel_matrix,
    symmetric_sector_spectrum,
    vertex_overlap,
)
from .geometry import (
    ContractionSpectrum,
    GnsSpace,
    bures_inner,
    bures_norm,
    channel_gns_matrix,
    channel_pairing_matrix,
    contraction_ratio,
    contraction_spectrum,
    gns_build,
    gns_inner,
    klocal_decay_check,
    omega_apply,
    omega_inverse_apply,
    pullback_norm,
    pushforward_norm,
    symmetric_sector_dense_spectrum,
    whiten_psd,
)
from .lattice import (
    BandlimitedField,
    ContinuumField,
    RingLattice,
    continuum_inner_convergence,
    diffusion_semigroup_on_sector,
    dispersion_bound,
    mode_contraction_k1,
    sample_field,
    smoother_apply,
    high_momentum_suppression_probe,
    swap_factorization_probe,
)
from .operators import (
    DenseOperator,
    DensityMatrix,
    QuditSystem,
    SectorBasis,
    basis_pure_density,
    embed_at_site,
    factor_product_state,
    fluctuation_operator,
    gell_mann_basis,
    klocal_basis,
    maximally_mixed_density,
    permutation_unitary,
    permute_sites,
    product_density,
    pure_state_density,
    reduced_density,
    sector_span,
    single_site_zero_mean_basis,
    symmetric_klocal_basis,
    symmetric_word_operator,
    symmetric_words,
    tensor_product,
)
from .reporting import Report
from .sampling import (
    haar_unitary,
    random_cptp_channel,
    random_positive_density,
    random_sector_mix,
    random_zero_mean_hermitian,
    task_rng,
)

__version__ = "0.1.0"
