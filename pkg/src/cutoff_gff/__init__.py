"""Spectrally cut-off Gaussian free fields and their failure of reflection positivity."""
from .errors import (
    ConfigurationError,
    ConstructionFailed,
    CutoffGFFError,
    DegenerateWeightsError,
    FitFailed,
    GeometryMismatchError,
    RankDeficientError,
    SupportError,
    UnsupportedGeometryError,
)
from .spectral import (
    CovarianceKernel,
    CutoffSpec,
    Field,
    Geometry,
    RegionPartition,
    SpectralBasis,
    apply_cutoff,
    build_basis,
    bump_field,
    covariance_pairing,
    exact_gff_kernel,
    gff_kernel,
    plateau_field,
    reflect,
    region_partition,
    sample_gff,
    zero_kernel,
)
from .witness import (
    BumpSpec,
    WitnessCertificate,
    build_compact_witness,
    build_cylinder_witness,
    build_halfline_witness,
    fit_fourier_restriction,
    halfspace_certificate,
    kappa_integral,
)
from .rp import RPReport, assemble_rp_gram, certify_rp, default_test_family
from .markov import GaussianModel, MarkovReport, build_discrete_gff, conditional_predictor, markov_discrepancy
from .phi4 import MCEstimate, Phi4Config, coupling_sweep, default_counterterm, estimate_rp_pairing

__version__ = "0.1.0"
