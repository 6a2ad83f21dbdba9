"""factorlab: principal-component estimation of large approximate factor models.

Implements the PC estimator of the common component together with
over-estimation-robust modifications (eigenvector scaling, capping,
eigenvalue shrinkage), blockwise variants, factor-number criteria,
Monte Carlo evaluation, and factor-based covariance estimation with
minimum-variance backtesting.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .blocking import BlockPartition, default_block_size, make_partition
from .data import PanelData
from .errors import (
    BlockingInfeasible,
    DataFormatError,
    DegenerateOracle,
    DegenerateSpectrum,
    FactorLabError,
    InvalidInput,
    NumericalFailure,
    PoetInfeasible,
    SingularMatrix,
    StudyFailed,
)
from .estimators import (
    EstimatorSpec,
    FactorFit,
    METHODS,
    blockwise_estimate,
    capped_pc_estimate,
    cross_validate_coord_bound,
    default_coord_bound,
    estimate,
    fit_to_json,
    multi_estimate,
    pc_estimate,
    scaled_pc_estimate,
    shrunk_pc_estimate,
)
from .evaluation import (
    AhnHorensteinGR,
    BaiNgIC,
    Fixed,
    McReport,
    McStudyConfig,
    MethodResult,
    SettingResult,
    TruePlus,
    localisation_diagnostic,
    relative_errors,
    report_to_csv,
    report_to_json,
    run_study,
)
from .factor_number import (
    FactorNumberResult,
    default_r_max,
    gr_ahn_horenstein,
    ic_bai_ng,
)
from .io import read_matrix_csv, read_returns_csv, write_matrix_csv
from .linalg import (
    CovSpectrum,
    EigenSystem,
    HAVE_COMPILED_KERNEL,
    SymMatrix,
    cov_eigen,
    invert_spd,
    sample_covariance,
    sym_eigen,
    sym_eigvals,
    top_k_eigen,
)
from .portfolio import (
    BacktestReport,
    CovarianceEstimate,
    EfmMethod,
    PoetMethod,
    backtest_to_json,
    efm_covariance,
    min_variance_weights,
    poet_covariance,
    rolling_backtest,
    weights_to_csv,
)
from .simulation import (
    Model1,
    Model2,
    SimConfig,
    SimulatedPanel,
    SparseSpike,
    generate,
    replication_seed,
)

__all__ = [
    "__version__",
    # errors
    "FactorLabError",
    "InvalidInput",
    "NumericalFailure",
    "SingularMatrix",
    "DegenerateSpectrum",
    "BlockingInfeasible",
    "PoetInfeasible",
    "StudyFailed",
    "DegenerateOracle",
    "DataFormatError",
    # linear algebra
    "PanelData",
    "SymMatrix",
    "EigenSystem",
    "CovSpectrum",
    "HAVE_COMPILED_KERNEL",
    "sym_eigen",
    "sym_eigvals",
    "top_k_eigen",
    "sample_covariance",
    "cov_eigen",
    "invert_spd",
    # blocking
    "BlockPartition",
    "make_partition",
    "default_block_size",
    # simulation
    "Model1",
    "Model2",
    "SparseSpike",
    "SimConfig",
    "SimulatedPanel",
    "generate",
    "replication_seed",
    # factor number
    "FactorNumberResult",
    "default_r_max",
    "ic_bai_ng",
    "gr_ahn_horenstein",
    # estimators
    "EstimatorSpec",
    "FactorFit",
    "METHODS",
    "default_coord_bound",
    "pc_estimate",
    "scaled_pc_estimate",
    "capped_pc_estimate",
    "shrunk_pc_estimate",
    "blockwise_estimate",
    "estimate",
    "multi_estimate",
    "cross_validate_coord_bound",
    "fit_to_json",
    # evaluation
    "BaiNgIC",
    "AhnHorensteinGR",
    "Fixed",
    "TruePlus",
    "McStudyConfig",
    "MethodResult",
    "SettingResult",
    "McReport",
    "relative_errors",
    "localisation_diagnostic",
    "run_study",
    "report_to_json",
    "report_to_csv",
    # portfolio
    "CovarianceEstimate",
    "EfmMethod",
    "PoetMethod",
    "BacktestReport",
    "efm_covariance",
    "poet_covariance",
    "min_variance_weights",
    "rolling_backtest",
    "backtest_to_json",
    "weights_to_csv",
    # io
    "read_matrix_csv",
    "read_returns_csv",
    "write_matrix_csv",
]
