"""Ensemble of clustered knockoffs (ECKO).

FDR-controlled variable selection for high-dimensional regression on
voxel grids, up to a spatial tolerance set by the cluster diameters.
"""
from . import _backend
from .cluster import Clustering, broadcast_qvalues, max_diameter, reduce_features, subsample_rows, ward_cluster
from .core import Dataset, GridGeometry, GroundTruth, SelectionResult, derive_seed, voxel_distance
from .knockoff import KnockoffModel, fit_knockoff_model, knockoff_pvalues, lcd_statistic, sample_knockoffs
from .linmodel import LassoFit, lasso_cv_lambda, lasso_fit
from .metrics import BenchmarkReport, delta_fdp, fdp, pr_curve, precision_recall, snr_sweep
from .multtest import bhq_qvalues, quantile_aggregate, threshold_select
from .pipeline import EckoParams, EckoTrace, run_cko, run_ecko, sign_vote
from .simdata import SimulationSpec, compute_snr, generate_synthetic

BACKEND = _backend.NAME
__version__ = "0.1.0"
