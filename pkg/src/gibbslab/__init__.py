"""Sampling Gibbs measures exp(-beta F) and certifying their Poincare constants.

Modules
-------
potentials             catalogue of landscapes with declared constants
samplers               Gradient Langevin Dynamics and the Proximal Sampler
lyapunov_certificates  bump splicing and closed-form PI / LSI certificates
isoperimetry           grid ground truth: spectral gaps, moments, divergences
harness                reproducible experiments and report writers
"""
from .harness import ExperimentConfig, ExperimentKind, emit_report, parse_config, run_experiment
from .isoperimetry import (
    GridMeasure,
    SpectralResult,
    divergence,
    generator_spectral_gap,
    grid_measure,
    histogram,
    local_poincare,
    moments,
    variance_decay_rate,
)
from .lyapunov_certificates import Certificate, CertificateKind, cert_pi_kl, cert_pi_pl, recompute
from .potentials import CATALOGUE_NAMES, Potential, catalogue
from .samplers import ProximalConfig, SamplerConfig, Trajectory, rgo_sample, run_gld, run_proximal

__version__ = "0.1.0"
