"""Scores, three-way decisions and prevalence estimates for binary technical replicates."""

from .coeffs import (
    BiasInterval,
    DatasetCoefficients,
    bias_dominance_interval,
    delta,
    delta_gamma,
    gamma,
    prevalence_bias,
    prevalence_moments,
    score_moments,
)
from .data import (
    IndividualRecord,
    ModelParams,
    RawReplicateTable,
    ReplicateDataset,
    latent_oracle_estimates,
    load_csv,
    reduce_to_sufficient,
    write_csv,
)
from .decision import (
    Classification,
    LossSpec,
    NoIndecisionRegion,
    ThresholdPair,
    classify,
    confusion_table,
    empirical_risk,
    optimal_thresholds,
    sensitivity_specificity,
)
from .errors import BinrepError, DomainError, NumericalError, ParseError, ValidationError
from .estimation import EstimateSet, estimate, estimate_bayes
from .mcmc import PosteriorSample, PriorSpec, default_prior, gibbs_run, load_prior, misguided_prior, summarize
from .prediction import predict_bayes, predict_plugin, prediction_table
from .scoring import (
    EmFitResult,
    ScoreVector,
    em_fit,
    likelihood_score,
    score_average,
    score_likelihood,
    score_map,
    score_median,
)
from .simulation import MammoConfig, SimConfig, simulate_dataset, simulate_mammography

__version__ = "0.1.0"
