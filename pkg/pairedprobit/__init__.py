from pairedprobit.config import FitOptions, SimulationOptions
from pairedprobit.data_io import load_lead_dataset, load_leukaemia_dataset, parse_dataset
from pairedprobit.estimators import fit_cml_logit, fit_conditional_mle, fit_heckman_ml, ipw_ate, naive_ate
from pairedprobit.inference import TauDistribution, asymptotic_variance, treatment_odds
from pairedprobit.model import Dataset, MatchedPair, Theta
from pairedprobit.simulation import Scenario, run_replications

__all__ = [
    "Dataset",
    "FitOptions",
    "MatchedPair",
    "Scenario",
    "SimulationOptions",
    "TauDistribution",
    "Theta",
    "asymptotic_variance",
    "fit_cml_logit",
    "fit_conditional_mle",
    "fit_heckman_ml",
    "ipw_ate",
    "load_lead_dataset",
    "load_leukaemia_dataset",
    "naive_ate",
    "parse_dataset",
    "run_replications",
    "treatment_odds",
]
