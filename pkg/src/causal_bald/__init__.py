"""Information-theoretic active learning of conditional average treatment effects."""

from .acquisition import AcquisitionKind, AcquisitionScoreVector, compute_scores, select_batch_softmax
from .data import (
    ObservationalDataset,
    PhiSurrogateConfig,
    SyntheticConfig,
    generate_phi_surrogate,
    generate_synthetic,
    load_ihdp,
    noiseless_surface,
    true_cate,
)
from .evaluation import AggregateCurve, aggregate, pehe
from .loop import LoopConfig, Trajectory, run_experiment
from .models import PosteriorSummary, fit_ensemble, fit_gp, predict_summary, sample_tau
from .propensity import fit_propensity, predict_pi

__version__ = "0.1.0"
