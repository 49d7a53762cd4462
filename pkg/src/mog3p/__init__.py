"""Multi-objective genetic programming projection pursuit (MOG3P)."""

from .baselines import mda_fit, mds_fit, pca_fit
from .classifiers import ClassifierSpec, cv_accuracy, stratified_folds
from .data import Dataset, ExperimentSettings, NestedCvPlan, Standardizer, load_builtin, load_csv, run_nested_experiment
from .gp_core import ExpressionTree, FunctionSymbol, GpParams, ProjectionModel, parse_infix, project, to_infix
from .moea import MoeaParams, run_evolution
from .objectives import FitnessVector, ModelEvaluator, ObjectiveConfig, evaluate_model, separation_index

__version__ = "0.1.0"
