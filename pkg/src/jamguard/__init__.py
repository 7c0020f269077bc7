"""jamguard: jamming-attack detection workbench.

Synthesizes labeled wireless-link telemetry under configurable jammer and
benign-degradation scenarios, trains three classifier families from first
principles (random forest, kernel SVM, feed-forward neural network), and
evaluates them with detection-theory metrics, cross-validation, ROC curves,
and hyperparameter sweeps.
"""

from .datakit import (
    Dataset, FoldPlan, Scaler,
    csv_read, csv_write, kfold_split, scaler_apply, scaler_fit, shuffle,
    FEATURE_NAMES,
)
from .errors import DataError, JamguardError, TrainingError
from .evalkit import (
    ConfusionMatrix, EvalReport, ForestSpec, NnSpec, RocCurve, SvmSpec,
    bayes_oracle, confusion, cross_validate, metrics, roc_curve, sweep,
    CANONICAL_BAYES_ACCURACY,
)
from .forest import (
    DecisionTree, Forest, TreeParams,
    build_tree, fit_forest, forest_predict, vote_fraction,
)
from .modelio import load_model, save_model
from .neuralnet import (
    NetArchitecture, NeuralNet, NnHyperparams,
    backprop_gradients, cost, fit_nn, forward, nn_predict,
)
from .simkit import (
    ChannelConfig, JammerProfile, LinkWindow, Sample,
    canonical_dataset, canonical_mix, extract_features, generate_dataset,
    load_scenario_mix, rss_linear, save_scenario_mix, simulate_window,
    CANONICAL_SEED, CANONICAL_SIZE,
)
from .svm import (
    KernelSpec, SvmModel,
    fit_svm, kernel_eval, svm_decision, svm_objective, svm_predict,
)

__version__ = "0.1.0"
