from .codegen import codegen, compile_source, interpret
from .dataset import COLUMNS, LabeledDataset, concat, from_csv, label_from_throughput, to_csv
from .evaluate import (CVResult, cart_trainer, kfold_accuracy, learning_curve, qlearning_trainer,
                       stratified_folds, tao_trainer, trainer_by_name)
from .train import (CartConfig, TaoConfig, best_care_split, best_gini_split, tao_optimize, train_cart,
                    train_error, train_tao_cart)
from .tree import FEATURES, DecisionTree, RadioChoice, TreeError, deserialize, predict, prune_dead, serialize

__all__ = [
    "FEATURES", "COLUMNS", "DecisionTree", "RadioChoice", "TreeError", "LabeledDataset", "CartConfig",
    "TaoConfig", "CVResult", "train_cart", "tao_optimize", "train_error", "train_tao_cart",
    "best_gini_split", "best_care_split",    "predict", "prune_dead", "serialize", "deserialize", "codegen", "compile_source", "interpret",
    "kfold_accuracy", "learning_curve", "stratified_folds", "cart_trainer", "tao_trainer",
    "qlearning_trainer", "trainer_by_name", "concat", "from_csv", "to_csv", "label_from_throughput",
]
