from .classifier import Classifier, ModelSettings
from .training import TrainConfig, train_minibatch
