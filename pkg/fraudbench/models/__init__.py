import typing
from pathlib import Path

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.errors import ConfigError, ModelFormatError

from .knn import KNearestNeighbors, KnnSettings
from .logistic import LogisticRegression, LogisticSettings
from .mlp import Mlp, MlpSettings
from .svm import LinearSvm, SvmSettings
from .transformer import TransformerClassifier, TransformerHyper, TransformerSettings
from .tree import DecisionTree, TreeSettings

# Registered model names, in the order the benchmark table lists them.
MODEL_REGISTRY: typing.Dict[str, typing.Type[Classifier]] = {
    cls.name: cls
    for cls in (TransformerClassifier, LogisticRegression, KNearestNeighbors, LinearSvm, DecisionTree, Mlp)
}


def model_class(name: str) -> typing.Type[Classifier]:
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model '{name}', expected one of {sorted(MODEL_REGISTRY)}") from None


def build_model(name: str, settings: typing.Optional[ModelSettings] = None) -> Classifier:
    return model_class(name)(settings)


def load_any(path: typing.Union[str, Path]) -> Classifier:
    """Load a saved model of any registered kind, dispatching on its magic bytes."""
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"{path}: model file not found")
    magic = codec.read_magic(path)
    for cls in MODEL_REGISTRY.values():
        if cls.magic == magic:
            return cls.load(path)
    raise ModelFormatError(f"{path}: bad magic {magic!r}, not a fraudbench model file")
