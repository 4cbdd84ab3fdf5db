import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from fraudbench.data.dataset import LabeledDataset
from fraudbench.data.preprocess import shuffle
from fraudbench.errors import ConfigError
from fraudbench.harness.emit import emit_scatter_svg, write_records
from fraudbench.reduction import (
    Embedding2D,
    ReductionMethod,
    TsneConfig,
    neighbor_agreement,
    pca_2d,
    truncated_svd_2d,
    tsne_2d,
)

logger = logging.getLogger(__name__)

ALL_METHODS = (ReductionMethod.TSNE, ReductionMethod.PCA, ReductionMethod.TRUNCATED_SVD)


def resolve_methods(method: str) -> List[ReductionMethod]:
    if method == "all":
        return list(ALL_METHODS)
    try:
        return [ReductionMethod(method)]
    except ValueError:
        raise ConfigError(f"unknown reduction method '{method}', expected tsne, pca, tsvd or all") from None


def subsample(ds: LabeledDataset, max_rows: int, seed: int) -> LabeledDataset:
    """At most max_rows rows, drawn by a seeded shuffle."""
    if ds.n_rows <= max_rows:
        return ds
    return shuffle(ds, seed).take(range(max_rows))


def reduce_2d(ds: LabeledDataset, method: ReductionMethod, tsne_cfg: Optional[TsneConfig] = None) -> Embedding2D:
    if method == ReductionMethod.PCA:
        return pca_2d(ds)
    if method == ReductionMethod.TRUNCATED_SVD:
        return truncated_svd_2d(ds)
    return tsne_2d(ds, tsne_cfg if tsne_cfg is not None else TsneConfig())


def _summary(emb: Embedding2D) -> Dict:
    record = {
        "method": emb.method.value,
        "n_points": len(emb),
        "neighbor_agreement": neighbor_agreement(emb.points, emb.labels),
    }
    diag = emb.diagnostics
    if emb.method == ReductionMethod.PCA:
        record["explained_variance_ratio_1"], record["explained_variance_ratio_2"] = diag["explained_variance_ratio"]
    elif emb.method == ReductionMethod.TRUNCATED_SVD:
        record["singular_value_1"], record["singular_value_2"] = diag["singular_values"]
    else:
        record["final_kl"] = diag["final_kl"]
    return record


def run_reductions(
    ds: LabeledDataset,
    methods: Sequence[ReductionMethod],
    directory: Union[str, Path],
    tsne_cfg: Optional[TsneConfig] = None,
) -> List[Dict]:
    """
    Projects `ds` with every method, writing embedding_<method>.svg/.csv and
    reduction_summary.csv (nearest-neighbour label agreement per method).
    """
    directory = Path(directory)
    records = []
    for method in methods:
        emb = reduce_2d(ds, method, tsne_cfg)
        emit_scatter_svg(emb, directory / f"embedding_{method.value}.svg")
        records.append(_summary(emb))
        logger.info(f"{method.value}: neighbour agreement {records[-1]['neighbor_agreement']:.4f}")
    write_records(records, directory / "reduction_summary.csv")
    return records
