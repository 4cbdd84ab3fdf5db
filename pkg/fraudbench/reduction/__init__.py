from .embedding import Embedding2D, ReductionMethod, neighbor_agreement
from .linear import jacobi_svd, pca_2d, truncated_svd_2d
from .tsne import TsneConfig, TsneInit, tsne_2d
