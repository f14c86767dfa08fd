"""Multi-scale graph wavelet convolutional networks with cross-modality
alignment: sparse/dense primitives, spectral preprocessing, Chebyshev
wavelet bases, a small reverse-mode tape, the network layers, the
composite objective, and the alternating-SGD trainer."""

from .autodiff import Tape, Tensor, constant, zero_grads
from .data import DatasetBundle, fractional_split, load_bundle, load_explicit_graph, save_bundle, semi_supervised_split, synth_multimodal
from .errors import (ConfigError, DataError, DivergenceError, DomainError,
                     ParameterError, ParseError, ScopeError, ShapeError,
                     SnapshotError, WavegraphError)
from .graphs import (ModalityGraph, SpectralPrep, estimate_lambda_max,
                     knn_graph, make_graph, normalized_laplacian,
                     rescale_laplacian, spectral_prep)
from .linalg import (DenseMatrix, SparseMatrix, as_dense, dense_matmul,
                     densify, from_coo, identity, sparsify, spmm,
                     transpose_sparse)
from .model import (ModelConfig, ModelParams, build_bases, classify,
                    cross_modal_layer, cross_modal_map, forward_full,
                    gcn_layer, init_params, multiscale_average, wavelet_conv)
from .objective import (LossWeights, between_modality_reg, cross_entropy,
                        dsm_loss, total_objective, weight_decay,
                        within_modality_reg)
from .training import (TrainConfig, TrainReport, evaluate,
                       sgd_step_permutations, sgd_step_weights, train)
from .wavelets import (WaveletBasis, bessel_j, chebyshev_coefficients,
                       chebyshev_wavelet, dense_wavelet_oracle)

__all__ = [name for name in dir() if not name.startswith("_")]
