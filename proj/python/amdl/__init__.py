"""Adaptive incremental multi-domain learning.

A frozen shared convolutional base, per-domain parallel 1x1 adapters and
batch-norm parameters, early-exit heads trained with a summed multi-exit
cross-entropy loss, and a threshold policy that picks the cheapest exit per
domain. All heavy lifting happens in the C++ extension module.
"""

from amdl._core import (
    ConfigurationError,
    DimensionError,
    FormatError,
    NumericError,
    batchnorm,
    conv2d,
    conv2d_grads,
    count_params,
    decathlon_fixture,
    evaluate,
    generate_synthetic,
    global_avg_pool,
    linear,
    load_dataset,
    lr_at,
    relu,
    select_exit,
    softmax_cross_entropy,
    table2_best_row,
    train_base,
    train_domain,
    weight_decay_for,
    write_synthetic_domain,
)

__all__ = [
    "ConfigurationError",
    "DimensionError",
    "FormatError",
    "NumericError",
    "batchnorm",
    "conv2d",
    "conv2d_grads",
    "count_params",
    "decathlon_fixture",
    "evaluate",
    "generate_synthetic",
    "global_avg_pool",
    "linear",
    "load_dataset",
    "lr_at",
    "relu",
    "select_exit",
    "softmax_cross_entropy",
    "table2_best_row",
    "train_base",
    "train_domain",
    "weight_decay_for",
    "write_synthetic_domain",
]
