# Copyright 2026 The pathroute Authors
# SPDX-License-Identifier: Apache-2.0
"""Region-wise path-routed image restoration."""

from ._pathroute import (
    ConfigError,
    IoError,
    ModelConfig,
    NumericError,
    RoutedNet,
    UsageError,
    add_noise,
    conv_flops,
    count_flops,
    dct_compress,
    difficulty,
    extract_patches,
    gaussian_blur,
    lr_schedule,
    merge_patches,
    procedural_scene,
    psnr,
    restore_image,
    restore_patch,
    restore_route,
    ssim,
    step_reward,
)

__all__ = [
    "ConfigError",
    "IoError",
    "ModelConfig",
    "NumericError",
    "RoutedNet",
    "UsageError",
    "add_noise",
    "conv_flops",
    "count_flops",
    "dct_compress",
    "difficulty",
    "extract_patches",
    "gaussian_blur",
    "lr_schedule",
    "merge_patches",
    "procedural_scene",
    "psnr",
    "restore_image",
    "restore_patch",
    "restore_route",
    "ssim",
    "step_reward",
]
