// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace pathroute {

/// Keeps freed tape buffers in the heap instead of returning them to the OS
/// after every step. No effect outside glibc.
void tune_allocator();

}  // namespace pathroute
