// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

namespace matseg {

/// Worker count for OpenMP kernels: values <= 0 select the OpenMP default.
int resolve_threads(int requested) noexcept;

}  // namespace matseg
