// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace allo::cli {

/// Runs one command. Returns 0 on success, 1 for usage or configuration
/// errors and 2 for runtime failures. Diagnostics go to stderr; results are
/// written only to files under the output directory.
int dispatch(int argc, const char* const* argv);

}  // namespace allo::cli
