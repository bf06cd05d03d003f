// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "allo/container.hpp"
#include "allo/model.hpp"

namespace allo::lm {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Writes config, optional metadata and all parameters in layout order.
void save_checkpoint(const Model& model, const std::filesystem::path& path, const Metadata& metadata = {});

/// Errors are CheckpointError with kind io, version_mismatch, corrupted or
/// shape_mismatch. Nothing is returned on failure.
Model load_checkpoint(const std::filesystem::path& path);
/// As above, and additionally raises config_mismatch naming the first
/// architecture field that differs from `expected` (the init seed is ignored).
Model load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Metadata entries stored alongside a checkpoint (config keys excluded).
Metadata read_checkpoint_metadata(const std::filesystem::path& path);

/// Parses the "model.*" header keys of a container.
ModelConfig config_from_header(const Container& container);

}  // namespace allo::lm
