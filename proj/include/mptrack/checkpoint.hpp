// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#pragma once

#include <string>

#include "mptrack/autograd.hpp"

namespace mpt {

/// Checkpoint = <prefix>.bin (raw little-endian doubles, records back to back,
/// manifest order) + <prefix>.json (record names, shapes, element offsets,
/// frozen flags, and an opaque "config" object supplied by the caller).
/// Round-trips are bit-exact.
void save_checkpoint(const std::string& prefix, const ParamStore& store,
                     const std::string& config_json = "{}");

/// Loads values into an existing store; every record must match an existing
/// parameter by name and shape. A non-empty name_filter restricts loading to
/// records whose name starts with it. Returns the stored config JSON text.
std::string load_checkpoint(const std::string& prefix, ParamStore& store,
                            const std::string& name_filter = "");

/// Reads only the config object of a checkpoint manifest.
std::string read_checkpoint_config(const std::string& prefix);

bool checkpoint_exists(const std::string& prefix);

}  // namespace mpt
