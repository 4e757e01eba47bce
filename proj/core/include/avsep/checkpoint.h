// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "avsep/params.h"

namespace avsep {

/// Header contents of a model checkpoint, readable without touching blobs.
struct CheckpointInfo {
  std::string kind;         // which model family the weights belong to
  std::string config_json;  // model configuration echo
  std::string extra_json;   // caller metadata (epoch counters, best loss, ...)
  long long adam_steps = 0;
  bool has_optimizer = false;
  std::vector<std::string> tensor_names;  // registration order
};

/// Writes params (and, if include_optimizer, the Adam moment buffers and step
/// count) to a single binary file. kind tags the model family so a file can
/// never be loaded into the wrong architecture. config_json and extra_json
/// must be valid JSON. dtype selects the blob precision: "f64" (default,
/// lossless) or "f32".
void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_json, const ParamStore& params,
                     const std::string& extra_json = "{}",
                     bool include_optimizer = true, const std::string& dtype = "f64");

/// Reads only the header.
CheckpointInfo peek_checkpoint(const std::string& path);

/// Loads weights (and optimizer state when present) into a ParamStore whose
/// tensors were already registered by the model constructor. The file must
/// carry exactly the registered tensor set with matching shapes, and its kind
/// must equal expected_kind.
CheckpointInfo load_checkpoint(const std::string& path, const std::string& expected_kind,
                               ParamStore& params);

}  // namespace avsep
