// Copyright 2026 The xtrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "xtrans/tensor.hpp"

/// Versioned container of named float32 tensors plus a JSON metadata block.
///
/// Layout: 8-byte magic "XTRANSAR", u32 format version, u32 reserved,
/// u64 header length, UTF-8 JSON header, then raw little-endian float32 data
/// at the offsets listed in the header.
namespace xtrans::archive {

inline constexpr uint32_t kFormatVersion = 1;

struct Archive
{
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, TensorF>> tensors;

  bool has(const std::string& name) const;
  const TensorF& get(const std::string& name) const;
  void put(std::string name, TensorF t);
};

/// Writes to a temporary sibling and renames, so readers never see a torn file.
void save(const std::filesystem::path& path, const Archive& archive);
/// Throws VersionError on a foreign magic, format version or kind.
Archive load(const std::filesystem::path& path, const std::string& expected_kind);

} // namespace xtrans::archive
