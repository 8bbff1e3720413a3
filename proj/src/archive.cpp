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

#include "xtrans/archive.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace xtrans::archive {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {
constexpr std::array<char, 8> kMagic{'X', 'T', 'R', 'A', 'N', 'S', 'A', 'R'};

template <class U>
void put_pod(std::ostream& os, U v)
{
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get_pod(std::istream& is, const std::filesystem::path& p)
{
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("truncated archive " + p.string());
  return v;
}
} // namespace

bool Archive::has(const std::string& name) const
{
  for (const auto& [n, t] : tensors)
    if (n == name)
      return true;
  return false;
}

const TensorF& Archive::get(const std::string& name) const
{
  for (const auto& [n, t] : tensors)
    if (n == name)
      return t;
  throw IoError("archive has no tensor '" + name + "'");
}

void Archive::put(std::string name, TensorF t)
{
  for (auto& [n, existing] : tensors)
    if (n == name) {
      existing = std::move(t);
      return;
    }
  tensors.emplace_back(std::move(name), std::move(t));
}

void save(const std::filesystem::path& path, const Archive& archive)
{
  nlohmann::json index = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += static_cast<uint64_t>(t.numel()) * sizeof(float);
  }
  const nlohmann::json header = {{"kind", archive.kind}, {"meta", archive.meta}, {"tensors", index}};
  const std::string text = header.dump();

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw IoError("cannot write " + tmp.string());
    os.write(kMagic.data(), kMagic.size());
    put_pod<uint32_t>(os, kFormatVersion);
    put_pod<uint32_t>(os, 0);
    put_pod<uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors)
      os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!os)
      throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive load(const std::filesystem::path& path, const std::string& expected_kind)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw VersionError(path.string() + " is not an xtrans archive");
  const auto version = get_pod<uint32_t>(is, path);
  if (version != kFormatVersion)
    throw VersionError(path.string() + " has archive format version " + std::to_string(version) + ", expected " +
                       std::to_string(kFormatVersion));
  get_pod<uint32_t>(is, path);
  const auto header_len = get_pod<uint64_t>(is, path);
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len)))
    throw IoError("truncated archive header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt archive header in " + path.string() + ": " + e.what());
  }
  Archive out;
  out.kind = header.value("kind", "");
  if (!expected_kind.empty() && out.kind != expected_kind)
    throw VersionError(path.string() + " holds a '" + out.kind + "' archive, expected '" + expected_kind + "'");
  out.meta = header.value("meta", nlohmann::json::object());

  const auto data_start = is.tellg();
  for (const auto& entry : header.at("tensors")) {
    const Shape shape = entry.at("shape").get<Shape>();
    TensorF t(shape);
    is.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
    if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float))))
      throw IoError("truncated tensor data in " + path.string());
    out.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

} // namespace xtrans::archive
