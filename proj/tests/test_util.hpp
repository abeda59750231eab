// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "jqg/datastore.hpp"
#include "jqg/preprocess.hpp"

namespace jqg::testing {

inline std::filesystem::path data_dir() { return JQG_TEST_DATA_DIR; }

// u32 count, then count windows of float32 [3][125][125].
inline std::vector<std::vector<float>> read_golden(const std::string& name) {
  const auto bytes = datastore::read_file(data_dir() / name);
  std::uint32_t n = 0;
  std::memcpy(&n, bytes.data(), 4);
  const std::size_t per = 3 * 125 * 125;
  std::vector<std::vector<float>> out(n, std::vector<float>(per));
  for (std::size_t i = 0; i < n; ++i) std::memcpy(out[i].data(), bytes.data() + 4 + i * per * 4, per * 4);
  return out;
}

inline preprocess::ChannelStats golden_stats() { return datastore::read_stats(data_dir() / "preprocess_golden_stats.txt"); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("jqg_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace jqg::testing
