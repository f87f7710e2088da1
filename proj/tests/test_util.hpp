#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "hostpred/error.hpp"

namespace test_util {

// Kind of the hostpred::Error thrown by `f`, or nullopt when nothing is thrown.
inline std::optional<hostpred::ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const hostpred::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hostpred_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::string out;
  if (FILE* f = std::fopen(p.string().c_str(), "rb")) {
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
  }
  return out;
}

}  // namespace test_util
