#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace nrs {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a truncated file. Creates parent directories.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace nrs
