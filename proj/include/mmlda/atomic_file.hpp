#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

namespace mmlda {

/// Writes `path` by streaming into a sibling temporary file and renaming it
/// into place once `writer` returns. On any exception the temporary is
/// removed and `path` is left untouched.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

}  // namespace mmlda
