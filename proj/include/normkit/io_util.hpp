#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace normkit::io {

// Writes to a temporary sibling file and renames it over `path`.
void write_atomic(const std::string& path, std::string_view data);

std::string read_file(const std::string& path);

// Calls fn(line, 1-based line number) for each line, '\r' stripped.
void for_each_line(const std::string& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

std::vector<std::string_view> split_tabs(std::string_view line);

}  // namespace normkit::io
