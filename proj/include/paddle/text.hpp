#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace paddle::text {

// Shortest representation that parses back to the identical double.
std::string format_real(double v);
std::optional<double> parse_real(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

// Splits one delimited line. Surrounding double quotes on a cell are removed;
// embedded delimiters inside quotes are not supported (sensor exports never
// emit them).
std::vector<std::string_view> split(std::string_view line, char delim = ',');

// Splits into lines, dropping '\r' and a trailing empty line.
std::vector<std::string_view> lines(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace paddle::text
