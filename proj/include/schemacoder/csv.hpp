#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace schemacoder {

// RFC-4180 CSV. Fields may be quoted; quoted fields may contain commas,
// doubled quotes, and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string csv_escape(std::string_view field);

std::string csv_join(const std::vector<std::string>& fields);

}  // namespace schemacoder
