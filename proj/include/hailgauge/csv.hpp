#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace hailgauge::csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
// Returns false at end of input. `line` receives the physical line number the record started on.
bool read_record(std::istream& in, Record& out, std::size_t& line);

std::vector<Record> read_all(std::istream& in);

// Quotes the field only when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

} // namespace hailgauge::csv
