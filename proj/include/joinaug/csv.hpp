#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace joinaug::csv {

using Record = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF or
/// LF line endings. Throws Error(format) on an unterminated quote.
std::vector<Record> parse(std::string_view text);

/// Quotes a field when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

}  // namespace joinaug::csv
