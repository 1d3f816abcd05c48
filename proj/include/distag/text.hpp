#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace distag {

// UTF-8 code points of s as byte slices. Invalid continuation bytes attach
// to the preceding code point.
std::vector<std::string_view> utf8_chars(std::string_view s);
std::size_t utf8_length(std::string_view s);

// Whitespace-separated words.
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace distag
