#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emoreason::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool is_ascii_letter(char c);

// Bytes >= 0x80 count as letters so UTF-8 sequences stay inside a word.
bool is_word_char(char c);

// Lowercased runs of word characters and digits. Used by the embedding
// providers; deterministic for a given input.
std::vector<std::string> word_tokens(std::string_view s);

// Lowercased runs of letters only (digits and apostrophes split words).
std::vector<std::string> letter_tokens(std::string_view s);

// Case-insensitive (ASCII) search for the last occurrence of `needle`.
std::string_view::size_type rfind_icase(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename so readers never see partial content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace emoreason::text
