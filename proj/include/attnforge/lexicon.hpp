#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "attnforge/attention.hpp"

namespace attnforge {

enum class PartOfSpeech { Noun, Verb, Both };

std::string_view to_string(PartOfSpeech pos);
std::optional<PartOfSpeech> parse_part_of_speech(std::string_view text);

class LexiconError : public std::runtime_error {
 public:
  LexiconError(const std::string& message, std::size_t line = 0)
      : std::runtime_error(message), line_(line) {}
  /// 1-based line number of a malformed entry, 0 when not line specific.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Sensitive-word lexicon. Keys are ASCII-lowercased; lookups are
/// case-insensitive.
class Lexicon {
 public:
  /// Throws LexiconError if `entries` is empty.
  Lexicon(std::map<std::string, PartOfSpeech> entries, std::string source);

  /// Adds or merges one entry; a word seen with both tags becomes Both.
  static void merge_entry(std::map<std::string, PartOfSpeech>& entries, std::string word,
                          PartOfSpeech pos);

  std::optional<PartOfSpeech> lookup(std::string_view word) const;
  bool contains(std::string_view word) const { return lookup(word).has_value(); }

  const std::map<std::string, PartOfSpeech>& entries() const { return entries_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, PartOfSpeech> entries_;
  std::string source_;
};

/// Parses `word<TAB>pos` lines. Blank lines and lines starting with `#` are
/// skipped.
Lexicon parse_lexicon(std::istream& in, std::string source);
Lexicon load_lexicon(const std::filesystem::path& path);

/// The harm-domain lexicon compiled into the library.
const Lexicon& default_lexicon();
std::string_view default_lexicon_text();

std::string ascii_lower(std::string_view text);

/// Byte-level word character test: ASCII alphanumerics, plus every non-ASCII
/// byte so UTF-8 letters stay inside their word.
bool is_word_byte(unsigned char c);

/// Token positions whose enclosing word matches the lexicon. Words are
/// reconstructed from the char spans: a word is a maximal run of word bytes
/// that are covered by tokens with no uncovered byte in between. Every token
/// contributing a byte to a matched word is included.
std::set<std::size_t> tag_sensitive(std::string_view prompt_text,
                                    const std::vector<Token>& tokens, const Lexicon& lexicon);

}  // namespace attnforge
