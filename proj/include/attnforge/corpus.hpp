#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attnforge/defense.hpp"

namespace attnforge {

/// One JSONL line: {"id": ..., "prompt": ..., "label": "benign"|"attack"}.
/// id and label are optional on input; a missing id becomes the 1-based line
/// number. "group" and "success" are optional report fields.
struct CorpusEntry {
  std::string id;
  std::string prompt;
  std::optional<Label> label;
  std::optional<std::string> group;
  std::optional<bool> success;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path);
std::vector<CorpusEntry> parse_corpus(std::istream& in, const std::string& source);
void write_corpus(std::ostream& out, const std::vector<CorpusEntry>& entries);

/// FNV-1a over the canonical JSONL serialization, hex encoded.
std::string corpus_hash(const std::vector<CorpusEntry>& entries);

/// Hash of the raw bytes of a file.
std::string file_hash(const std::filesystem::path& path);

/// Seeded two-population corpus: plain informational prompts labelled benign,
/// and placeholder harmful tasks nested 1 to 3 layers deep labelled attack.
/// Under the nesting-decay synthetic provider the benign population has
/// concentrated attention and the attack population dispersed attention.
std::vector<CorpusEntry> synthetic_corpus(std::size_t benign_count, std::size_t attack_count,
                                          std::uint64_t seed);

/// The plain-prompt population alone, for held-out benign sets.
std::vector<CorpusEntry> synthetic_benign_prompts(std::size_t count, std::uint64_t seed,
                                                  const std::string& id_prefix = "benign-");

}  // namespace attnforge
