#include "attnforge/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace attnforge {

std::string_view to_string(PartOfSpeech pos) {
  switch (pos) {
    case PartOfSpeech::Noun:
      return "noun";
    case PartOfSpeech::Verb:
      return "verb";
    case PartOfSpeech::Both:
      return "both";
  }
  return "noun";
}

std::optional<PartOfSpeech> parse_part_of_speech(std::string_view text) {
  const std::string lower = ascii_lower(text);
  if (lower == "noun") return PartOfSpeech::Noun;
  if (lower == "verb") return PartOfSpeech::Verb;
  if (lower == "both") return PartOfSpeech::Both;
  return std::nullopt;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

Lexicon::Lexicon(std::map<std::string, PartOfSpeech> entries, std::string source)
    : entries_(std::move(entries)), source_(std::move(source)) {
  if (entries_.empty()) {
    throw LexiconError("lexicon '" + source_ + "' has no entries");
  }
}

void Lexicon::merge_entry(std::map<std::string, PartOfSpeech>& entries, std::string word,
                          PartOfSpeech pos) {
  word = ascii_lower(word);
  auto [it, inserted] = entries.emplace(std::move(word), pos);
  if (!inserted && it->second != pos) it->second = PartOfSpeech::Both;
}

std::optional<PartOfSpeech> Lexicon::lookup(std::string_view word) const {
  auto it = entries_.find(ascii_lower(word));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Lexicon parse_lexicon(std::istream& in, std::string source) {
  std::map<std::string, PartOfSpeech> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty() || trim(view).front() == '#') continue;

    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw LexiconError(source + ":" + std::to_string(line_no) + ": expected word<TAB>pos",
                         line_no);
    }
    const std::string_view word = trim(view.substr(0, tab));
    const auto pos = parse_part_of_speech(trim(view.substr(tab + 1)));
    if (word.empty() || !pos) {
      throw LexiconError(source + ":" + std::to_string(line_no) + ": malformed entry", line_no);
    }
    for (unsigned char c : word) {
      if (!is_word_byte(c)) {
        throw LexiconError(
            source + ":" + std::to_string(line_no) + ": word contains a non-word character",
            line_no);
      }
    }
    Lexicon::merge_entry(entries, std::string(word), *pos);
  }
  return Lexicon(std::move(entries), std::move(source));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw LexiconError("cannot open lexicon file '" + path.string() + "'");
  }
  return parse_lexicon(in, path.string());
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = [] {
    std::istringstream in{std::string(default_lexicon_text())};
    return parse_lexicon(in, "<builtin>");
  }();
  return lexicon;
}

std::set<std::size_t> tag_sensitive(std::string_view prompt_text,
                                    const std::vector<Token>& tokens, const Lexicon& lexicon) {
  // Owner token of every byte, or npos for bytes outside every span.
  constexpr std::size_t kUncovered = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(prompt_text.size(), kUncovered);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const auto end = std::min(tokens[k].end, prompt_text.size());
    for (std::size_t p = tokens[k].start; p < end; ++p) owner[p] = k;
  }

  std::set<std::size_t> sensitive;
  std::size_t p = 0;
  while (p < prompt_text.size()) {
    if (owner[p] == kUncovered || !is_word_byte(static_cast<unsigned char>(prompt_text[p]))) {
      ++p;
      continue;
    }
    const std::size_t start = p;
    std::vector<std::size_t> members;
    while (p < prompt_text.size() && owner[p] != kUncovered &&
           is_word_byte(static_cast<unsigned char>(prompt_text[p]))) {
      if (members.empty() || members.back() != owner[p]) members.push_back(owner[p]);
      ++p;
    }
    if (lexicon.contains(prompt_text.substr(start, p - start))) {
      sensitive.insert(members.begin(), members.end());
    }
  }
  return sensitive;
}

}  // namespace attnforge
