#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cmls {

/// BERT-style tokenization: whitespace/punctuation pre-split followed by
/// greedy longest-match WordPiece with "##" continuations.
///
/// Punctuation is ASCII punctuation plus the Unicode General Punctuation and
/// CJK Symbols blocks; CJK ideographs are isolated as single tokens. With
/// lower_case set, only ASCII letters are folded (no accent stripping).
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lower_case = false);
  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_txt, bool lower_case = false);

  std::vector<std::string> tokenize(std::string_view text) const;
  /// [CLS] tokens [SEP], truncated to max_length ids.
  std::vector<int> encode(std::string_view text, std::size_t max_length = 512) const;

  int token_id(const std::string& token) const;
  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::vector<std::string> basic_split(std::string_view text) const;
  void wordpiece(const std::string& word, std::vector<std::string>& out) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  bool lower_case_;
  int unk_id_ = -1;
  int cls_id_ = -1;
  int sep_id_ = -1;
};

}  // namespace cmls
