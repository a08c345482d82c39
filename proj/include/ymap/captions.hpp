#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ymap {

inline constexpr int kEmbeddingDims = 300;
inline constexpr int kVocabularySize = 2048;
inline constexpr int kCaptionSlots = 8;

// Tokens dropped before vocabulary construction and encoding.
inline constexpr std::array<std::string_view, 19> kStopWords = {
    "(", ")", ".", "a", "an", "s", "of", "on", "and", "I",
    "in", "the", "is", "it", "at", "to", "with", "for", "from"};

bool is_stop_word(std::string_view token);

// Lowercases and splits on every non-alphanumeric character.
std::vector<std::string> tokenize(std::string_view text);

// Word embeddings min-max normalized to [-1, 1] per dimension. Rank is the
// line order of the source file (GloVe files are frequency ordered).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dims, std::vector<std::string> words, std::vector<float> raw_vectors);

  int dims() const { return dims_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  bool contains(std::string_view word) const;
  // Index into words(); -1 when absent.
  int index_of(std::string_view word) const;
  std::span<const float> normalized(int index) const;
  std::span<const float> normalized(std::string_view word) const;
  const std::vector<float>& lower_bounds() const { return lo_; }
  const std::vector<float>& upper_bounds() const { return hi_; }
  // Maps a normalized vector back to raw embedding space.
  std::vector<float> denormalize(std::span<const float> v) const;

 private:
  int dims_ = 0;
  std::vector<std::string> words_;
  std::vector<float> vectors_;
  std::vector<float> lo_;
  std::vector<float> hi_;
  std::unordered_map<std::string, int> index_;
};

// Text embedding file: one word followed by `dims` decimals per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, int dims = kEmbeddingDims);
EmbeddingTable parse_embeddings(std::string_view text, int dims = kEmbeddingDims);

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  int index_of(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Top-k non-stop-word tokens present in the table, by descending count with
// lexicographic tie-break.
Vocabulary build_vocab(std::span<const std::string> corpus, const EmbeddingTable& table,
                       int k = kVocabularySize);

// Ordered word list plus the table's normalization bounds.
void save_vocabulary(const Vocabulary& vocab, const EmbeddingTable& table,
                     const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// 8 x 300 row-major. Slots hold the first distinct in-vocabulary,
// non-stop-word tokens in caption order; unused slots are zero.
using TokenMatrix = std::vector<float>;

TokenMatrix encode_caption(std::string_view caption, const Vocabulary& vocab,
                           const EmbeddingTable& table, int slots = kCaptionSlots);

struct DecodedToken {
  std::string word;
  double cosine = 0.0;
  int slot = 0;
};

struct DecodeCaptionParams {
  double norm_threshold = 0.01;
  double similarity_threshold = 0.5;
};

// Per row: skip near-zero rows, pick the vocabulary word of highest cosine
// similarity (exact linear scan), keep it if the similarity passes.
std::vector<DecodedToken> decode_tokens(std::span<const float> prediction, int slots,
                                        const EmbeddingTable& table, const Vocabulary& vocab,
                                        const DecodeCaptionParams& params = {});

std::vector<std::uint8_t> to_multihot(std::span<const std::string> words, const Vocabulary& vocab,
                                      int classes = kVocabularySize);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace ymap
