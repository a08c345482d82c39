#include "ymap/captions.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "ymap/error.hpp"
#include "ymap/image_io.hpp"

namespace ymap {

namespace fs = std::filesystem;

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

bool is_stop_word(std::string_view token) {
  const std::string lower = lowercase(token);
  return std::any_of(kStopWords.begin(), kStopWords.end(),
                     [&](std::string_view s) { return lowercase(s) == lower; });
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingTable::EmbeddingTable(int dims, std::vector<std::string> words,
                               std::vector<float> raw_vectors)
    : dims_(dims), words_(std::move(words)) {
  if (dims <= 0) throw ValueError("embedding dimension must be positive");
  if (raw_vectors.size() != words_.size() * static_cast<std::size_t>(dims)) {
    throw ShapeError("embedding payload does not match word count x dims");
  }
  if (words_.empty()) throw FormatError("embedding table is empty");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate word in embeddings: " + words_[i]);
    }
  }
  lo_.assign(dims, 0.0f);
  hi_.assign(dims, 0.0f);
  for (int d = 0; d < dims; ++d) {
    float lo = raw_vectors[d];
    float hi = raw_vectors[d];
    for (std::size_t i = 1; i < words_.size(); ++i) {
      lo = std::min(lo, raw_vectors[i * dims + d]);
      hi = std::max(hi, raw_vectors[i * dims + d]);
    }
    lo_[d] = lo;
    hi_[d] = hi;
  }
  vectors_.resize(raw_vectors.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    for (int d = 0; d < dims; ++d) {
      const double span = static_cast<double>(hi_[d]) - lo_[d];
      const double raw = raw_vectors[i * dims + d];
      vectors_[i * dims + d] =
          span > 0.0 ? static_cast<float>(2.0 * (raw - lo_[d]) / span - 1.0) : 0.0f;
    }
  }
}

bool EmbeddingTable::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

int EmbeddingTable::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

std::span<const float> EmbeddingTable::normalized(int index) const {
  return std::span<const float>(vectors_).subspan(static_cast<std::size_t>(index) * dims_, dims_);
}

std::span<const float> EmbeddingTable::normalized(std::string_view word) const {
  const int i = index_of(word);
  if (i < 0) throw ValueError("word not in embedding table: " + std::string(word));
  return normalized(i);
}

std::vector<float> EmbeddingTable::denormalize(std::span<const float> v) const {
  if (static_cast<int>(v.size()) != dims_) throw ShapeError("vector length differs from dims");
  std::vector<float> out(v.size());
  for (int d = 0; d < dims_; ++d) {
    out[d] = static_cast<float>((v[d] + 1.0) * 0.5 * (static_cast<double>(hi_[d]) - lo_[d]) + lo_[d]);
  }
  return out;
}

EmbeddingTable parse_embeddings(std::string_view text, int dims) {
  std::vector<std::string> words;
  std::vector<float> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::size_t cursor = 0;
    auto next_field = [&]() -> std::string_view {
      while (cursor < line.size() && line[cursor] == ' ') ++cursor;
      const std::size_t start = cursor;
      while (cursor < line.size() && line[cursor] != ' ') ++cursor;
      return line.substr(start, cursor - start);
    };
    const std::string_view word = next_field();
    int count = 0;
    for (std::string_view field = next_field(); !field.empty(); field = next_field()) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError("embedding line " + std::to_string(line_no) + ": bad number '" +
                          std::string(field) + "'");
      }
      values.push_back(v);
      ++count;
    }
    if (count != dims) {
      throw FormatError("embedding line " + std::to_string(line_no) + " has " +
                        std::to_string(count) + " components, expected " + std::to_string(dims));
    }
    words.emplace_back(word);
  }
  if (words.empty()) throw FormatError("embedding file contains no entries");
  return EmbeddingTable(dims, std::move(words), std::move(values));
}

EmbeddingTable load_embeddings(const fs::path& path, int dims) {
  return parse_embeddings(read_text_file(path), dims);
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate vocabulary word: " + words_[i]);
    }
  }
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

int Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

Vocabulary build_vocab(std::span<const std::string> corpus, const EmbeddingTable& table, int k) {
  std::map<std::string, long long> counts;
  for (const std::string& caption : corpus) {
    for (std::string& token : tokenize(caption)) {
      if (is_stop_word(token) || !table.contains(token)) continue;
      ++counts[std::move(token)];
    }
  }
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(std::max(k, 0));
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, c] : ranked) words.push_back(std::move(w));
  return Vocabulary(std::move(words));
}

void save_vocabulary(const Vocabulary& vocab, const EmbeddingTable& table, const fs::path& path) {
  std::ostringstream out;
  out.precision(9);
  out << "# vocabulary: ordered words, then per-dimension embedding bounds\n";
  out << "dims " << table.dims() << "\n";
  out << "lower";
  for (float v : table.lower_bounds()) out << ' ' << v;
  out << "\nupper";
  for (float v : table.upper_bounds()) out << ' ' << v;
  out << "\nwords " << vocab.size() << "\n";
  for (const std::string& w : vocab.words()) out << w << "\n";
  write_text_atomic(path, out.str());
}

Vocabulary load_vocabulary(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::string key;
  int dims = -1;
  long long count = -1;
  bool saw_lower = false;
  bool saw_upper = false;
  while (count < 0 && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    fields >> key;
    if (key == "dims") {
      fields >> dims;
    } else if (key == "lower" || key == "upper") {
      int n = 0;
      float v = 0.0f;
      while (fields >> v) ++n;
      if (n != dims) throw FormatError(path.string() + ": bound count does not match dims");
      (key == "lower" ? saw_lower : saw_upper) = true;
    } else if (key == "words") {
      fields >> count;
    } else {
      throw FormatError(path.string() + ": unexpected line '" + line + "'");
    }
  }
  if (dims <= 0 || !saw_lower || !saw_upper || count < 0) {
    throw FormatError(path.string() + ": incomplete vocabulary header");
  }
  std::vector<std::string> words;
  while (static_cast<long long>(words.size()) < count && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  if (static_cast<long long>(words.size()) != count) {
    throw FormatError(path.string() + ": vocabulary truncated");
  }
  return Vocabulary(std::move(words));
}

TokenMatrix encode_caption(std::string_view caption, const Vocabulary& vocab,
                           const EmbeddingTable& table, int slots) {
  const int dims = table.dims();
  TokenMatrix out(static_cast<std::size_t>(slots) * dims, 0.0f);
  std::unordered_set<std::string> seen;
  int slot = 0;
  for (const std::string& token : tokenize(caption)) {
    if (slot >= slots) break;
    if (is_stop_word(token) || !vocab.contains(token) || !table.contains(token)) continue;
    if (!seen.insert(token).second) continue;
    const auto v = table.normalized(token);
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(slot) * dims);
    ++slot;
  }
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("cosine similarity needs equal lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na < 1e-18 || nb < 1e-18) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<DecodedToken> decode_tokens(std::span<const float> prediction, int slots,
                                        const EmbeddingTable& table, const Vocabulary& vocab,
                                        const DecodeCaptionParams& params) {
  const int dims = table.dims();
  if (prediction.size() != static_cast<std::size_t>(slots) * dims) {
    throw ShapeError("token prediction must hold slots x dims values");
  }
  // Vocabulary embeddings and their norms, resolved once.
  std::vector<std::span<const float>> candidates;
  std::vector<double> norms;
  std::vector<int> vocab_ids;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const int t = table.index_of(vocab.words()[i]);
    if (t < 0) continue;
    auto v = table.normalized(t);
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    candidates.push_back(v);
    norms.push_back(std::sqrt(n));
    vocab_ids.push_back(static_cast<int>(i));
  }
  std::vector<DecodedToken> out;
  for (int s = 0; s < slots; ++s) {
    auto row = prediction.subspan(static_cast<std::size_t>(s) * dims, dims);
    double row_norm = 0.0;
    for (float x : row) row_norm += static_cast<double>(x) * x;
    row_norm = std::sqrt(row_norm);
    if (row_norm < params.norm_threshold || row_norm == 0.0) continue;
    int best = -1;
    double best_cos = -2.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (norms[c] == 0.0) continue;
      double dot = 0.0;
      for (int d = 0; d < dims; ++d) dot += static_cast<double>(row[d]) * candidates[c][d];
      const double cos = dot / (row_norm * norms[c]);
      if (cos > best_cos) {
        best_cos = cos;
        best = static_cast<int>(c);
      }
    }
    if (best >= 0 && best_cos >= params.similarity_threshold) {
      out.push_back({vocab.words()[vocab_ids[best]], best_cos, s});
    }
  }
  return out;
}

std::vector<std::uint8_t> to_multihot(std::span<const std::string> words, const Vocabulary& vocab,
                                      int classes) {
  std::vector<std::uint8_t> out(classes, 0);
  for (const std::string& w : words) {
    const int i = vocab.index_of(w);
    if (i < 0) throw ValueError("word not in vocabulary: " + w);
    if (i >= classes) throw ValueError("vocabulary index exceeds multi-hot size for " + w);
    out[i] = 1;
  }
  return out;
}

}  // namespace ymap
