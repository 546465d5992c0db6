#include "snorm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace snorm {

namespace {

constexpr long kCifarRecord = 3073;  // 1 label byte + 3 * 1024 pixels
constexpr long kCifarDim = 32;

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

// Appends the records of one CIFAR batch file.
void read_cifar_file(const std::string& path, std::vector<unsigned char>& pixels,
                     std::vector<int>& labels) {
  std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.size() % kCifarRecord != 0) {
    const long offset = static_cast<long>(bytes.size() / kCifarRecord) * kCifarRecord;
    throw FormatError("'" + path + "': truncated record at byte offset " +
                      std::to_string(offset) + " (file size " +
                      std::to_string(bytes.size()) + ", record size 3073)");
  }
  const long records = static_cast<long>(bytes.size()) / kCifarRecord;
  for (long r = 0; r < records; ++r) {
    const unsigned char label = bytes[static_cast<size_t>(r * kCifarRecord)];
    if (label > 9)
      throw FormatError("'" + path + "': invalid label " + std::to_string(label) +
                        " at byte offset " + std::to_string(r * kCifarRecord));
    labels.push_back(label);
    const auto* rec = bytes.data() + r * kCifarRecord + 1;
    pixels.insert(pixels.end(), rec, rec + kCifarRecord - 1);
  }
}

// Planar R/G/B bytes -> (N,32,32,3) in [0,1].
Tensor cifar_tensor(const std::vector<unsigned char>& pixels, long n) {
  Tensor t({std::max(n, 1L), kCifarDim, kCifarDim, 3});
  for (long r = 0; r < n; ++r) {
    const unsigned char* rec = pixels.data() + r * (kCifarRecord - 1);
    for (long c = 0; c < 3; ++c)
      for (long y = 0; y < kCifarDim; ++y)
        for (long x = 0; x < kCifarDim; ++x)
          t.at(r, y, x, c) = static_cast<double>(rec[c * 1024 + y * kCifarDim + x]) / 255.0;
  }
  return t;
}

}  // namespace

ImageDataset load_cifar10(const std::string& dir) {
  std::vector<unsigned char> train_pixels, val_pixels;
  std::vector<int> train_labels, val_labels;

  for (int i = 1; i <= 5; ++i) {
    const std::string path = dir + "/data_batch_" + std::to_string(i) + ".bin";
    if (std::filesystem::exists(path)) read_cifar_file(path, train_pixels, train_labels);
  }
  if (train_labels.empty())
    throw FormatError("no data_batch_*.bin files found in '" + dir + "'");
  const std::string test_path = dir + "/test_batch.bin";
  if (std::filesystem::exists(test_path)) read_cifar_file(test_path, val_pixels, val_labels);

  ImageDataset ds;
  ds.classes = 10;
  ds.train_labels = std::move(train_labels);
  ds.val_labels = std::move(val_labels);
  ds.train_images = cifar_tensor(train_pixels, static_cast<long>(ds.train_labels.size()));
  ds.val_images = cifar_tensor(val_pixels, static_cast<long>(ds.val_labels.size()));

  // Per-channel training mean, subtracted from both splits.
  double mean[3] = {0.0, 0.0, 0.0};
  const long per_channel = ds.train_images.size() / 3;
  for (long i = 0; i < ds.train_images.size(); ++i) mean[i % 3] += ds.train_images[i];
  for (double& m : mean) m /= static_cast<double>(per_channel);
  for (long i = 0; i < ds.train_images.size(); ++i) ds.train_images[i] -= mean[i % 3];
  if (!ds.val_labels.empty())
    for (long i = 0; i < ds.val_images.size(); ++i) ds.val_images[i] -= mean[i % 3];
  return ds;
}

ImageDataset synth_classification(std::uint64_t seed, long n_train, long n_val,
                                  long classes, double separation, Shape4 sample_shape) {
  if (classes < 2) throw ParamError("synthetic classification needs classes >= 2");
  if (n_train < 1) throw ParamError("synthetic classification needs n_train >= 1");
  sample_shape.n = 1;
  sample_shape.validate();
  const long dim = sample_shape.count();

  Rng rng(seed);
  // Class centers: random directions scaled to the requested separation.
  std::vector<std::vector<double>> centers(static_cast<size_t>(classes));
  for (auto& c : centers) {
    c.resize(static_cast<size_t>(dim));
    double norm = 0.0;
    for (double& v : c) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (double& v : c) v *= separation / norm;
  }

  auto fill_split = [&](long n, Tensor& images, std::vector<int>& labels) {
    images = Tensor({std::max(n, 1L), sample_shape.y, sample_shape.x, sample_shape.c});
    labels.resize(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      const long label = rng.uniform_int(0, classes - 1);
      labels[static_cast<size_t>(i)] = static_cast<int>(label);
      double* row = images.data() + i * dim;
      const auto& center = centers[static_cast<size_t>(label)];
      for (long d = 0; d < dim; ++d) row[d] = center[static_cast<size_t>(d)] + rng.normal();
    }
  };

  ImageDataset ds;
  ds.classes = classes;
  fill_split(n_train, ds.train_images, ds.train_labels);
  fill_split(n_val, ds.val_images, ds.val_labels);
  return ds;
}

std::vector<int> CharDataset::encode(const std::string& text) const {
  std::map<unsigned char, int> lookup;
  for (size_t i = 0; i < vocab.size(); ++i) lookup[vocab[i]] = static_cast<int>(i);
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char ch : text) {
    auto it = lookup.find(ch);
    if (it == lookup.end()) throw ParamError("byte outside the corpus vocabulary");
    ids.push_back(it->second);
  }
  return ids;
}

std::string CharDataset::decode(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) throw ParamError("id outside the vocabulary");
    out.push_back(static_cast<char>(vocab[static_cast<size_t>(id)]));
  }
  return out;
}

CharDataset char_dataset_from_text(const std::string& text, double val_fraction) {
  if (text.empty()) throw FormatError("empty corpus");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ParamError("val_fraction must lie in [0, 1)");

  bool present[256] = {};
  for (unsigned char ch : text) present[ch] = true;
  CharDataset ds;
  for (int b = 0; b < 256; ++b)
    if (present[b]) ds.vocab.push_back(static_cast<unsigned char>(b));

  std::vector<int> ids = ds.encode(text);
  const long split = static_cast<long>(static_cast<double>(ids.size()) * (1.0 - val_fraction));
  ds.train_ids.assign(ids.begin(), ids.begin() + split);
  ds.val_ids.assign(ids.begin() + split, ids.end());
  return ds;
}

CharDataset load_char_corpus(const std::string& path, double val_fraction) {
  std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.empty()) throw FormatError("empty corpus file '" + path + "'");
  return char_dataset_from_text(std::string(bytes.begin(), bytes.end()), val_fraction);
}

std::string synth_text(std::uint64_t seed, std::size_t bytes) {
  static const char* kWords[] = {
      "the",  "of",    "and",   "to",    "in",     "that",  "was",    "he",
      "for",  "it",    "with",  "as",    "his",    "on",    "be",     "at",
      "by",   "had",   "not",   "are",   "but",    "from",  "or",     "have",
      "an",   "they",  "which", "one",   "you",    "were",  "her",    "all",
      "she",  "there", "would", "their", "we",     "him",   "been",   "has",
      "when", "who",   "will",  "more",  "no",     "if",    "out",    "so",
      "said", "what",  "up",    "its",   "about",  "into",  "than",   "them",
      "can",  "only",  "other", "new",   "some",   "could", "time",   "these"};
  constexpr size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

  // Zipf-ish cumulative weights: word k with weight 1/(k+1).
  std::vector<double> cumulative(kWordCount);
  double total = 0.0;
  for (size_t k = 0; k < kWordCount; ++k) {
    total += 1.0 / static_cast<double>(k + 1);
    cumulative[k] = total;
  }

  Rng rng(seed);
  std::string out;
  out.reserve(bytes + 16);
  long words_in_sentence = 0;
  while (out.size() < bytes) {
    const double u = rng.uniform() * total;
    size_t k = 0;
    while (k + 1 < kWordCount && cumulative[k] < u) ++k;
    out += kWords[k];
    ++words_in_sentence;
    if (words_in_sentence >= 8 && rng.uniform() < 0.3) {
      out += ".\n";
      words_in_sentence = 0;
    } else {
      out += ' ';
    }
  }
  out.resize(bytes);
  return out;
}

ClassificationStream::ClassificationStream(const Tensor& images,
                                           const std::vector<int>& labels, long m,
                                           bool shuffle, bool keep_partial)
    : images_(&images), labels_(&labels), m_(m), shuffle_(shuffle),
      keep_partial_(keep_partial) {
  if (m_ < 1) throw ParamError("batch size must be >= 1");
  if (images.shape().n != static_cast<long>(labels.size()))
    throw ContractError("image/label count mismatch");
}

void ClassificationStream::start_epoch(long, Rng& rng) {
  order_.resize(static_cast<size_t>(images_->shape().n));
  for (long i = 0; i < images_->shape().n; ++i) order_[static_cast<size_t>(i)] = i;
  if (shuffle_) rng.shuffle(order_);
  cursor_ = 0;
}

bool ClassificationStream::next(Batch& out) {
  const long total = static_cast<long>(order_.size());
  if (total == 0) return false;
  const long remaining = total - cursor_;
  if (remaining <= 0) return false;
  long take = m_;
  if (remaining < m_) {
    if (!keep_partial_) return false;
    take = remaining;
  }
  const Shape4 s = images_->shape();
  out = Batch{};
  out.x = Tensor({take, s.y, s.x, s.c});
  out.labels.resize(static_cast<size_t>(take));
  const long sample = s.y * s.x * s.c;
  for (long i = 0; i < take; ++i) {
    const long src = order_[static_cast<size_t>(cursor_ + i)];
    std::copy(images_->data() + src * sample, images_->data() + (src + 1) * sample,
              out.x.data() + i * sample);
    out.labels[static_cast<size_t>(i)] = (*labels_)[static_cast<size_t>(src)];
  }
  cursor_ += take;
  return true;
}

long ClassificationStream::batches_per_epoch() const {
  const long total = static_cast<long>(labels_->size());
  return keep_partial_ ? (total + m_ - 1) / m_ : total / m_;
}

SequenceStream::SequenceStream(const std::vector<int>& ids, long m, long window,
                               bool vary_window)
    : ids_(&ids), m_(m), window_(window), vary_window_(vary_window) {
  if (m_ < 1 || window_ < 1) throw ParamError("sequence stream needs m >= 1 and window >= 1");
  row_len_ = (static_cast<long>(ids.size()) - 1) / m_;
  if (row_len_ < 1)
    throw ParamError("corpus too short for " + std::to_string(m_) + " parallel streams");
}

void SequenceStream::start_epoch(long, Rng&) {
  pos_ = 0;
  emitted_ = 0;
}

bool SequenceStream::next(Batch& out) {
  long w = window_;
  if (vary_window_ && (emitted_ % 2 == 1)) w = std::max(1L, window_ / 2);
  if (pos_ + w > row_len_) return false;

  out = Batch{};
  out.seq_m = m_;
  out.seq_steps = w;
  out.seq_inputs.resize(static_cast<size_t>(m_ * w));
  out.seq_targets.resize(static_cast<size_t>(m_ * w));
  for (long r = 0; r < m_; ++r) {
    const long base = r * row_len_ + pos_;
    for (long t = 0; t < w; ++t) {
      out.seq_inputs[static_cast<size_t>(r * w + t)] = (*ids_)[static_cast<size_t>(base + t)];
      out.seq_targets[static_cast<size_t>(r * w + t)] =
          (*ids_)[static_cast<size_t>(base + t + 1)];
    }
  }
  pos_ += w;
  ++emitted_;
  return true;
}

long SequenceStream::batches_per_epoch() const {
  if (!vary_window_) return row_len_ / window_;
  long pos = 0, count = 0;
  while (true) {
    const long w = (count % 2 == 1) ? std::max(1L, window_ / 2) : window_;
    if (pos + w > row_len_) break;
    pos += w;
    ++count;
  }
  return count;
}

}  // namespace snorm
