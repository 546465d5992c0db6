#pragma once

#include <string>
#include <vector>

#include "snorm/train.hpp"

namespace snorm {

struct ImageDataset {
  Tensor train_images;
  std::vector<int> train_labels;
  Tensor val_images;
  std::vector<int> val_labels;
  long classes = 0;
};

// Standard CIFAR-10 binary batches: records of 1 label byte + 3072 pixel
// bytes (R, G, B planes of a 32x32 image). Train batches are
// data_batch_*.bin, validation is test_batch.bin. Pixels are scaled to
// [0,1] and the per-channel training mean is subtracted from both splits.
ImageDataset load_cifar10(const std::string& dir);

// Gaussian class blobs with centers `separation` within-class stddevs
// apart. Deterministic per seed; labels drawn uniformly.
ImageDataset synth_classification(std::uint64_t seed, long n_train, long n_val,
                                  long classes, double separation,
                                  Shape4 sample_shape = {1, 1, 1, 16});

struct CharDataset {
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<unsigned char> vocab;  // id -> byte, sorted

  long vocab_size() const { return static_cast<long>(vocab.size()); }
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;
};

// Byte-level vocabulary over the whole file; contiguous train prefix and
// validation suffix.
CharDataset load_char_corpus(const std::string& path, double val_fraction = 0.01);
CharDataset char_dataset_from_text(const std::string& text, double val_fraction = 0.01);

// Deterministic plain-text generator (Zipf-weighted word stream) for
// desk-scale language-model runs.
std::string synth_text(std::uint64_t seed, std::size_t bytes);

// Mini-batches of m samples in seed-controlled shuffled order (shuffle
// re-drawn every epoch); a trailing partial batch is dropped in training
// streams and kept in eval streams.
class ClassificationStream final : public BatchStream {
 public:
  ClassificationStream(const Tensor& images, const std::vector<int>& labels, long m,
                       bool shuffle, bool keep_partial = false);

  void start_epoch(long epoch, Rng& rng) override;
  bool next(Batch& out) override;
  long batches_per_epoch() const override;

 private:
  const Tensor* images_;
  const std::vector<int>* labels_;
  long m_;
  bool shuffle_, keep_partial_;
  std::vector<long> order_;
  long cursor_ = 0;
};

// m parallel contiguous character streams cut into truncated-BPTT windows.
// vary_window alternates full and half windows across the batches of one
// update, for mixing sequence lengths.
class SequenceStream final : public BatchStream {
 public:
  SequenceStream(const std::vector<int>& ids, long m, long window, bool vary_window = false);

  void start_epoch(long epoch, Rng& rng) override;
  bool next(Batch& out) override;
  long batches_per_epoch() const override;

 private:
  const std::vector<int>* ids_;
  long m_, window_;
  bool vary_window_;
  long row_len_ = 0;
  long pos_ = 0;
  long emitted_ = 0;
};

}  // namespace snorm
