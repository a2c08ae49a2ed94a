#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldr/numerics.hpp"

namespace ldr {

using Labels = std::vector<std::size_t>;

/// Dense row-major feature matrix with contiguous class indices.
struct Dataset {
  std::string name;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t K = 0;
  RealVec features;                // n * d
  Labels labels;                   // in [0, K)
  std::vector<double> label_table; // label_table[k] is the original label of class k
  std::vector<char> probe;         // rows appended by hand rather than drawn or parsed

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }

  /// Throws DomainError when a shape or label invariant is broken.
  void validate() const;

  /// Class index of an original label value, if present.
  std::optional<std::size_t> class_of(double original_label) const;
};

/// Rows `idx` of `data`, keeping K and the label table.
Dataset subset(const Dataset& data, std::span<const std::size_t> idx);

/// Parses LIBSVM text: `label idx:value ...` with 1-based strictly increasing indices. Blank
/// lines and `#` comments are skipped. Labels are remapped to [0, K) in sorted order.
Dataset parse_libsvm(std::istream& in, const std::string& name = "");

/// Parses and concatenates several files under one label map and the widest feature count.
Dataset load_libsvm(const std::vector<std::filesystem::path>& files, const std::string& name = "");

/// Same as load_libsvm, but reuses a binary cache in `cache_dir` keyed by the files' content hash.
Dataset load_libsvm_cached(const std::vector<std::filesystem::path>& files, const std::filesystem::path& cache_dir,
                           const std::string& name = "");

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

/// Binary cache: magic "LDRDATA1", then little-endian u64 n, d, K, content key, followed by the
/// label table, labels and features as little-endian 64-bit values.
void write_dataset_cache(const Dataset& data, std::uint64_t key, const std::filesystem::path& path);

/// Returns nothing when the file is missing, truncated, or stamped with a different key.
std::optional<Dataset> read_dataset_cache(const std::filesystem::path& path, std::uint64_t key);

}  // namespace ldr
