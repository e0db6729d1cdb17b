#pragma once

#include <string>
#include <vector>

#include "faultguard/tensor.hpp"

namespace fg {

/// Images normalized to [0,1], one [1,H,W] tensor each, paired with class
/// labels.
struct DatasetView {
  std::vector<Tensor> images;
  std::vector<int> labels;
  std::string split;
  int num_classes = 10;

  size_t size() const { return images.size(); }

  /// Copy of items [begin, begin+count).
  DatasetView slice(size_t begin, size_t count) const;
};

/// Reads the big-endian IDX pair (magic 0x803 for images, 0x801 for labels)
/// and scales pixel bytes by 1/255. Count mismatch between the two files is
/// a ConsistencyError; bad magic or truncation is a FormatError naming the
/// file.
DatasetView load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a DatasetView back out as an IDX pair (bytes = round(v*255)).
void save_idx(const DatasetView& data, const std::string& images_path,
              const std::string& labels_path);

}  // namespace fg
