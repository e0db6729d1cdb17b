#include "faultguard/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "faultguard/errors.hpp"

namespace fg {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_u32_be(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated IDX file: " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_u32_be(std::ofstream& f, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

DatasetView load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw FormatError("cannot open IDX file: " + images_path);
  const uint32_t magic_i = read_u32_be(fi, images_path);
  if (magic_i != kImagesMagic)
    throw FormatError("bad image magic in " + images_path + ": got " + std::to_string(magic_i) +
                      ", expected " + std::to_string(kImagesMagic));
  const uint32_t count = read_u32_be(fi, images_path);
  const uint32_t rows = read_u32_be(fi, images_path);
  const uint32_t cols = read_u32_be(fi, images_path);

  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw FormatError("cannot open IDX file: " + labels_path);
  const uint32_t magic_l = read_u32_be(fl, labels_path);
  if (magic_l != kLabelsMagic)
    throw FormatError("bad label magic in " + labels_path + ": got " + std::to_string(magic_l) +
                      ", expected " + std::to_string(kLabelsMagic));
  const uint32_t label_count = read_u32_be(fl, labels_path);
  if (label_count != count)
    throw ConsistencyError("IDX count mismatch: " + images_path + " has " +
                           std::to_string(count) + " images, " + labels_path + " has " +
                           std::to_string(label_count) + " labels");

  DatasetView out;
  out.images.reserve(count);
  out.labels.reserve(count);

  std::vector<unsigned char> pixel_buf(static_cast<size_t>(rows) * cols);
  for (uint32_t i = 0; i < count; ++i) {
    if (!fi.read(reinterpret_cast<char*>(pixel_buf.data()),
                 static_cast<std::streamsize>(pixel_buf.size())))
      throw FormatError("truncated IDX file: " + images_path);
    Tensor img = Tensor::zeros({1, static_cast<int64_t>(rows), static_cast<int64_t>(cols)});
    for (size_t p = 0; p < pixel_buf.size(); ++p)
      img.data[p] = static_cast<float>(pixel_buf[p]) / 255.0f;
    out.images.push_back(std::move(img));

    unsigned char label = 0;
    if (!fl.read(reinterpret_cast<char*>(&label), 1))
      throw FormatError("truncated IDX file: " + labels_path);
    out.labels.push_back(static_cast<int>(label));
  }
  return out;
}

void save_idx(const DatasetView& data, const std::string& images_path,
              const std::string& labels_path) {
  if (data.images.empty()) throw DataError("refusing to write empty dataset");
  const auto& shape = data.images.front().shape;

  std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
  if (!fi) throw FormatError("cannot write IDX file: " + images_path);
  write_u32_be(fi, kImagesMagic);
  write_u32_be(fi, static_cast<uint32_t>(data.images.size()));
  write_u32_be(fi, static_cast<uint32_t>(shape[1]));
  write_u32_be(fi, static_cast<uint32_t>(shape[2]));
  for (const auto& img : data.images) {
    for (float v : img.data) {
      const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0f));
      fi.write(reinterpret_cast<const char*>(&b), 1);
    }
  }

  std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
  if (!fl) throw FormatError("cannot write IDX file: " + labels_path);
  write_u32_be(fl, kLabelsMagic);
  write_u32_be(fl, static_cast<uint32_t>(data.labels.size()));
  for (int label : data.labels) {
    const unsigned char b = static_cast<unsigned char>(label);
    fl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

DatasetView DatasetView::slice(size_t begin, size_t count) const {
  if (begin + count > images.size())
    throw DataError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                    ") out of range for dataset of " + std::to_string(images.size()));
  DatasetView out;
  out.split = split;
  out.num_classes = num_classes;
  out.images.assign(images.begin() + static_cast<ptrdiff_t>(begin),
                    images.begin() + static_cast<ptrdiff_t>(begin + count));
  out.labels.assign(labels.begin() + static_cast<ptrdiff_t>(begin),
                    labels.begin() + static_cast<ptrdiff_t>(begin + count));
  return out;
}

}  // namespace fg
