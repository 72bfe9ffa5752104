#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "atg/error.hpp"
#include "atg/tensor.hpp"

namespace atg {

/// One named dense array as stored on disk: shape header plus raw
/// little-endian IEEE data of 4 or 8 bytes per element.
struct ArrayRecord {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint8_t element_size = 8;
  std::vector<char> bytes;

  bool operator==(const ArrayRecord&) const = default;
};

/// Binary checkpoint: a free-form metadata string (JSON by convention) and an
/// ordered list of arrays.
struct CheckpointFile {
  std::string metadata;
  std::vector<ArrayRecord> arrays;

  const ArrayRecord* find(const std::string& name) const;
  bool operator==(const CheckpointFile&) const = default;
};

void write_checkpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::string& path);

/// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

template <typename Scalar>
ArrayRecord to_record(std::string name, const Matrix<Scalar>& m) {
  ArrayRecord r;
  r.name = std::move(name);
  r.rows = static_cast<std::uint64_t>(m.rows());
  r.cols = static_cast<std::uint64_t>(m.cols());
  r.element_size = sizeof(Scalar);
  r.bytes.resize(static_cast<std::size_t>(m.size()) * sizeof(Scalar));
  if (m.size() > 0) std::memcpy(r.bytes.data(), m.data(), r.bytes.size());
  return r;
}

/// Reads a record into a matrix of the requested precision, converting if the
/// stored precision differs.
template <typename Scalar>
Matrix<Scalar> from_record(const ArrayRecord& r) {
  Matrix<Scalar> m(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(r.cols));
  const std::size_t n = static_cast<std::size_t>(m.size());
  if (r.bytes.size() != n * r.element_size) throw Error(Errc::ParseError, "array '" + r.name + "' has wrong size");
  if (r.element_size == sizeof(Scalar)) {
    if (n > 0) std::memcpy(m.data(), r.bytes.data(), r.bytes.size());
  } else if (r.element_size == 4) {
    std::vector<float> tmp(n);
    std::memcpy(tmp.data(), r.bytes.data(), r.bytes.size());
    for (std::size_t i = 0; i < n; ++i) m.data()[i] = static_cast<Scalar>(tmp[i]);
  } else if (r.element_size == 8) {
    std::vector<double> tmp(n);
    std::memcpy(tmp.data(), r.bytes.data(), r.bytes.size());
    for (std::size_t i = 0; i < n; ++i) m.data()[i] = static_cast<Scalar>(tmp[i]);
  } else {
    throw Error(Errc::ParseError, "array '" + r.name + "' has unsupported element size");
  }
  return m;
}

}  // namespace atg
