#include "atg/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace atg {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(Errc::ParseError, "truncated checkpoint " + path);
  return v;
}

std::string get_bytes(std::istream& is, std::uint64_t n, const std::string& path) {
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error(Errc::ParseError, "truncated checkpoint " + path);
  }
  return s;
}

}  // namespace

const ArrayRecord* CheckpointFile::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::IoError, "cannot open " + tmp + " for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw Error(Errc::IoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(Errc::IoError, "rename " + tmp + " -> " + path + ": " + ec.message());
}

void write_checkpoint(const std::string& path, const CheckpointFile& file) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, file.metadata.size());
  os.write(file.metadata.data(), static_cast<std::streamsize>(file.metadata.size()));
  put<std::uint64_t>(os, file.arrays.size());
  for (const auto& a : file.arrays) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put<std::uint8_t>(os, a.element_size);
    put<std::uint64_t>(os, a.rows);
    put<std::uint64_t>(os, a.cols);
    os.write(a.bytes.data(), static_cast<std::streamsize>(a.bytes.size()));
  }
  write_file_atomic(path, os.str());
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot open checkpoint " + path);
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::ParseError, path + " is not a checkpoint");
  }
  if (get<std::uint32_t>(is, path) != kVersion) throw Error(Errc::ParseError, "unsupported checkpoint version");
  CheckpointFile file;
  file.metadata = get_bytes(is, get<std::uint64_t>(is, path), path);
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    ArrayRecord a;
    a.name = get_bytes(is, get<std::uint32_t>(is, path), path);
    a.element_size = get<std::uint8_t>(is, path);
    a.rows = get<std::uint64_t>(is, path);
    a.cols = get<std::uint64_t>(is, path);
    if (a.element_size != 4 && a.element_size != 8) throw Error(Errc::ParseError, "bad element size in " + path);
    const std::string data = get_bytes(is, a.rows * a.cols * a.element_size, path);
    a.bytes.assign(data.begin(), data.end());
    file.arrays.push_back(std::move(a));
  }
  return file;
}

}  // namespace atg
