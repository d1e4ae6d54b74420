#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bbsel/common.hpp"

namespace bbsel::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
 public:
  template <class T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_bytes(std::string_view bytes) { out_.append(bytes); }
  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
  T get() {
    if (bytes_.size() - pos_ < sizeof(T)) fail(ErrorKind::Format, what_ + ": truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view get_bytes(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::Format, what_ + ": truncated");
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) fail(ErrorKind::Format, what_ + ": unexpected trailing bytes");
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Collects artifacts as temp files and renames them all on commit. Temp
/// files left by an uncommitted set are removed on destruction.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::filesystem::path root) : root_(std::move(root)) {}
  ArtifactSet(const ArtifactSet&) = delete;
  ArtifactSet& operator=(const ArtifactSet&) = delete;
  ~ArtifactSet();

  void write(const std::filesystem::path& relative, std::string_view bytes);
  void commit();
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending_;  // temp -> final
  bool committed_ = false;
};

}  // namespace bbsel::io
