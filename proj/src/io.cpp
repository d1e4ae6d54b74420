#include "bbsel/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace bbsel::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {
fs::path temp_sibling(const fs::path& path) { return path.string() + ".tmp"; }

void write_plain(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}
}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = temp_sibling(path);
  write_plain(tmp, bytes);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot rename onto '" + path.string() + "'");
  }
}

ArtifactSet::~ArtifactSet() {
  if (committed_) return;
  std::error_code ec;
  for (const auto& [tmp, final_path] : pending_) fs::remove(tmp, ec);
}

void ArtifactSet::write(const fs::path& relative, std::string_view bytes) {
  const fs::path final_path = root_ / relative;
  const fs::path tmp = temp_sibling(final_path);
  pending_.emplace_back(tmp, final_path);
  write_plain(tmp, bytes);
}

void ArtifactSet::commit() {
  for (const auto& [tmp, final_path] : pending_) {
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) fail(ErrorKind::Io, "cannot rename onto '" + final_path.string() + "'");
  }
  committed_ = true;
}

}  // namespace bbsel::io
