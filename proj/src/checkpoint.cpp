#include <limits>

#include "bbsel/common.hpp"
#include "bbsel/io.hpp"
#include "bbsel/train.hpp"

namespace bbsel {

std::string encode_checkpoint(const Network& net, ParamPrecision precision) {
  const ArchitectureConfig& c = net.config();
  io::ByteWriter w;
  w.put_bytes("LSNN");
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.variant));
  w.put<std::int32_t>(c.input_side);
  w.put<std::int32_t>(c.num_classes);
  w.put<std::int32_t>(c.width_scale.num);
  w.put<std::int32_t>(c.width_scale.den);
  w.put<std::uint64_t>(c.seed);
  const Shape& in = net.input_shape();
  w.put<std::int32_t>(in.channels);
  w.put<std::int32_t>(in.height);
  w.put<std::int32_t>(in.width);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const Layer& l : net.layers()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.spec.kind));
    w.put<std::int32_t>(l.spec.units);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.labels().size()));
  for (int label : net.labels()) w.put<std::int32_t>(label);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(precision));
  w.put<std::uint64_t>(net.parameter_count());
  for (double p : net.parameters()) {
    if (precision == ParamPrecision::F64)
      w.put<double>(p);
    else
      w.put<float>(static_cast<float>(p));
  }
  return w.take();
}

Network decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.get_bytes(4) != "LSNN") fail(ErrorKind::Format, "checkpoint: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    fail(ErrorKind::Format, "checkpoint: unsupported version " + std::to_string(version));
  ArchitectureConfig c;
  const auto variant = r.get<std::uint8_t>();
  if (variant > static_cast<std::uint8_t>(Variant::Custom)) fail(ErrorKind::Format, "checkpoint: unknown variant");
  c.variant = static_cast<Variant>(variant);
  c.input_side = r.get<std::int32_t>();
  c.num_classes = r.get<std::int32_t>();
  c.width_scale.num = r.get<std::int32_t>();
  c.width_scale.den = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  Shape in;
  in.channels = r.get<std::int32_t>();
  in.height = r.get<std::int32_t>();
  in.width = r.get<std::int32_t>();
  const auto n_layers = r.get<std::uint32_t>();
  if (n_layers > 4096) fail(ErrorKind::Format, "checkpoint: implausible layer count");
  std::vector<LayerSpec> specs;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto kind = r.get<std::uint8_t>();
    if (kind < 1 || kind > 4) fail(ErrorKind::Format, "checkpoint: unknown layer kind");
    specs.push_back({static_cast<LayerKind>(kind), r.get<std::int32_t>()});
  }
  const auto n_labels = r.get<std::uint32_t>();
  if (n_labels > r.remaining() / 4) fail(ErrorKind::Format, "checkpoint: truncated label map");
  std::vector<int> labels(n_labels);
  for (int& l : labels) l = r.get<std::int32_t>();
  const auto prec = r.get<std::uint8_t>();
  if (prec != 4 && prec != 8) fail(ErrorKind::Format, "checkpoint: bad parameter width");
  const auto count = r.get<std::uint64_t>();

  Network net = [&] {
    try {
      return Network::empty(c, in, specs);
    } catch (const Error& e) {
      fail(ErrorKind::Format, std::string("checkpoint: inconsistent layer table: ") + e.what());
    }
  }();
  if (count != net.parameter_count()) fail(ErrorKind::Format, "checkpoint: parameter count does not match layers");
  if (r.remaining() != count * prec) fail(ErrorKind::Format, "checkpoint: truncated or oversized parameter blob");
  for (double& p : net.parameters()) p = prec == 8 ? r.get<double>() : static_cast<double>(r.get<float>());
  r.expect_end();
  try {
    net.set_labels(std::move(labels));
  } catch (const Error&) {
    fail(ErrorKind::Format, "checkpoint: label map does not match outputs");
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path, ParamPrecision precision) {
  io::write_file_atomic(path, encode_checkpoint(net, precision));
}

Network load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace bbsel
