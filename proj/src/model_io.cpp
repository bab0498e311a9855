#include "emopipe/nn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <zlib.h>

#include "emopipe/error.hpp"

namespace emopipe::nn {
namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void floats(std::span<const float> vs) {
    for (float v : vs) f32(v);
  }
  void bytes(std::span<const std::uint8_t> bs) { out_.insert(out_.end(), bs.begin(), bs.end()); }

  void labels(const std::vector<std::string>& labels) {
    if (labels.size() > 255) throw Error(ErrorKind::DimensionMismatch, "more than 255 class labels");
    u8(static_cast<std::uint8_t>(labels.size()));
    for (const auto& l : labels) {
      if (l.size() > 255) throw Error(ErrorKind::DimensionMismatch, "class label longer than 255 bytes");
      u8(static_cast<std::uint8_t>(l.size()));
      out_.insert(out_.end(), l.begin(), l.end());
    }
  }

  std::vector<std::uint8_t> finish() {
    u32(crc32_of(out_));
    return std::move(out_);
  }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t position() const { return pos_; }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw Error(ErrorKind::TruncatedFile,
                  fmt::format("need {} bytes at offset {}, file has {}", n, pos_, bytes_.size()));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto s = take(2);
    return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
  }
  std::uint32_t u32() {
    const auto s = take(4);
    return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
           (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }

  std::vector<float> floats(std::size_t n) {
    // Check the size before allocating so a corrupt count cannot blow up memory.
    if (n > (bytes_.size() - pos_) / 4) {
      throw Error(ErrorKind::TruncatedFile, fmt::format("need {} floats at offset {}", n, pos_));
    }
    const auto s = take(n * 4);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(s[i * 4 + b]) << (8 * b);
      out[i] = std::bit_cast<float>(bits);
    }
    return out;
  }

  std::vector<std::string> labels() {
    const std::size_t count = u8();
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
      const auto s = take(u8());
      out.emplace_back(s.begin(), s.end());
    }
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, ModelKind kind, const std::vector<std::string>& labels) {
  w.bytes(kModelMagic);
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.labels(labels);
}

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xffffffffu) throw Error(ErrorKind::DimensionMismatch, "dimension exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

MlpModel read_mlp(Reader& r, std::vector<std::string> labels) {
  MlpModel m;
  m.class_labels = std::move(labels);
  const std::uint32_t n_layers = r.u32();
  std::vector<double> dropout_after;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    DenseLayer<float> layer;
    layer.in_dim = r.u32();
    layer.out_dim = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 1) throw Error(ErrorKind::DimensionMismatch, fmt::format("unknown activation tag {}", act));
    layer.activation = static_cast<Activation>(act);
    dropout_after.push_back(r.f32());
    m.layers.push_back(std::move(layer));
  }
  for (auto& layer : m.layers) {
    layer.weights = r.floats(layer.in_dim * layer.out_dim);
    layer.biases = r.floats(layer.out_dim);
  }
  if (!dropout_after.empty()) dropout_after.pop_back();
  m.dropout_rates = std::move(dropout_after);
  return m;
}

CnnModel read_cnn(Reader& r, std::vector<std::string> labels) {
  CnnModel m;
  m.class_labels = std::move(labels);
  m.grid_size = static_cast<int>(r.u32());
  m.filters = static_cast<int>(r.u32());
  m.kernel = static_cast<int>(r.u32());
  m.pool = static_cast<int>(r.u32());
  m.dropout_rate = r.f32();
  m.dense.in_dim = r.u32();
  m.dense.out_dim = r.u32();
  m.dense.activation = Activation::Softmax;
  m.conv_weights = r.floats(static_cast<std::size_t>(m.filters) * m.kernel * m.kernel);
  m.conv_biases = r.floats(static_cast<std::size_t>(m.filters));
  m.dense.weights = r.floats(m.dense.in_dim * m.dense.out_dim);
  m.dense.biases = r.floats(m.dense.out_dim);
  return m;
}

}  // namespace

std::vector<std::uint8_t> save_model(const MlpModel& model) {
  model.validate();
  Writer w;
  write_header(w, ModelKind::Mlp, model.class_labels);
  w.u32(checked_u32(model.layers.size()));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    w.u32(checked_u32(layer.in_dim));
    w.u32(checked_u32(layer.out_dim));
    w.u8(static_cast<std::uint8_t>(layer.activation));
    w.f32(l < model.dropout_rates.size() ? static_cast<float>(model.dropout_rates[l]) : 0.0f);
  }
  for (const auto& layer : model.layers) {
    w.floats(layer.weights);
    w.floats(layer.biases);
  }
  return w.finish();
}

std::vector<std::uint8_t> save_model(const CnnModel& model) {
  model.validate();
  Writer w;
  write_header(w, ModelKind::Cnn, model.class_labels);
  w.u32(checked_u32(static_cast<std::size_t>(model.grid_size)));
  w.u32(checked_u32(static_cast<std::size_t>(model.filters)));
  w.u32(checked_u32(static_cast<std::size_t>(model.kernel)));
  w.u32(checked_u32(static_cast<std::size_t>(model.pool)));
  w.f32(static_cast<float>(model.dropout_rate));
  w.u32(checked_u32(model.dense.in_dim));
  w.u32(checked_u32(model.dense.out_dim));
  w.floats(model.conv_weights);
  w.floats(model.conv_biases);
  w.floats(model.dense.weights);
  w.floats(model.dense.biases);
  return w.finish();
}

std::vector<std::uint8_t> save_model(const AnyModel& model) {
  return std::visit([](const auto& m) { return save_model(m); }, model);
}

AnyModel load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kModelMagic.size()) throw Error(ErrorKind::TruncatedFile, "file shorter than magic");
  if (!std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::BadMagic, "not an EMO1 model file");
  }
  if (bytes.size() < kModelMagic.size() + 4) throw Error(ErrorKind::TruncatedFile, "file ends inside header");

  // The last four bytes are the checksum; structure is parsed from the rest so a
  // short file reports truncation rather than a checksum failure.
  Reader r(bytes.first(bytes.size() - 4));
  r.take(kModelMagic.size());
  const std::uint16_t version = r.u16();
  if (version != kModelVersion) {
    throw Error(ErrorKind::UnsupportedVersion, fmt::format("model version {}", version));
  }
  const std::uint8_t kind = r.u8();
  auto labels = r.labels();

  AnyModel model;
  if (kind == static_cast<std::uint8_t>(ModelKind::Mlp)) {
    model = read_mlp(r, std::move(labels));
  } else if (kind == static_cast<std::uint8_t>(ModelKind::Cnn)) {
    model = read_cnn(r, std::move(labels));
  } else {
    throw Error(ErrorKind::UnsupportedVersion, fmt::format("model kind {}", kind));
  }

  const std::size_t body = r.position();
  if (body + 4 != bytes.size()) {
    throw Error(ErrorKind::ChecksumMismatch,
                fmt::format("{} unexpected trailing bytes", bytes.size() - body - 4));
  }
  const auto tail = bytes.subspan(body, 4);
  const std::uint32_t stored = static_cast<std::uint32_t>(tail[0]) | (static_cast<std::uint32_t>(tail[1]) << 8) |
                               (static_cast<std::uint32_t>(tail[2]) << 16) |
                               (static_cast<std::uint32_t>(tail[3]) << 24);
  if (stored != crc32_of(bytes.first(body))) throw Error(ErrorKind::ChecksumMismatch, "CRC-32 differs");

  std::visit([](const auto& m) { m.validate(); }, model);
  return model;
}

void write_model_file(const std::filesystem::path& path, const AnyModel& model) {
  const auto bytes = save_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, fmt::format("short write to {}", path.string()));
}

AnyModel read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open model file {}", path.string()));
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_model(bytes);
}

}  // namespace emopipe::nn
