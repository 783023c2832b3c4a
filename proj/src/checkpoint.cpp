#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mad/errors.hpp"
#include "mad/net.hpp"

namespace mad {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'A', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes, std::size_t end)
      : bytes_(bytes), end_(end) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > end_) throw ValidationError("checkpoint: truncated file");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const MlpConfig& c = ckpt.config;
  c.validate();
  Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(c.input_dim);
  w.put<std::uint64_t>(c.hidden_dim);
  w.put<std::uint64_t>(c.num_hidden_layers);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.activation));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.sigma_embedding));
  w.put<std::uint64_t>(c.fourier_dim);
  w.put<std::uint8_t>(c.antisymmetrize ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ckpt.loss));
  w.put<std::int64_t>(ckpt.params.step);
  w.put<std::uint64_t>(ckpt.params.size());
  for (double v : ckpt.params.theta) w.put<double>(v);
  w.put<std::uint32_t>(checksum(w.bytes().data(), w.bytes().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() + sizeof(std::uint32_t) * 2)
    throw ValidationError("checkpoint: file too short: " + path.string());
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != checksum(bytes.data(), body))
    throw ValidationError("checkpoint: checksum mismatch: " + path.string());
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw ValidationError("checkpoint: bad magic: " + path.string());

  Reader r(bytes, body);
  for (std::size_t i = 0; i < kMagic.size(); ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  MlpConfig& c = ckpt.config;
  c.input_dim = r.get<std::uint64_t>();
  c.hidden_dim = r.get<std::uint64_t>();
  c.num_hidden_layers = r.get<std::uint64_t>();
  const auto activation = r.get<std::uint8_t>();
  const auto embedding = r.get<std::uint8_t>();
  if (activation > 1 || embedding > 1) throw ValidationError("checkpoint: bad enum value");
  c.activation = static_cast<Activation>(activation);
  c.sigma_embedding = static_cast<SigmaEmbedding>(embedding);
  c.fourier_dim = r.get<std::uint64_t>();
  c.antisymmetrize = r.get<std::uint8_t>() != 0;
  const auto loss = r.get<std::uint8_t>();
  if (loss > 1) throw ValidationError("checkpoint: bad loss kind");
  ckpt.loss = static_cast<LossKind>(loss);
  c.validate();

  ckpt.params = layout_params(c);
  ckpt.params.step = r.get<std::int64_t>();
  const auto count = r.get<std::uint64_t>();
  if (count != ckpt.params.size())
    throw ValidationError("checkpoint: parameter count does not match the stored configuration");
  for (double& v : ckpt.params.theta) v = r.get<double>();
  if (r.position() != body) throw ValidationError("checkpoint: trailing bytes");
  return ckpt;
}

}  // namespace mad
