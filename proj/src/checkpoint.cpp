#include "spgnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spgnn {

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

float bits_to_float(uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

uint32_t float_to_bits(float v) {
  uint32_t b;
  std::memcpy(&b, &v, 4);
  return b;
}

void save_checkpoint(const NamedTensors& tensors, const std::string& path) {
  std::string out;
  out += "SPGN";
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF)
      throw std::invalid_argument("checkpoint: tensor name too long");
    put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    if (t.ndim() > 255)
      throw std::invalid_argument("checkpoint: too many dims");
    out.push_back(static_cast<char>(t.ndim()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    for (std::size_t i = 0; i < t.numel(); ++i)
      put_u32(out, float_to_bits(t.at(i)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  std::size_t n = buf.size(), pos = 0;
  auto need = [&](std::size_t k) {
    if (pos + k > n) throw std::runtime_error("checkpoint: truncated file");
  };
  need(12);
  if (std::memcmp(p, "SPGN", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  uint32_t version = get_u32(p + 4);
  if (version != 1) throw std::runtime_error("checkpoint: unknown version");
  uint32_t count = get_u32(p + 8);
  pos = 12;
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    need(2);
    uint16_t name_len = get_u16(p + pos);
    pos += 2;
    need(name_len);
    std::string name(buf.data() + pos, name_len);
    pos += name_len;
    need(1);
    int ndim = p[pos];
    pos += 1;
    Shape shape(static_cast<std::size_t>(ndim));
    need(static_cast<std::size_t>(ndim) * 4);
    for (int d = 0; d < ndim; ++d) {
      shape[static_cast<std::size_t>(d)] =
          static_cast<int>(get_u32(p + pos));
      pos += 4;
    }
    std::size_t numel = shape_numel(shape);
    need(numel * 4);
    std::vector<float> data(numel);
    for (std::size_t e = 0; e < numel; ++e) {
      data[e] = bits_to_float(get_u32(p + pos));
      pos += 4;
    }
    out.emplace_back(std::move(name), Tensor::from(std::move(shape),
                                                   std::move(data)));
  }
  return out;
}

const Tensor& find_tensor(const NamedTensors& ts, const std::string& name) {
  for (const auto& [n, t] : ts)
    if (n == name) return t;
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

bool has_tensor(const NamedTensors& ts, const std::string& name) {
  for (const auto& [n, t] : ts)
    if (n == name) return true;
  return false;
}

}  // namespace spgnn
