#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spgnn/volume.hpp"

// MetaImage subset: ObjectType=Image, NDims=3, DimSize, ElementSpacing,
// ElementType in {MET_USHORT, MET_UINT}, optional ElementByteOrderMSB
// (must be False), ElementDataFile last (relative path or LOCAL). Unknown
// keys are ignored.

namespace spgnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::size_t elem_size(ElementType e) {
  return e == ElementType::kUShort ? 2 : 4;
}

}  // namespace

VoxelLabelMap read_label_map(const std::string& mhd_path) {
  std::ifstream f(mhd_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + mhd_path);
  std::string contents((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());

  VoxelLabelMap v;
  bool have_object = false, have_ndims = false, have_dims = false,
       have_spacing = false, have_type = false;
  std::string datafile;
  std::size_t pos = 0;
  std::size_t payload_start = std::string::npos;
  while (pos < contents.size()) {
    std::size_t eol = contents.find('\n', pos);
    std::string line = contents.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? contents.size() : eol + 1;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "ObjectType") {
      if (value != "Image")
        throw std::runtime_error("mhd: ObjectType must be Image");
      have_object = true;
    } else if (key == "NDims") {
      if (value != "3") throw std::runtime_error("mhd: NDims must be 3");
      have_ndims = true;
    } else if (key == "DimSize") {
      std::istringstream is(value);
      if (!(is >> v.dims[0] >> v.dims[1] >> v.dims[2]) || v.dims[0] <= 0 ||
          v.dims[1] <= 0 || v.dims[2] <= 0)
        throw std::runtime_error("mhd: bad DimSize");
      have_dims = true;
    } else if (key == "ElementSpacing") {
      std::istringstream is(value);
      if (!(is >> v.spacing[0] >> v.spacing[1] >> v.spacing[2]) ||
          v.spacing[0] <= 0 || v.spacing[1] <= 0 || v.spacing[2] <= 0)
        throw std::runtime_error("mhd: bad ElementSpacing");
      have_spacing = true;
    } else if (key == "ElementType") {
      if (value == "MET_USHORT")
        v.elem = ElementType::kUShort;
      else if (value == "MET_UINT")
        v.elem = ElementType::kUInt;
      else
        throw std::runtime_error("mhd: unsupported ElementType " + value);
      have_type = true;
    } else if (key == "ElementByteOrderMSB" || key == "BinaryDataByteOrderMSB") {
      if (value != "False")
        throw std::runtime_error("mhd: big-endian payloads are unsupported");
    } else if (key == "ElementDataFile") {
      datafile = value;
      payload_start = pos;
      break;  // by convention the last header line
    }
  }
  if (!have_object || !have_ndims || !have_dims || !have_spacing ||
      !have_type || datafile.empty())
    throw std::runtime_error("mhd: missing mandatory key in " + mhd_path);

  std::size_t nbytes = 0;
  const char* payload = nullptr;
  std::string raw;
  if (datafile == "LOCAL") {
    if (payload_start == std::string::npos)
      throw std::runtime_error("mhd: LOCAL payload missing");
    payload = contents.data() + payload_start;
    nbytes = contents.size() - payload_start;
  } else {
    std::filesystem::path p =
        std::filesystem::path(mhd_path).parent_path() / datafile;
    std::ifstream rf(p, std::ios::binary);
    if (!rf) throw std::runtime_error("cannot open raw payload: " + p.string());
    raw.assign((std::istreambuf_iterator<char>(rf)),
               std::istreambuf_iterator<char>());
    payload = raw.data();
    nbytes = raw.size();
  }
  std::size_t n = v.numel();
  if (nbytes != n * elem_size(v.elem))
    throw std::runtime_error("mhd: payload length does not match DimSize");
  v.voxels.resize(n);
  const auto* b = reinterpret_cast<const unsigned char*>(payload);
  if (v.elem == ElementType::kUShort) {
    for (std::size_t i = 0; i < n; ++i)
      v.voxels[i] = static_cast<uint32_t>(b[2 * i]) |
                    (static_cast<uint32_t>(b[2 * i + 1]) << 8);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      v.voxels[i] = static_cast<uint32_t>(b[4 * i]) |
                    (static_cast<uint32_t>(b[4 * i + 1]) << 8) |
                    (static_cast<uint32_t>(b[4 * i + 2]) << 16) |
                    (static_cast<uint32_t>(b[4 * i + 3]) << 24);
  }
  return v;
}

void write_label_map(const VoxelLabelMap& v, const std::string& mhd_path) {
  if (v.voxels.size() != v.numel())
    throw std::invalid_argument("write_label_map: dims do not match data");
  uint32_t limit = v.elem == ElementType::kUShort ? 0xFFFFu : 0xFFFFFFFFu;
  for (uint32_t x : v.voxels)
    if (x > limit)
      throw std::invalid_argument("write_label_map: label exceeds element type");

  std::filesystem::path mhd(mhd_path);
  std::filesystem::path raw = mhd;
  raw.replace_extension(".raw");

  std::ofstream hf(mhd, std::ios::binary);
  if (!hf) throw std::runtime_error("cannot open for writing: " + mhd_path);
  char buf[64];
  hf << "ObjectType = Image\n";
  hf << "NDims = 3\n";
  hf << "DimSize = " << v.dims[0] << " " << v.dims[1] << " " << v.dims[2]
     << "\n";
  hf << "ElementSpacing =";
  for (double s : v.spacing) {
    std::snprintf(buf, sizeof buf, " %.17g", s);
    hf << buf;
  }
  hf << "\n";
  hf << "ElementType = "
     << (v.elem == ElementType::kUShort ? "MET_USHORT" : "MET_UINT") << "\n";
  hf << "ElementByteOrderMSB = False\n";
  hf << "ElementDataFile = " << raw.filename().string() << "\n";
  if (!hf) throw std::runtime_error("write failed: " + mhd_path);
  hf.close();

  std::ofstream rf(raw, std::ios::binary);
  if (!rf) throw std::runtime_error("cannot open for writing: " + raw.string());
  std::vector<unsigned char> bytes;
  if (v.elem == ElementType::kUShort) {
    bytes.resize(v.voxels.size() * 2);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
      bytes[2 * i] = static_cast<unsigned char>(v.voxels[i] & 0xFF);
      bytes[2 * i + 1] = static_cast<unsigned char>((v.voxels[i] >> 8) & 0xFF);
    }
  } else {
    bytes.resize(v.voxels.size() * 4);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
      bytes[4 * i] = static_cast<unsigned char>(v.voxels[i] & 0xFF);
      bytes[4 * i + 1] = static_cast<unsigned char>((v.voxels[i] >> 8) & 0xFF);
      bytes[4 * i + 2] = static_cast<unsigned char>((v.voxels[i] >> 16) & 0xFF);
      bytes[4 * i + 3] = static_cast<unsigned char>((v.voxels[i] >> 24) & 0xFF);
    }
  }
  rf.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!rf) throw std::runtime_error("write failed: " + raw.string());
}

}  // namespace spgnn
