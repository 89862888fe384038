#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "wbn/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "record format assumes a little-endian host");

namespace wbn {

namespace {
constexpr char kMagic[4] = {'W', 'B', 'N', '1'};

size_t dtype_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }
}  // namespace

void write_record(std::ostream& os, Dtype dtype, const std::vector<uint64_t>& dims,
                  const void* data) {
  WBN_REQUIRE(dims.size() <= 255, "write_record: rank too large");
  os.write(kMagic, 4);
  const uint8_t dt = uint8_t(dtype), rank = uint8_t(dims.size());
  const uint16_t zero = 0;
  os.write(reinterpret_cast<const char*>(&dt), 1);
  os.write(reinterpret_cast<const char*>(&rank), 1);
  os.write(reinterpret_cast<const char*>(&zero), 2);
  os.write(reinterpret_cast<const char*>(dims.data()), std::streamsize(8 * dims.size()));
  uint64_t count = 1;
  for (uint64_t d : dims) count *= d;
  os.write(reinterpret_cast<const char*>(data), std::streamsize(count * dtype_size(dtype)));
  WBN_ENSURE(os.good(), "write_record: stream failure");
}

RecordHeader read_record_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  WBN_ENSURE(is.good() && std::memcmp(magic, kMagic, 4) == 0, "read_record: bad magic");
  uint8_t dt = 0, rank = 0;
  uint16_t zero = 0;
  is.read(reinterpret_cast<char*>(&dt), 1);
  is.read(reinterpret_cast<char*>(&rank), 1);
  is.read(reinterpret_cast<char*>(&zero), 2);
  WBN_ENSURE(is.good() && dt <= 1, "read_record: bad dtype tag");
  RecordHeader hdr;
  hdr.dtype = Dtype(dt);
  hdr.dims.resize(rank);
  is.read(reinterpret_cast<char*>(hdr.dims.data()), std::streamsize(8 * rank));
  WBN_ENSURE(is.good(), "read_record: truncated header");
  return hdr;
}

namespace {
template <class T>
std::vector<T> read_payload(std::istream& is, const RecordHeader& hdr) {
  std::vector<T> out(hdr.count());
  is.read(reinterpret_cast<char*>(out.data()), std::streamsize(out.size() * sizeof(T)));
  WBN_ENSURE(is.good() && size_t(is.gcount()) == out.size() * sizeof(T),
             "read_record: payload size mismatch (truncated file?)");
  return out;
}
}  // namespace

std::vector<float> read_record_f32(std::istream& is, RecordHeader* hdr_out) {
  RecordHeader hdr = read_record_header(is);
  WBN_ENSURE(hdr.dtype == Dtype::F32, "read_record_f32: record is not f32");
  if (hdr_out) *hdr_out = hdr;
  return read_payload<float>(is, hdr);
}

std::vector<double> read_record_f64(std::istream& is, RecordHeader* hdr_out) {
  RecordHeader hdr = read_record_header(is);
  WBN_ENSURE(hdr.dtype == Dtype::F64, "read_record_f64: record is not f64");
  if (hdr_out) *hdr_out = hdr;
  return read_payload<double>(is, hdr);
}

void write_record_file(const std::filesystem::path& p, Dtype dtype,
                       const std::vector<uint64_t>& dims, const void* data) {
  std::ofstream os(p, std::ios::binary);
  WBN_ENSURE(os.good(), "write_record_file: cannot open " + p.string());
  write_record(os, dtype, dims, data);
}

std::vector<float> read_record_file_f32(const std::filesystem::path& p, RecordHeader* hdr) {
  std::ifstream is(p, std::ios::binary);
  WBN_ENSURE(is.good(), "read_record_file: cannot open " + p.string());
  return read_record_f32(is, hdr);
}

uint64_t fnv1a_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  WBN_ENSURE(is.good(), "fnv1a_file: cannot open " + p.string());
  uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; i++) {
      h ^= uint8_t(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < std::streamsize(sizeof(buf))) break;
  }
  return h;
}

uint64_t fnv1a_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ull;
  for (const auto& f : files) {
    const std::string rel = std::filesystem::relative(f, dir).string();
    for (char c : rel) {
      h ^= uint8_t(c);
      h *= 1099511628211ull;
    }
    h ^= fnv1a_file(f);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace wbn
