#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "wbn/io.hpp"

namespace wbn {

using nlohmann::json;

void write_dataset_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_config(m.cfg, dir / "config.json");
  json j;
  j["format"] = "wbn-dataset-1";
  j["seed"] = m.seed;
  j["n_train"] = m.n_train;
  j["n_test"] = m.n_test;
  j["config_file"] = "config.json";
  // Record order inside each sample file: eta, then one complex record per
  // band level ascending, stored as [2, n_src, n_rcv, n_omega] (re, im).
  j["sample_record_order"] = "eta,bands_ascending_level";
  std::ofstream os(dir / "manifest.json");
  WBN_ENSURE(os.good(), "write_dataset_manifest: cannot open manifest");
  os << j.dump(2) << "\n";
}

DatasetManifest read_dataset_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  WBN_ENSURE(is.good(), "read_dataset_manifest: missing manifest.json in " + dir.string());
  json j;
  is >> j;
  DatasetManifest m;
  m.cfg = load_config(dir / j.value("config_file", "config.json"));
  m.seed = j.value("seed", uint64_t(0));
  m.n_train = j.value("n_train", 0);
  m.n_test = j.value("n_test", 0);
  return m;
}

std::filesystem::path sample_path(const std::filesystem::path& dir, const std::string& split,
                                  int index) {
  std::ostringstream name;
  name << "sample_" << std::setw(6) << std::setfill('0') << index << ".wbn";
  return dir / split / name.str();
}

void write_sample(const ScatterSample& s, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  WBN_ENSURE(os.good(), "write_sample: cannot open " + file.string());
  const uint64_t n = uint64_t(s.eta.rows);
  write_record(os, Dtype::F32, {n, n}, s.eta.v.data());
  const uint64_t pairs = uint64_t(s.n_src) * uint64_t(s.n_rcv);
  for (const auto& band : s.bands) {
    // complex stored as two planes: re then im
    const uint64_t total = band.size();
    const uint64_t nw = pairs == 0 ? 0 : total / pairs;
    std::vector<float> planes(2 * total);
    for (uint64_t q = 0; q < total; q++) {
      planes[q] = band[q].real();
      planes[total + q] = band[q].imag();
    }
    write_record(os, Dtype::F32, {2, uint64_t(s.n_src), uint64_t(s.n_rcv), nw}, planes.data());
  }
}

ScatterSample read_sample(const std::filesystem::path& file, const WideBNetConfig& net) {
  std::ifstream is(file, std::ios::binary);
  WBN_ENSURE(is.good(), "read_sample: cannot open " + file.string());
  ScatterSample s;
  RecordHeader hdr;
  std::vector<float> eta = read_record_f32(is, &hdr);
  WBN_ENSURE(hdr.dims.size() == 2 && hdr.dims[0] == hdr.dims[1], "read_sample: bad eta record");
  const int n = int(hdr.dims[0]);
  s.eta = GridF(n, n);
  std::copy(eta.begin(), eta.end(), s.eta.v.begin());
  for (int b = 0; b < net.band_count(); b++) {
    std::vector<float> planes = read_record_f32(is, &hdr);
    WBN_ENSURE(hdr.dims.size() == 4 && hdr.dims[0] == 2, "read_sample: bad band record");
    s.n_src = int(hdr.dims[1]);
    s.n_rcv = int(hdr.dims[2]);
    const uint64_t total = planes.size() / 2;
    std::vector<std::complex<float>> band(total);
    for (uint64_t q = 0; q < total; q++) band[q] = {planes[q], planes[total + q]};
    s.bands.push_back(std::move(band));
  }
  return s;
}

void append_sample_meta(const SampleMeta& m, std::ostream& os) {
  json j;
  j["index"] = m.index;
  j["seed"] = m.seed;
  json arr = json::array();
  for (const auto& sc : m.scatterers) {
    const char* name = sc.shape == ScattererShape::Square ? "square"
                       : sc.shape == ScattererShape::Triangle ? "triangle" : "gaussian";
    arr.push_back(json{{"shape", name},
                       {"char_length_px", sc.char_length_px},
                       {"center", {sc.center[0], sc.center[1]}},
                       {"rotation", sc.rotation},
                       {"amplitude", sc.amplitude}});
  }
  j["scatterers"] = arr;
  os << j.dump() << "\n";
}

std::vector<SampleMeta> read_sample_meta(const std::filesystem::path& dir,
                                         const std::string& split) {
  std::ifstream is(dir / split / "meta.jsonl");
  WBN_ENSURE(is.good(), "read_sample_meta: missing meta.jsonl");
  std::vector<SampleMeta> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    SampleMeta m;
    m.index = j.value("index", 0);
    m.seed = j.value("seed", uint64_t(0));
    for (const auto& e : j["scatterers"]) {
      Scatterer sc;
      const std::string name = e.value("shape", "gaussian");
      sc.shape = name == "square" ? ScattererShape::Square
                 : name == "triangle" ? ScattererShape::Triangle : ScattererShape::Gaussian;
      sc.char_length_px = e.value("char_length_px", 2.0);
      sc.center = {e["center"][0].get<double>(), e["center"][1].get<double>()};
      sc.rotation = e.value("rotation", 0.0);
      sc.amplitude = e.value("amplitude", 0.2);
      m.scatterers.push_back(sc);
    }
    out.push_back(std::move(m));
  }
  return out;
}

LoadedSplit load_split(const std::filesystem::path& dir, const std::string& split,
                       const WideBNetConfig& net, const LossSpec& loss, int limit) {
  DatasetManifest m = read_dataset_manifest(dir);
  const int count = split == "train" ? m.n_train : m.n_test;
  const int take = limit >= 0 ? std::min(limit, count) : count;
  LoadedSplit out;
  out.samples.reserve(size_t(take));
  for (int i = 0; i < take; i++) {
    ScatterSample s = read_sample(sample_path(dir, split, i), net);
    LoadedSample ls;
    ls.eta = std::move(s.eta);
    ls.target = smooth_target(ls.eta, loss);
    ls.bands = std::move(s.bands);
    out.samples.push_back(std::move(ls));
  }
  return out;
}

}  // namespace wbn
