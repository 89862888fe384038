#include <fstream>

#include "json.hpp"
#include "wbn/io.hpp"

namespace wbn {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j;
  j["format"] = "wbn-checkpoint-1";
  j["epoch"] = ck.epoch;
  j["step"] = ck.step;
  j["levels"] = ck.net.grid.levels;
  j["leaf"] = ck.net.grid.leaf;
  j["rank"] = ck.net.rank;
  j["band_sizes"] = ck.net.band_sizes;
  j["n_cnn"] = ck.net.n_cnn;
  j["n_rnn"] = ck.net.n_rnn;
  j["cnn_kernel"] = ck.net.cnn_kernel;
  j["cnn_hidden"] = ck.net.cnn_hidden;
  j["strict_butterfly"] = ck.net.strict_butterfly;
  j["use_switch"] = ck.net.use_switch;
  j["loss_kernel_width"] = ck.loss.kernel_width;

  auto views = const_cast<Checkpoint&>(ck).params.views();
  json layers = json::array();
  for (const auto& v : views) layers.push_back(v.name);
  j["layers"] = layers;
  std::ofstream os(dir / "checkpoint.json");
  WBN_ENSURE(os.good(), "save_checkpoint: cannot open manifest");
  os << j.dump(2) << "\n";

  {
    std::ofstream ps(dir / "params.wbn", std::ios::binary);
    WBN_ENSURE(ps.good(), "save_checkpoint: cannot open params.wbn");
    for (const auto& v : views) write_record(ps, Dtype::F32, {uint64_t(v.n)}, v.data);
  }
  {
    std::ofstream as(dir / "adam.wbn", std::ios::binary);
    WBN_ENSURE(as.good(), "save_checkpoint: cannot open adam.wbn");
    for (const auto& m : ck.adam.m)
      write_record(as, Dtype::F32, {uint64_t(m.size())}, m.data());
    for (const auto& v : ck.adam.v)
      write_record(as, Dtype::F32, {uint64_t(v.size())}, v.data());
  }
  {
    std::ofstream ms(dir / "metrics.csv");
    ms << metrics_csv_header() << "\n";
    for (const auto& row : ck.metrics_rows) ms << row << "\n";
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path_or_dir) {
  std::filesystem::path dir = path_or_dir;
  if (dir.filename() == "checkpoint.json") dir = dir.parent_path();
  std::ifstream is(dir / "checkpoint.json");
  WBN_ENSURE(is.good(), "load_checkpoint: missing checkpoint.json in " + dir.string());
  json j;
  is >> j;

  Checkpoint ck;
  ck.net.grid.levels = j.value("levels", 4);
  ck.net.grid.leaf = j.value("leaf", 5);
  ck.net.rank = j.value("rank", 3);
  ck.net.band_sizes = j["band_sizes"].get<std::vector<int>>();
  ck.net.n_cnn = j.value("n_cnn", 3);
  ck.net.n_rnn = j.value("n_rnn", 3);
  ck.net.cnn_kernel = j.value("cnn_kernel", 5);
  ck.net.cnn_hidden = j.value("cnn_hidden", 16);
  ck.net.strict_butterfly = j.value("strict_butterfly", false);
  ck.net.use_switch = j.value("use_switch", true);
  ck.loss.kernel_width = j.value("loss_kernel_width", 0.75);
  ck.epoch = j.value("epoch", 0);
  ck.step = j.value("step", int64_t(0));
  ck.net.validate();

  Rng dummy(0);
  ck.params = init_params<float>(ck.net, dummy);
  auto views = ck.params.views();
  {
    std::ifstream ps(dir / "params.wbn", std::ios::binary);
    WBN_ENSURE(ps.good(), "load_checkpoint: missing params.wbn");
    for (auto& v : views) {
      std::vector<float> arr = read_record_f32(ps);
      WBN_ENSURE(int64_t(arr.size()) == v.n, "load_checkpoint: layer size mismatch at " + v.name);
      std::copy(arr.begin(), arr.end(), v.data);
    }
  }
  ck.adam.init(ck.params);
  ck.adam.step = ck.step;
  {
    std::ifstream as(dir / "adam.wbn", std::ios::binary);
    WBN_ENSURE(as.good(), "load_checkpoint: missing adam.wbn");
    for (auto& m : ck.adam.m) {
      std::vector<float> arr = read_record_f32(as);
      WBN_ENSURE(arr.size() == m.size(), "load_checkpoint: adam state mismatch");
      std::copy(arr.begin(), arr.end(), m.begin());
    }
    for (auto& v : ck.adam.v) {
      std::vector<float> arr = read_record_f32(as);
      WBN_ENSURE(arr.size() == v.size(), "load_checkpoint: adam state mismatch");
      std::copy(arr.begin(), arr.end(), v.begin());
    }
  }
  {
    std::ifstream ms(dir / "metrics.csv");
    if (ms.good()) {
      std::string line;
      std::getline(ms, line);  // header
      while (std::getline(ms, line))
        if (!line.empty()) ck.metrics_rows.push_back(line);
    }
  }
  return ck;
}

}  // namespace wbn
