#include <fstream>

#include "json.hpp"
#include "wbn/io.hpp"

namespace wbn {

using nlohmann::json;

namespace {

std::string shape_name(ScattererShape s) {
  switch (s) {
    case ScattererShape::Square: return "square";
    case ScattererShape::Triangle: return "triangle";
    case ScattererShape::Gaussian: return "gaussian";
  }
  return "gaussian";
}

ScattererShape shape_from(const std::string& s) {
  if (s == "square") return ScattererShape::Square;
  if (s == "triangle") return ScattererShape::Triangle;
  if (s == "gaussian") return ScattererShape::Gaussian;
  fail_domain("unknown scatterer shape: " + s);
}

json geom_to_json(const AcquisitionGeometry& g) {
  return json{{"n_src", g.n_src},
              {"n_rcv", g.n_rcv},
              {"r_rcv", g.r_rcv},
              {"r_src", g.r_src},
              {"mode", g.mode == SourceMode::PlaneWave ? "plane-wave" : "point-source"}};
}

AcquisitionGeometry geom_from_json(const json& j) {
  AcquisitionGeometry g;
  g.n_src = j.value("n_src", g.n_src);
  g.n_rcv = j.value("n_rcv", g.n_rcv);
  g.r_rcv = j.value("r_rcv", g.r_rcv);
  g.r_src = j.value("r_src", g.r_src);
  const std::string mode = j.value("mode", "plane-wave");
  if (mode == "plane-wave") g.mode = SourceMode::PlaneWave;
  else if (mode == "point-source") g.mode = SourceMode::PointSource;
  else fail_domain("unknown acquisition mode: " + mode);
  return g;
}

}  // namespace

AppConfig default_config() {
  AppConfig cfg;
  cfg.net.grid = GridSpec{4, 5};
  cfg.net.rank = 3;
  cfg.sim.grid = cfg.net.grid;
  // band_sizes derived from the frequency list below.
  BandMap bm = assign_bands(cfg.sim.freqs_hz, cfg.sim.grid);
  cfg.net.band_sizes.clear();
  for (int l = cfg.net.half(); l <= cfg.net.levels(); l++)
    cfg.net.band_sizes.push_back(int(bm.freq_indices.at(l).size()));
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  WBN_ENSURE(is.good(), "load_config: cannot open " + path.string());
  json j;
  is >> j;

  AppConfig cfg;
  cfg.net.grid.levels = j.value("levels", 4);
  cfg.net.grid.leaf = j.value("leaf", 5);
  cfg.net.rank = j.value("rank", 3);
  cfg.net.n_cnn = j.value("n_cnn", 3);
  cfg.net.n_rnn = j.value("n_rnn", 3);
  cfg.net.cnn_kernel = j.value("cnn_kernel", 5);
  cfg.net.cnn_hidden = j.value("cnn_hidden", 16);
  cfg.net.strict_butterfly = j.value("strict_butterfly", false);
  cfg.net.use_switch = j.value("use_switch", true);

  cfg.sim.grid = cfg.net.grid;
  if (j.contains("extent")) {
    cfg.sim.lo = j["extent"][0].get<double>();
    cfg.sim.hi = j["extent"][1].get<double>();
  }
  cfg.sim.background_velocity = j.value("background_velocity", 1.0);
  if (j.contains("frequencies_hz"))
    cfg.sim.freqs_hz = j["frequencies_hz"].get<std::vector<double>>();
  if (j.contains("geometry")) cfg.sim.geom = geom_from_json(j["geometry"]);
  if (j.contains("pml")) {
    cfg.sim.pml.width = j["pml"].value("width_cells", 0);
    cfg.sim.pml.intensity = j["pml"].value("intensity", 80.0);
    cfg.sim.pml.exponent = j["pml"].value("exponent", 2);
  }
  if (j.contains("scatterers")) {
    const json& s = j["scatterers"];
    if (s.contains("shapes")) {
      cfg.sim.dict.shapes.clear();
      for (const auto& name : s["shapes"]) cfg.sim.dict.shapes.push_back(shape_from(name));
    }
    if (s.contains("char_lengths_px"))
      cfg.sim.dict.char_lengths_px = s["char_lengths_px"].get<std::vector<double>>();
    cfg.sim.dict.amplitude = s.value("amplitude", 0.2);
    if (s.contains("count_choices"))
      cfg.sim.dict.count_choices = s["count_choices"].get<std::vector<int>>();
    cfg.sim.dict.placement_radius = s.value("placement_radius", 0.35);
    cfg.sim.dict.rotate = s.value("rotate", false);
  }
  cfg.sim.fd_order_train = j.value("fd_order_train", 2);
  cfg.sim.fd_order_test = j.value("fd_order_test", 4);

  cfg.loss.kernel_width = j.value("loss_kernel_width", 0.75);

  if (j.contains("train")) {
    const json& t = j["train"];
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch = t.value("batch", cfg.train.batch);
    cfg.train.lr.base = t.value("lr_base", cfg.train.lr.base);
    cfg.train.lr.decay = t.value("lr_decay", cfg.train.lr.decay);
    cfg.train.lr.interval = t.value("lr_interval", cfg.train.lr.interval);
    cfg.train.lr.staircase = t.value("staircase", true);
    cfg.train.adam.beta1 = t.value("beta1", cfg.train.adam.beta1);
    cfg.train.adam.beta2 = t.value("beta2", cfg.train.adam.beta2);
    cfg.train.adam.eps = t.value("adam_eps", cfg.train.adam.eps);
    cfg.train.val_subset = t.value("val_subset", cfg.train.val_subset);
    cfg.train.checkpoint_every = t.value("checkpoint_every", cfg.train.checkpoint_every);
  }

  // Band sizes follow the frequency partition unless pinned explicitly.
  if (j.contains("band_sizes")) {
    cfg.net.band_sizes = j["band_sizes"].get<std::vector<int>>();
  } else {
    BandMap bm = assign_bands(cfg.sim.freqs_hz, cfg.sim.grid);
    cfg.net.band_sizes.clear();
    for (int l = cfg.net.half(); l <= cfg.net.levels(); l++)
      cfg.net.band_sizes.push_back(int(bm.freq_indices.at(l).size()));
  }
  cfg.net.validate();
  return cfg;
}

void save_config(const AppConfig& cfg, const std::filesystem::path& path) {
  json j;
  j["levels"] = cfg.net.grid.levels;
  j["leaf"] = cfg.net.grid.leaf;
  j["rank"] = cfg.net.rank;
  j["n_cnn"] = cfg.net.n_cnn;
  j["n_rnn"] = cfg.net.n_rnn;
  j["cnn_kernel"] = cfg.net.cnn_kernel;
  j["cnn_hidden"] = cfg.net.cnn_hidden;
  j["strict_butterfly"] = cfg.net.strict_butterfly;
  j["use_switch"] = cfg.net.use_switch;
  j["band_sizes"] = cfg.net.band_sizes;
  j["extent"] = {cfg.sim.lo, cfg.sim.hi};
  j["background_velocity"] = cfg.sim.background_velocity;
  j["frequencies_hz"] = cfg.sim.freqs_hz;
  j["geometry"] = geom_to_json(cfg.sim.geom);
  j["pml"] = {{"width_cells", cfg.sim.pml.width},
              {"intensity", cfg.sim.pml.intensity},
              {"exponent", cfg.sim.pml.exponent}};
  json shapes = json::array();
  for (auto s : cfg.sim.dict.shapes) shapes.push_back(shape_name(s));
  j["scatterers"] = {{"shapes", shapes},
                     {"char_lengths_px", cfg.sim.dict.char_lengths_px},
                     {"amplitude", cfg.sim.dict.amplitude},
                     {"count_choices", cfg.sim.dict.count_choices},
                     {"placement_radius", cfg.sim.dict.placement_radius},
                     {"rotate", cfg.sim.dict.rotate}};
  j["fd_order_train"] = cfg.sim.fd_order_train;
  j["fd_order_test"] = cfg.sim.fd_order_test;
  j["loss_kernel_width"] = cfg.loss.kernel_width;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch", cfg.train.batch},
                {"lr_base", cfg.train.lr.base},
                {"lr_decay", cfg.train.lr.decay},
                {"lr_interval", cfg.train.lr.interval},
                {"staircase", cfg.train.lr.staircase},
                {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2},
                {"adam_eps", cfg.train.adam.eps},
                {"val_subset", cfg.train.val_subset},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  std::ofstream os(path);
  WBN_ENSURE(os.good(), "save_config: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace wbn
