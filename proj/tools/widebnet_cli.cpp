#include <CLI11.hpp>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wbn/imaging.hpp"
#include "wbn/io.hpp"
#include "wbn/spectral.hpp"

namespace fs = std::filesystem;
using namespace wbn;

namespace {

int cmd_gen_data(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                 int ntrain, int ntest) {
  AppConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
  DatasetManifest manifest;
  manifest.cfg = cfg;
  manifest.seed = seed;
  manifest.n_train = ntrain;
  manifest.n_test = ntest;
  write_dataset_manifest(manifest, out_dir);

  const Rng master(seed);
  auto run_split = [&](const std::string& split, int count, int fd_order, uint64_t mix) {
    fs::create_directories(fs::path(out_dir) / split);
    std::ofstream meta(fs::path(out_dir) / split / "meta.jsonl");
    for (int i = 0; i < count; i++) {
      Rng rng = master.fork(mix).fork(uint64_t(i));
      ScatterSample s = generate_sample(rng, cfg.sim, fd_order);
      write_sample(s, sample_path(out_dir, split, i));
      SampleMeta m;
      m.index = i;
      m.seed = s.seed;
      m.scatterers = s.scatterers;
      append_sample_meta(m, meta);
      if ((i + 1) % 25 == 0 || i + 1 == count)
        std::cout << split << ": " << (i + 1) << "/" << count << "\n" << std::flush;
    }
  };
  run_split("train", ntrain, cfg.sim.fd_order_train, 0x7261);
  run_split("test", ntest, cfg.sim.fd_order_test, 0x7465);
  std::cout << "dataset written to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, int epochs, int batch, uint64_t seed,
              const std::string& resume) {
  DatasetManifest manifest = read_dataset_manifest(data_dir);
  AppConfig cfg = config_path.empty() ? manifest.cfg : load_config(config_path);
  cfg.train.epochs = epochs;
  cfg.train.batch = batch;
  cfg.train.seed = seed;

  std::cout << "loading dataset...\n";
  LoadedSplit train_split = load_split(data_dir, "train", cfg.net, cfg.loss);
  LoadedSplit test_split = load_split(data_dir, "test", cfg.net, cfg.loss);
  std::cout << "train " << train_split.samples.size() << " samples, test "
            << test_split.samples.size() << " samples, params " << param_count(cfg.net) << "\n";

  std::optional<fs::path> resume_path;
  if (!resume.empty()) resume_path = resume;
  TrainResult res =
      train_model(train_split, test_split, cfg.net, cfg.loss, cfg.train, out_dir, resume_path);

  // Full held-out evaluation with the final weights.
  std::vector<GridF> preds = predict_split(res.final_checkpoint.params, test_split, batch);
  double px = 0, rel = 0;
  const int n = cfg.net.grid.side();
  for (size_t i = 0; i < preds.size(); i++) {
    px += pixel_loss_pre(preds[i].v.data(), test_split.samples[i].target.v.data(),
                         int64_t(n) * n);
    rel += relative_loss_pre(preds[i].v.data(), test_split.samples[i].target.v.data(),
                             int64_t(n) * n);
  }
  if (!preds.empty()) {
    px /= double(preds.size());
    rel /= double(preds.size());
  }
  std::cout << "final test pixel loss " << px << ", relative loss " << rel << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& data_dir,
              const std::string& out_dir, bool png) {
  Checkpoint ck = load_checkpoint(checkpoint);
  LoadedSplit split = load_split(data_dir, "test", ck.net, ck.loss);
  fs::create_directories(out_dir);
  std::vector<GridF> preds = predict_split(ck.params, split, 32);
  const int n = ck.net.grid.side();
  double px = 0, rel = 0;
  for (size_t i = 0; i < preds.size(); i++) {
    px += pixel_loss_pre(preds[i].v.data(), split.samples[i].target.v.data(), int64_t(n) * n);
    rel += relative_loss_pre(preds[i].v.data(), split.samples[i].target.v.data(), int64_t(n) * n);
    char name[64];
    std::snprintf(name, sizeof name, "pred_%06zu.wbn", i);
    write_record_file(fs::path(out_dir) / name, Dtype::F32,
                      {uint64_t(n), uint64_t(n)}, preds[i].v.data());
    if (png) {
      char img[64];
      std::snprintf(img, sizeof img, "pred_%06zu.png", i);
      // Figures share the truth's color scale.
      PngNormalization norm;
      norm.reference = &split.samples[i].target;
      render_png(preds[i], fs::path(out_dir) / img, Colormap::RedWhiteBlue, norm);
      std::snprintf(img, sizeof img, "true_%06zu.png", i);
      render_png(split.samples[i].target, fs::path(out_dir) / img, Colormap::RedWhiteBlue, norm);
    }
  }
  if (!preds.empty()) {
    px /= double(preds.size());
    rel /= double(preds.size());
  }
  std::ofstream os(fs::path(out_dir) / "summary.json");
  os << "{\n  \"samples\": " << preds.size() << ",\n  \"pixel_loss\": " << px
     << ",\n  \"relative_loss\": " << rel << "\n}\n";
  std::cout << "inferred " << preds.size() << " samples; pixel " << px << " rel " << rel << "\n";
  return 0;
}

int cmd_image_ls(const std::string& data_dir, double freq, bool all_freqs, double epsilon,
                 const std::string& out_dir, int count, const std::string& split) {
  DatasetManifest manifest = read_dataset_manifest(data_dir);
  const AppConfig& cfg = manifest.cfg;
  const int n = cfg.net.grid.side();
  LoadedSplit samples = load_split(data_dir, split, cfg.net, cfg.loss, count);
  fs::create_directories(out_dir);

  BandMap bands = assign_bands(cfg.sim.freqs_hz, cfg.sim.grid);
  std::vector<int> freq_ids;
  if (all_freqs) {
    for (size_t i = 0; i < cfg.sim.freqs_hz.size(); i++) freq_ids.push_back(int(i));
  } else {
    for (size_t i = 0; i < cfg.sim.freqs_hz.size(); i++)
      if (std::abs(cfg.sim.freqs_hz[i] - freq) < 1e-9) freq_ids.push_back(int(i));
    if (freq_ids.empty()) {
      std::cerr << "frequency " << freq << " Hz is not in the dataset\n";
      return 1;
    }
  }
  // Band level and in-band slot of every requested frequency.
  struct Slot { int level, pos, freq_id; };
  std::vector<Slot> slots;
  for (int fid : freq_ids)
    for (const auto& [level, ids] : bands.freq_indices)
      for (size_t pos = 0; pos < ids.size(); pos++)
        if (ids[pos] == fid) slots.push_back({level, int(pos), fid});

  std::vector<std::unique_ptr<FarFieldOperator>> ops;
  for (const auto& slot : slots)
    ops.push_back(std::make_unique<FarFieldOperator>(2 * M_PI * cfg.sim.freqs_hz[size_t(slot.freq_id)],
                                                     n, cfg.sim.lo, cfg.sim.hi, cfg.sim.geom));

  TikhonovOptions opt;
  opt.eps = epsilon;
  const int half = cfg.net.half();
  for (size_t si = 0; si < samples.samples.size(); si++) {
    const auto& sample = samples.samples[si];
    std::vector<Eigen::MatrixXcd> lambdas;
    std::vector<const FarFieldOperator*> op_ptrs;
    for (size_t k = 0; k < slots.size(); k++) {
      const auto& slot = slots[k];
      const auto& band = sample.bands[size_t(slot.level - half)];
      const int nw = cfg.net.band_sizes[size_t(slot.level - half)];
      Eigen::MatrixXcd lam(cfg.sim.geom.n_src, cfg.sim.geom.n_rcv);
      for (int s = 0; s < cfg.sim.geom.n_src; s++)
        for (int r = 0; r < cfg.sim.geom.n_rcv; r++) {
          const std::complex<float> z = band[(size_t(s) * cfg.sim.geom.n_rcv + r) * nw + slot.pos];
          lam(s, r) = cplx(z.real(), z.imag());
        }
      lambdas.push_back(std::move(lam));
      op_ptrs.push_back(ops[k].get());
    }
    std::vector<double> weights(slots.size(), 1.0);
    GridD img = multifreq_image(lambdas, op_ptrs, opt, weights);
    GridF imgf(n, n);
    for (size_t q = 0; q < img.v.size(); q++) imgf.v[q] = float(img.v[q]);
    char name[64];
    std::snprintf(name, sizeof name, "ls_%06zu.wbn", si);
    write_record_file(fs::path(out_dir) / name, Dtype::F32, {uint64_t(n), uint64_t(n)},
                      imgf.v.data());
    std::snprintf(name, sizeof name, "ls_%06zu.png", si);
    render_png(imgf, fs::path(out_dir) / name, Colormap::RedWhiteBlue, {});
    std::snprintf(name, sizeof name, "true_%06zu.png", si);
    render_png(sample.eta, fs::path(out_dir) / name, Colormap::RedWhiteBlue, {});
  }
  std::cout << "wrote " << samples.samples.size() << " least-squares images to " << out_dir
            << "\n";
  return 0;
}

bool suite_fft() {
  Rng rng(7);
  double worst = 0;
  for (int k = 0; k <= 10; k++) {
    const size_t n = size_t(1) << k;
    std::vector<cplx> x(n);
    for (auto& v : x) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto a = fft_radix2(x);
    auto b = naive_dft(x);
    double num = 0, den = 0;
    for (size_t q = 0; q < n; q++) {
      num += std::norm(a[q] - b[q]);
      den += std::norm(b[q]);
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  std::cout << "  fft vs naive dft, worst relative error " << worst << "\n";
  return worst < 1e-10;
}

bool suite_ranks() {
  const int n = 128;
  CMat F(n, n);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      F(i, j) = std::polar(1.0, -2.0 * M_PI * double(i) * double(j) / n);
  RankProfile prof = complementary_rank_profile(F, 7, 1e-6);
  bool uniform = true;
  for (int p = 0; p <= prof.levels; p++)
    uniform = uniform && (prof.max_per_level[p] - prof.min_per_level[p] <= 1);
  std::cout << "  dft-" << n << " complementary profile uniform per level: "
            << (uniform ? "yes" : "no") << "\n";
  return uniform;
}

bool suite_greens() {
  // Quadrature oracle at a few arguments.
  auto j0_quad = [](double z) {
    const int m = 20000;
    double acc = 0;
    for (int i = 0; i < m; i++) {
      const double t = (i + 0.5) * M_PI / m;
      acc += std::cos(z * std::sin(t));
    }
    return acc / m;
  };
  double worst = 0;
  for (double z : {0.5, 1.0, 3.0, 8.0, 15.0, 40.0})
    worst = std::max(worst, std::abs(bessel_j0(z) - j0_quad(z)));
  std::cout << "  bessel J0 vs quadrature, worst abs error " << worst << "\n";
  return worst < 1e-10;
}

bool suite_grads() {
  GradCheckReport rep = grad_check(2024);
  for (const auto& e : rep.entries)
    std::cout << "  " << e.name << " max rel err " << e.max_rel_err
              << (e.pass ? " (pass)" : " (FAIL)") << "\n";
  return rep.all_pass;
}

bool suite_perms() {
  GridSpec spec{4, 2};
  bool ok = true;
  for (int l = 2; l < 4; l++) {
    PermIndex p = perm_indices(spec, l, 3);
    std::vector<int64_t> sorted = p.indices;
    std::sort(sorted.begin(), sorted.end());
    for (int64_t q = 0; q < p.size(); q++) ok = ok && sorted[size_t(q)] == q;
  }
  PermIndex sw = switch_indices(spec, 2);
  std::vector<float> x(size_t(sw.size()));
  Rng rng(3);
  for (auto& v : x) v = float(rng.uniform());
  auto once = apply_permutation(x, sw);
  auto twice = apply_permutation(once, sw);
  ok = ok && twice == x;
  std::cout << "  permutation bijection + switch involution: " << (ok ? "yes" : "no") << "\n";
  return ok;
}

int cmd_selftest(const std::string& suite) {
  struct Entry {
    const char* name;
    bool (*fn)();
  };
  const Entry all[] = {{"fft", suite_fft},
                       {"ranks", suite_ranks},
                       {"greens", suite_greens},
                       {"grads", suite_grads},
                       {"perms", suite_perms}};
  bool ok = true;
  for (const auto& e : all) {
    if (suite != "all" && suite != e.name) continue;
    std::cout << "suite " << e.name << ":\n";
    const bool pass = e.fn();
    std::cout << (pass ? "PASS" : "FAIL") << " " << e.name << "\n";
    ok = ok && pass;
  }
  return ok ? 0 : 1;
}

int cmd_param_count(const std::string& config_path) {
  AppConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
  std::cout << param_count(cfg.net) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wide-band butterfly network pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, checkpoint, resume, suite = "all", split = "test";
  uint64_t seed = 0;
  int ntrain = 21000, ntest = 4000, epochs = 150, batch = 32, count = 8;
  double freq = 0, epsilon = 1.0;
  bool all_freqs = false, png = false;

  auto* gen = app.add_subcommand("gen-data", "synthesize a wideband scattering dataset");
  gen->add_option("--config", config_path, "JSON config file");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--ntrain", ntrain, "training samples");
  gen->add_option("--ntest", ntest, "testing samples");

  auto* tr = app.add_subcommand("train", "train the model on a dataset");
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--config", config_path, "JSON config override");
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--epochs", epochs, "epochs");
  tr->add_option("--batch", batch, "batch size");
  tr->add_option("--seed", seed, "training seed");
  tr->add_option("--resume", resume, "checkpoint directory to resume from");

  auto* in = app.add_subcommand("infer", "run a checkpoint over the test split");
  in->add_option("--checkpoint", checkpoint, "checkpoint dir or checkpoint.json")->required();
  in->add_option("--data", data_dir, "dataset directory")->required();
  in->add_option("--out", out_dir, "output directory")->required();
  in->add_flag("--png", png, "also render PNG images");

  auto* ls = app.add_subcommand("image-ls", "linearized least-squares baseline images");
  ls->add_option("--data", data_dir, "dataset directory")->required();
  ls->add_option("--freq", freq, "single frequency in Hz");
  ls->add_flag("--all-freqs", all_freqs, "use every dataset frequency");
  ls->add_option("--epsilon", epsilon, "Tikhonov regularization");
  ls->add_option("--out", out_dir, "output directory")->required();
  ls->add_option("--count", count, "number of samples to image");
  ls->add_option("--split", split, "dataset split");

  auto* st = app.add_subcommand("selftest", "run the built-in oracle suites");
  st->add_option("--suite", suite, "fft|ranks|greens|grads|perms|all");

  auto* pc = app.add_subcommand("param-count", "print the trainable parameter count");
  pc->add_option("--config", config_path, "JSON config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir, seed, ntrain, ntest);
    if (tr->parsed()) return cmd_train(data_dir, config_path, out_dir, epochs, batch, seed, resume);
    if (in->parsed()) return cmd_infer(checkpoint, data_dir, out_dir, png);
    if (ls->parsed()) return cmd_image_ls(data_dir, freq, all_freqs, epsilon, out_dir, count, split);
    if (st->parsed()) return cmd_selftest(suite);
    if (pc->parsed()) return cmd_param_count(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
