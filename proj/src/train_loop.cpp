#include <chrono>
#include <fstream>
#include <iostream>

#include "wbn/io.hpp"

namespace wbn {

namespace {

// Gather a batch of samples into the network input format.
BandedBatch<float> make_batch(const WideBNetConfig& net, const LoadedSplit& split,
                              const std::vector<int>& idx) {
  std::vector<std::vector<const std::complex<float>*>> ptrs(size_t(net.band_count()));
  for (int b = 0; b < net.band_count(); b++) {
    if (net.band_sizes[size_t(b)] == 0) continue;
    for (int i : idx) ptrs[size_t(b)].push_back(split.samples[size_t(i)].bands[size_t(b)].data());
  }
  return format_banded_batch<float>(net, ptrs);
}

std::vector<int> seeded_subset(int total, int want, Rng rng) {
  std::vector<int> all(size_t(total));
  for (int i = 0; i < total; i++) all[size_t(i)] = i;
  for (int i = total - 1; i > 0; i--)
    std::swap(all[size_t(i)], all[size_t(rng.uniform_index(uint64_t(i) + 1))]);
  all.resize(size_t(std::min(want, total)));
  std::sort(all.begin(), all.end());
  return all;
}

struct EvalResult {
  double pixel = 0, rel = 0;
};

EvalResult evaluate(const WideBNetParams<float>& params, const LoadedSplit& split,
                    const std::vector<int>& idx, int batch) {
  EvalResult out;
  if (idx.empty()) return out;
  const int n = params.cfg.grid.side();
  for (size_t start = 0; start < idx.size(); start += size_t(batch)) {
    std::vector<int> chunk(idx.begin() + int64_t(start),
                           idx.begin() + int64_t(std::min(idx.size(), start + size_t(batch))));
    BandedBatch<float> in = make_batch(params.cfg, split, chunk);
    ImageBatch<float> pred = widebnet_forward(params, in, nullptr);
    for (size_t b = 0; b < chunk.size(); b++) {
      const float* target = split.samples[size_t(chunk[b])].target.v.data();
      out.pixel += pixel_loss_pre(pred.at(int(b)), target, int64_t(n) * n);
      out.rel += relative_loss_pre(pred.at(int(b)), target, int64_t(n) * n);
    }
  }
  out.pixel /= double(idx.size());
  out.rel /= double(idx.size());
  return out;
}

}  // namespace

std::vector<GridF> predict_split(const WideBNetParams<float>& params, const LoadedSplit& split,
                                 int batch) {
  std::vector<GridF> out;
  const int n = params.cfg.grid.side();
  std::vector<int> idx;
  for (int i = 0; i < int(split.samples.size()); i++) idx.push_back(i);
  for (size_t start = 0; start < idx.size(); start += size_t(batch)) {
    std::vector<int> chunk(idx.begin() + int64_t(start),
                           idx.begin() + int64_t(std::min(idx.size(), start + size_t(batch))));
    BandedBatch<float> in = make_batch(params.cfg, split, chunk);
    ImageBatch<float> pred = widebnet_forward(params, in, nullptr);
    for (size_t b = 0; b < chunk.size(); b++) {
      GridF g(n, n);
      std::copy(pred.at(int(b)), pred.at(int(b)) + int64_t(n) * n, g.v.begin());
      out.push_back(std::move(g));
    }
  }
  return out;
}

TrainResult train_model(const LoadedSplit& train_split, const LoadedSplit& val_split,
                        const WideBNetConfig& net, const LossSpec& loss,
                        const TrainOptions& opt, const std::filesystem::path& out_dir,
                        const std::optional<std::filesystem::path>& resume) {
  net.validate();
  WBN_REQUIRE(!train_split.samples.empty(), "train_model: empty training split");
  WBN_REQUIRE(opt.batch >= 1, "train_model: batch must be positive");
  std::filesystem::create_directories(out_dir);

  const int n = net.grid.side();
  const int n_train = int(train_split.samples.size());
  const Rng master(opt.seed);

  Checkpoint ck;
  int start_epoch = 0;
  if (resume) {
    ck = load_checkpoint(*resume);
    WBN_ENSURE(ck.net.grid.levels == net.grid.levels && ck.net.rank == net.rank,
               "train_model: resume checkpoint does not match the configuration");
    start_epoch = ck.epoch;
  } else {
    ck.net = net;
    ck.loss = loss;
    Rng init_rng = master.fork(0x1317);
    ck.params = init_params<float>(net, init_rng);
    ck.adam.init(ck.params);
  }

  // Fixed, seeded validation subset; evaluated every epoch.
  const std::vector<int> val_idx =
      seeded_subset(int(val_split.samples.size()), opt.val_subset, master.fork(0x7a1));

  WideBNetParams<float> grads = ck.params;
  grads.set_zero();

  TrainResult result;
  for (const auto& row : ck.metrics_rows) {
    (void)row;  // retained in the checkpoint; parsed metrics not needed here
  }

  std::ofstream metrics_stream;
  const auto metrics_path = out_dir / "metrics.csv";
  if (start_epoch == 0 || !std::filesystem::exists(metrics_path)) {
    metrics_stream.open(metrics_path);
    metrics_stream << metrics_csv_header() << "\n";
    for (const auto& row : ck.metrics_rows) metrics_stream << row << "\n";
  } else {
    metrics_stream.open(metrics_path, std::ios::app);
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = start_epoch; epoch < opt.epochs; epoch++) {
    // The shuffle depends only on (seed, epoch) so a resumed run replays the
    // identical batch stream.
    Rng shuffle_rng = master.fork(0x5e00 + uint64_t(epoch));
    std::vector<int> order(size_t(n_train));
    for (int i = 0; i < n_train; i++) order[size_t(i)] = i;
    for (int i = n_train - 1; i > 0; i--)
      std::swap(order[size_t(i)], order[size_t(shuffle_rng.uniform_index(uint64_t(i) + 1))]);

    double epoch_pixel = 0, epoch_rel = 0;
    int64_t seen = 0;
    double lr_last = opt.lr.rate(ck.step);
    for (int start = 0; start < n_train; start += opt.batch) {
      const int bsz = std::min(opt.batch, n_train - start);
      std::vector<int> chunk(order.begin() + start, order.begin() + start + bsz);
      BandedBatch<float> in = make_batch(net, train_split, chunk);
      Tape<float> tape;
      ImageBatch<float> pred = widebnet_forward(ck.params, in, &tape);

      // Batch loss: mean over samples of the pixel-sum squared error.
      ImageBatch<float> dout(bsz, n, n, 1);
      for (int b = 0; b < bsz; b++) {
        const float* target = train_split.samples[size_t(chunk[size_t(b)])].target.v.data();
        const float* pv = pred.at(b);
        epoch_pixel += pixel_loss_pre(pv, target, int64_t(n) * n);
        epoch_rel += relative_loss_pre(pv, target, int64_t(n) * n);
        float* dv = dout.at(b);
        for (int64_t q = 0; q < int64_t(n) * n; q++)
          dv[q] = 2.0f * (pv[q] - target[q]) / float(bsz);
      }
      seen += bsz;

      grads.set_zero();
      widebnet_backward(ck.params, tape, dout, &grads, nullptr);
      lr_last = opt.lr.rate(ck.step);
      adam_step(ck.adam, ck.params, grads, lr_last, opt.adam);
      ck.step++;
      if (!std::isfinite(epoch_pixel))
        fail_runtime("train_model: non-finite loss at step " + std::to_string(ck.step));
    }

    EvalResult val = evaluate(ck.params, val_split, val_idx, opt.batch);
    EpochMetrics em;
    em.epoch = epoch + 1;
    em.step = ck.step;
    em.lr = lr_last;
    em.train_pixel_loss = epoch_pixel / double(seen);
    em.train_rel_loss = epoch_rel / double(seen);
    em.val_pixel_loss = val.pixel;
    em.val_rel_loss = val.rel;
    em.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(em);
    ck.metrics_rows.push_back(metrics_csv_row(em));
    metrics_stream << metrics_csv_row(em) << "\n";
    metrics_stream.flush();
    std::cout << "epoch " << em.epoch << "/" << opt.epochs << " train_px " << em.train_pixel_loss
              << " train_rel " << em.train_rel_loss << " val_rel " << em.val_rel_loss << " lr "
              << em.lr << " t " << em.wall_time_s << "s\n";

    ck.epoch = epoch + 1;
    if (opt.checkpoint_every > 0 && (epoch + 1) % opt.checkpoint_every == 0)
      save_checkpoint(ck, out_dir / ("checkpoint-" + std::to_string(epoch + 1)));
  }

  save_checkpoint(ck, out_dir / "checkpoint-final");
  result.final_checkpoint = std::move(ck);
  return result;
}

}  // namespace wbn
