#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wbn/common.hpp"
#include "wbn/training.hpp"
#include "wbn/wavesim.hpp"
#include "wbn/widebnet.hpp"

namespace wbn {

// ---- binary array records -------------------------------------------------
// Layout: "WBN1" magic, u8 dtype (0 f32, 1 f64), u8 rank, u16 zero,
// u64 dims[rank], raw little-endian payload.

enum class Dtype : uint8_t { F32 = 0, F64 = 1 };

struct RecordHeader {
  Dtype dtype = Dtype::F32;
  std::vector<uint64_t> dims;
  uint64_t count() const {
    uint64_t c = 1;
    for (uint64_t d : dims) c *= d;
    return c;
  }
};

void write_record(std::ostream& os, Dtype dtype, const std::vector<uint64_t>& dims,
                  const void* data);
RecordHeader read_record_header(std::istream& is);
std::vector<float> read_record_f32(std::istream& is, RecordHeader* hdr = nullptr);
std::vector<double> read_record_f64(std::istream& is, RecordHeader* hdr = nullptr);

void write_record_file(const std::filesystem::path& p, Dtype dtype,
                       const std::vector<uint64_t>& dims, const void* data);
std::vector<float> read_record_file_f32(const std::filesystem::path& p,
                                        RecordHeader* hdr = nullptr);

// ---- PNG rendering ----------------------------------------------------------

enum class Colormap { Gray, RedWhiteBlue };

struct PngNormalization {
  // max-|value| of the reference grid (or the grid itself when absent).
  const GridF* reference = nullptr;
};

void render_png(const GridF& grid, const std::filesystem::path& path, Colormap cmap,
                const PngNormalization& norm);

// ---- configuration ----------------------------------------------------------

struct TrainOptions {
  int epochs = 150;
  int batch = 32;
  uint64_t seed = 0;
  LrSchedule lr;
  AdamOptions adam;
  int val_subset = 256;
  int checkpoint_every = 10;
};

struct AppConfig {
  WideBNetConfig net;   // band_sizes filled from frequencies at load time
  SimConfig sim;
  LossSpec loss;
  TrainOptions train;
};

AppConfig default_config();
AppConfig load_config(const std::filesystem::path& path);
void save_config(const AppConfig& cfg, const std::filesystem::path& path);

// ---- dataset ----------------------------------------------------------------

struct DatasetManifest {
  AppConfig cfg;
  uint64_t seed = 0;
  int n_train = 0;
  int n_test = 0;
};

struct SampleMeta {
  int index = 0;
  uint64_t seed = 0;
  std::vector<Scatterer> scatterers;
};

void write_dataset_manifest(const DatasetManifest& m, const std::filesystem::path& dir);
DatasetManifest read_dataset_manifest(const std::filesystem::path& dir);

void write_sample(const ScatterSample& s, const std::filesystem::path& file);
ScatterSample read_sample(const std::filesystem::path& file, const WideBNetConfig& net);
std::filesystem::path sample_path(const std::filesystem::path& dir, const std::string& split,
                                  int index);
void append_sample_meta(const SampleMeta& m, std::ostream& os);
std::vector<SampleMeta> read_sample_meta(const std::filesystem::path& dir,
                                         const std::string& split);

// In-memory split with precomputed smoothed targets.
struct LoadedSample {
  GridF eta;
  GridF target;
  std::vector<std::vector<std::complex<float>>> bands;
};

struct LoadedSplit {
  std::vector<LoadedSample> samples;
};

LoadedSplit load_split(const std::filesystem::path& dir, const std::string& split,
                       const WideBNetConfig& net, const LossSpec& loss, int limit = -1);

// ---- checkpoints -------------------------------------------------------------

struct Checkpoint {
  WideBNetConfig net;
  LossSpec loss;
  int epoch = 0;
  int64_t step = 0;
  WideBNetParams<float> params;
  AdamState<float> adam;
  std::vector<std::string> metrics_rows;  // CSV body (no header)
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& path_or_dir);

// ---- training loop -----------------------------------------------------------

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<EpochMetrics> metrics;
};

TrainResult train_model(const LoadedSplit& train_split, const LoadedSplit& val_split,
                        const WideBNetConfig& net, const LossSpec& loss,
                        const TrainOptions& opt, const std::filesystem::path& out_dir,
                        const std::optional<std::filesystem::path>& resume = std::nullopt);

// Forward a whole split in batches; returns per-sample predictions.
std::vector<GridF> predict_split(const WideBNetParams<float>& params, const LoadedSplit& split,
                                 int batch);

uint64_t fnv1a_file(const std::filesystem::path& p);
uint64_t fnv1a_dir(const std::filesystem::path& dir);

}  // namespace wbn
