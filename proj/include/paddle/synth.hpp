#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "paddle/features.hpp"
#include "paddle/ingest.hpp"

namespace paddle {

// Synthetic paddling trial. The waveform model runs at rate_hz; every device
// samples it at twice that rate with its own clock offset, the left watch on
// the grid and the others in between, so alignment has real work to do.
struct SynthSpec {
  std::size_t n_strokes = 10;
  double rate_hz = 50.0;
  double stroke_period_s = 1.8;
  double jitter = 0.1;  // stroke length drawn from period * (1 +/- jitter)
  double gap_s = 0.4;
  double rest_s = 0.4;  // lead-in and trailing rest
  Label form = Label::Optimal;
  double class_separation = 1.0;
  double noise_sigma = 0.05;
  // Channels whose in-stroke distribution shifts for Suboptimal form.
  std::vector<ChannelId> designated = default_designated();
  std::uint64_t seed = 0;

  static std::vector<ChannelId> default_designated();
  void validate() const;  // InvalidArgument
};

// Frames relative to the aligned session's first frame.
struct StrokeTruth {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t catch_end = 0;
  std::size_t pull_end = 0;
  friend bool operator==(const StrokeTruth&, const StrokeTruth&) = default;
};

struct GroundTruth {
  std::vector<StrokeTruth> strokes;
  Label form = Label::Optimal;
  std::vector<ChannelId> signal_channels;
  std::size_t frames = 0;
};

struct SynthTrial {
  std::vector<TrialFile> files;  // the five slots, canonical CSV
  GroundTruth truth;
};

SynthTrial generate_trial(const SynthSpec& spec);

// Noise-free per-frame signal for all 45 channels.
ChannelMatrix synth_frames(const SynthSpec& spec, GroundTruth* truth = nullptr);

// stroke,start,end,catch_end,pull_end
std::string ground_truth_csv(const GroundTruth& t);

// Writes <dir>/<slot>.csv, trial.json and ground_truth.csv.
void write_trial_dir(const SynthTrial& trial, const std::string& dir);

struct SynthDataset {
  std::array<FeatureDataset, 3> phases;
  std::vector<GroundTruth> truths;  // one per generated trial
};

// Generates Optimal and Suboptimal trials from `spec` (seeds derived from
// `seed`) through ingest, segmentation and featurization until each class
// has n_per_class accepted strokes, then keeps exactly n_per_class per class
// and phase. Errors: InvalidArgument, NoAcceptedStrokes (generator stalls).
SynthDataset generate_dataset(std::size_t n_per_class, const SynthSpec& spec, std::uint64_t seed,
                              const FeatureRegistry& registry = FeatureRegistry::canonical());

}  // namespace paddle
