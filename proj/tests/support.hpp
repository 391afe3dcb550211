#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "paddle/error.hpp"
#include "paddle/ingest.hpp"
#include "paddle/serve.hpp"
#include "paddle/synth.hpp"

namespace testing {

// Removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("paddleq-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline paddle::SynthSpec quiet_spec(std::size_t strokes = 5) {
  paddle::SynthSpec s;
  s.n_strokes = strokes;
  s.noise_sigma = 0;
  s.jitter = 0;
  return s;
}

inline paddle::AlignedSession synth_session(const paddle::SynthSpec& spec,
                                            paddle::GroundTruth* truth = nullptr) {
  auto trial = paddle::generate_trial(spec);
  if (truth) *truth = trial.truth;
  paddle::LoadOptions lo;
  lo.rate_hz = spec.rate_hz;
  lo.label = spec.form;
  return paddle::load_trial(trial.files, lo).session;
}

// ExtraTrees bundle trained once on separable synth data and shared.
inline const paddle::ModelBundle& synth_bundle() {
  static const paddle::ModelBundle bundle = [] {
    paddle::SynthSpec spec;
    spec.class_separation = 2.0;
    const auto data = paddle::generate_dataset(15, spec, 77);
    paddle::HyperParams hp;
    hp.seed = 5;
    return paddle::train_bundle(data.phases, paddle::ModelKind::ExtraTrees, hp);
  }();
  return bundle;
}

// Five canonical files of one synth trial.
inline std::vector<paddle::TrialFile> synth_files(std::uint64_t seed, paddle::Label form = paddle::Label::Optimal,
                                                  std::size_t strokes = 10) {
  paddle::SynthSpec spec;
  spec.seed = seed;
  spec.form = form;
  spec.n_strokes = strokes;
  spec.class_separation = 2.0;
  return paddle::generate_trial(spec).files;
}

// Code of the paddle::Error thrown by f, or nullopt when nothing is thrown.
template <typename F>
std::optional<paddle::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const paddle::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
