#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace paddle {

enum class ErrorCode {
  InvalidArgument,
  // ingest
  MissingTimeColumn,
  EmptyFile,
  NonMonotonicTime,
  NoTemporalOverlap,
  MissingRequiredChannel,
  DuplicateChannel,
  Arity,
  // segment / features
  EmptyPhase,
  EmptyInput,
  NonFinite,
  MissingChannel,
  // models
  SingleClassData,
  RegistryMismatch,
  CorruptModel,
  VersionUnsupported,
  // eval
  TooFewSamples,
  FoldClassCollapse,
  // serve
  NoAcceptedStrokes,
  Io,
};

std::string_view to_string(ErrorCode code);

// Pipeline error. `stage` names the pipeline step (ingest, segment, ...) and
// `context` the offending input when one exists (a file slot, a column).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string stage = {},
        std::string context = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& context() const noexcept { return context_; }
  const std::string& message() const noexcept { return message_; }

  // Same error re-tagged with a stage/context, keeping the code.
  Error with_stage(std::string stage, std::string context = {}) const;

 private:
  ErrorCode code_;
  std::string stage_;
  std::string context_;
  std::string message_;
};

}  // namespace paddle
