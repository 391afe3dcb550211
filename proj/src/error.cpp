#include "paddle/error.hpp"

namespace paddle {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingTimeColumn: return "MissingTimeColumn";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::NoTemporalOverlap: return "NoTemporalOverlap";
    case ErrorCode::MissingRequiredChannel: return "MissingRequiredChannel";
    case ErrorCode::DuplicateChannel: return "DuplicateChannel";
    case ErrorCode::Arity: return "Arity";
    case ErrorCode::EmptyPhase: return "EmptyPhase";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::RegistryMismatch: return "RegistryMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::FoldClassCollapse: return "FoldClassCollapse";
    case ErrorCode::NoAcceptedStrokes: return "NoAcceptedStrokes";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& message,
                    const std::string& stage, const std::string& context) {
  std::string out;
  if (!stage.empty()) out += stage + ": ";
  out += std::string(to_string(code));
  if (!context.empty()) out += " [" + context + "]";
  if (!message.empty()) out += ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, std::string message, std::string stage,
             std::string context)
    : std::runtime_error(compose(code, message, stage, context)),
      code_(code),
      stage_(std::move(stage)),
      context_(std::move(context)),
      message_(std::move(message)) {}

Error Error::with_stage(std::string stage, std::string context) const {
  return Error(code_, message_, std::move(stage),
               context.empty() ? context_ : std::move(context));
}

}  // namespace paddle
