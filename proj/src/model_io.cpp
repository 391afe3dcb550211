#include <bit>
#include <cstring>

#include "paddle/digest.hpp"
#include "paddle/error.hpp"
#include "paddle/models.hpp"

namespace paddle {

namespace {

constexpr std::string_view kMagic = "STRKMDL1";
constexpr std::size_t kDigestChars = 64;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    size(s.size());
    out_.append(s);
  }
  void reals(const std::vector<double>& v) {
    size(v.size());
    for (double x : v) f64(x);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t size(std::size_t limit) {
    const auto v = u64();
    if (v > limit) corrupt("length field out of range");
    return static_cast<std::size_t>(v);
  }
  std::string str() {
    const auto n = size(remaining());
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> reals() {
    const auto n = size(remaining() / 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

  [[noreturn]] static void corrupt(const std::string& why) {
    throw Error(ErrorCode::CorruptModel, why, "models");
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) corrupt("truncated model payload");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_hp(Writer& w, const HyperParams& hp) {
  w.f64(hp.svc_c);
  w.u8(hp.gamma ? 1 : 0);
  w.f64(hp.gamma.value_or(0.0));
  w.f64(hp.svm_tolerance);
  w.size(hp.rf_trees);
  w.i32(hp.rf_max_depth);
  w.size(hp.gb_estimators);
  w.i32(hp.gb_max_depth);
  w.f64(hp.gb_learning_rate);
  w.size(hp.et_estimators);
  w.i32(hp.et_max_depth);
  w.size(hp.if_trees);
  w.size(hp.if_max_samples);
  w.f64(hp.ocsvm_nu);
  w.u64(hp.seed);
}

HyperParams read_hp(Reader& r) {
  constexpr std::size_t kMaxCount = 1u << 24;
  HyperParams hp;
  hp.svc_c = r.f64();
  const bool has_gamma = r.u8() != 0;
  const double gamma = r.f64();
  if (has_gamma) hp.gamma = gamma;
  hp.svm_tolerance = r.f64();
  hp.rf_trees = r.size(kMaxCount);
  hp.rf_max_depth = r.i32();
  hp.gb_estimators = r.size(kMaxCount);
  hp.gb_max_depth = r.i32();
  hp.gb_learning_rate = r.f64();
  hp.et_estimators = r.size(kMaxCount);
  hp.et_max_depth = r.i32();
  hp.if_trees = r.size(kMaxCount);
  hp.if_max_samples = r.size(kMaxCount);
  hp.ocsvm_nu = r.f64();
  hp.seed = r.u64();
  return hp;
}

void write_tree(Writer& w, const Tree& t) {
  w.size(t.nodes.size());
  for (const auto& n : t.nodes) {
    w.i32(n.feature);
    w.f64(n.threshold);
    w.i32(n.left);
    w.i32(n.right);
    w.f64(n.value);
    w.u32(n.samples);
  }
}

Tree read_tree(Reader& r, std::size_t num_features) {
  constexpr std::size_t kNodeBytes = 4 + 8 + 4 + 4 + 8 + 4;
  Tree t;
  t.nodes.resize(r.size(r.remaining() / kNodeBytes));
  if (t.nodes.empty()) Reader::corrupt("empty tree");
  const auto count = static_cast<std::int32_t>(t.nodes.size());
  for (auto& n : t.nodes) {
    n.feature = r.i32();
    n.threshold = r.f64();
    n.left = r.i32();
    n.right = r.i32();
    n.value = r.f64();
    n.samples = r.u32();
  }
  // Children must point forward so traversal terminates.
  for (std::int32_t i = 0; i < count; ++i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) continue;
    if (static_cast<std::size_t>(n.feature) >= num_features || n.left <= i || n.right <= i ||
        n.left >= count || n.right >= count)
      Reader::corrupt("malformed tree node");
  }
  return t;
}

}  // namespace

std::string save_model(const TrainedModel& m) {
  Writer p;
  p.u8(static_cast<std::uint8_t>(m.kind));
  p.u8(static_cast<std::uint8_t>(m.phase));
  p.size(m.num_features);
  p.str(m.registry_digest);
  write_hp(p, m.hp);
  p.reals(m.scaler.mean);
  p.reals(m.scaler.scale);
  p.f64(m.svm.gamma);
  p.size(m.svm.dims);
  p.reals(m.svm.support);
  p.reals(m.svm.coef);
  p.f64(m.svm.rho);
  p.size(m.svm.iterations);
  p.size(m.trees.size());
  for (const auto& t : m.trees) write_tree(p, t);
  p.f64(m.init_score);
  p.size(m.isolation_samples);
  const auto payload = p.take();

  Writer env;
  auto out = std::string(kMagic);
  env.u32(m.format_version);
  env.size(payload.size());
  out += env.take();
  out += payload;
  out += sha256_hex(payload);
  return out;
}

TrainedModel load_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    Reader::corrupt("missing STRKMDL1 header");
  Reader head(bytes.substr(kMagic.size()));
  const auto version = head.u32();
  if (version != kModelFormatVersion)
    throw Error(ErrorCode::VersionUnsupported,
                "model format version " + std::to_string(version) + " is not supported",
                "models");
  const auto len = head.u64();
  const std::size_t header = kMagic.size() + 4 + 8;
  if (bytes.size() < header + kDigestChars || len != bytes.size() - header - kDigestChars)
    Reader::corrupt("payload length does not match the file size");
  const auto payload = bytes.substr(header, static_cast<std::size_t>(len));
  if (sha256_hex(payload) != bytes.substr(header + payload.size()))
    Reader::corrupt("payload checksum mismatch");

  Reader r(payload);
  TrainedModel m;
  m.format_version = version;
  const auto kind = r.u8();
  const auto phase = r.u8();
  if (kind >= kModelKinds.size() || phase >= kPhases.size()) Reader::corrupt("bad kind or phase");
  m.kind = static_cast<ModelKind>(kind);
  m.phase = static_cast<Phase>(phase);
  m.num_features = r.size(1u << 24);
  m.registry_digest = r.str();
  m.hp = read_hp(r);
  m.scaler.mean = r.reals();
  m.scaler.scale = r.reals();
  m.svm.gamma = r.f64();
  m.svm.dims = r.size(1u << 24);
  m.svm.support = r.reals();
  m.svm.coef = r.reals();
  m.svm.rho = r.f64();
  m.svm.iterations = r.size(~std::uint64_t{0});
  const auto trees = r.size(r.remaining());
  m.trees.reserve(trees);
  for (std::size_t i = 0; i < trees; ++i) m.trees.push_back(read_tree(r, m.num_features));
  m.init_score = r.f64();
  m.isolation_samples = r.size(1u << 24);
  if (r.remaining() != 0) Reader::corrupt("trailing bytes in payload");

  const bool kernel = m.kind == ModelKind::KernelSVC || m.kind == ModelKind::OneClassSVM;
  if (kernel && (m.scaler.mean.size() != m.num_features ||
                 m.scaler.scale.size() != m.num_features || m.svm.dims != m.num_features ||
                 m.svm.support.size() != m.svm.coef.size() * m.svm.dims))
    Reader::corrupt("inconsistent SVM parameters");
  if (!kernel && m.trees.empty()) Reader::corrupt("tree model without trees");
  return m;
}

}  // namespace paddle
