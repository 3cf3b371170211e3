#include "arz/deeponet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "arz/errors.hpp"

namespace arz {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'R', 'Z', 'D', 'O', 'N', 'E', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kActivationTanh = 1;

std::vector<int> stack(int in, int width, int depth, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < depth; ++i) w.push_back(width);
  w.push_back(out);
  return w;
}

}  // namespace

const char* to_string(OperatorKind kind) {
  return kind == OperatorKind::kernel ? "kernel_operator" : "law_operator";
}

DeepONet DeepONet::create(OperatorKind kind, const NetworkSpec& spec, double lambda2_lo,
                          double lambda2_hi, double length, double horizon, std::mt19937_64& rng) {
  if (spec.width < 1 || spec.depth < 1 || spec.p < 1) throw ConfigError("network: width, depth and p must be positive");
  if (!(lambda2_hi > lambda2_lo)) throw ConfigError("network: trained lambda2 range is empty");
  DeepONet m;
  m.kind = kind;
  m.p = spec.p;
  m.heads = kind == OperatorKind::kernel ? 2 : 1;
  m.branch = Mlp(stack(1, spec.width, spec.depth, m.heads * spec.p), rng);
  m.trunk = Mlp(stack(m.trunk_dim(), spec.width, spec.depth, spec.p), rng);
  m.sensor = {lambda2_lo, lambda2_hi};
  m.length = length;
  m.horizon = horizon;
  if (kind == OperatorKind::kernel) {
    m.coords = {{0.0, length}, {0.0, length}};
  } else {
    m.coords = {{0.0, horizon}};
  }
  m.outputs.assign(static_cast<std::size_t>(m.heads), OutputScaler{});
  return m;
}

bool DeepONet::in_trained_range(double lambda2) const {
  const double tol = 1e-9 * (sensor.hi - sensor.lo);
  return lambda2 >= sensor.lo - tol && lambda2 <= sensor.hi + tol;
}

Eigen::MatrixXd DeepONet::branch_input(std::span<const double> lambda2) const {
  Eigen::MatrixXd in(1, static_cast<Eigen::Index>(lambda2.size()));
  for (std::size_t b = 0; b < lambda2.size(); ++b) in(0, static_cast<Eigen::Index>(b)) = sensor.apply(lambda2[b]);
  return in;
}

Eigen::MatrixXd DeepONet::trunk_input(const Eigen::MatrixXd& points) const {
  if (points.rows() != trunk_dim()) throw ShapeError("DeepONet: trunk points have the wrong dimension");
  Eigen::MatrixXd in(points.rows(), points.cols());
  for (Eigen::Index d = 0; d < points.rows(); ++d) {
    for (Eigen::Index q = 0; q < points.cols(); ++q) in(d, q) = coords[static_cast<std::size_t>(d)].apply(points(d, q));
  }
  return in;
}

Eigen::MatrixXd DeepONet::branch_features(std::span<const double> lambda2) const {
  return branch.forward(branch_input(lambda2));
}

Eigen::MatrixXd DeepONet::trunk_features(const Eigen::MatrixXd& points) const {
  return trunk.forward(trunk_input(points));
}

Eigen::MatrixXd DeepONet::combine(const Eigen::MatrixXd& branch_feat, const Eigen::MatrixXd& trunk_feat,
                                  int head, int p) {
  return branch_feat.middleRows(static_cast<Eigen::Index>(head) * p, p).transpose() * trunk_feat;
}

void DeepONet::validate() const {
  if (p < 1 || heads < 1) throw ShapeError("DeepONet: p and heads must be positive");
  if (heads != (kind == OperatorKind::kernel ? 2 : 1)) throw ShapeError("DeepONet: head count does not match operator kind");
  if (branch.input_dim() != 1) throw ShapeError("DeepONet: branch input must be the scalar lambda2");
  if (branch.output_dim() != heads * p) throw ShapeError("DeepONet: branch output must be heads*p");
  if (trunk.input_dim() != trunk_dim()) throw ShapeError("DeepONet: trunk input dimension mismatch");
  if (trunk.output_dim() != p) throw ShapeError("DeepONet: trunk output must be p");
  if (static_cast<int>(coords.size()) != trunk_dim() || static_cast<int>(outputs.size()) != heads) {
    throw ShapeError("DeepONet: scaler counts do not match layout");
  }
}

OperatorPrediction deeponet_eval(const DeepONet& model, double lambda2, const Eigen::MatrixXd& points) {
  const double l2[1] = {lambda2};
  const Eigen::MatrixXd bf = model.branch_features(l2);
  const Eigen::MatrixXd tf = model.trunk_features(points);
  OperatorPrediction out;
  out.extrapolated = !model.in_trained_range(lambda2);
  out.heads.resize(static_cast<std::size_t>(model.heads));
  for (int h = 0; h < model.heads; ++h) {
    const Eigen::MatrixXd pred = DeepONet::combine(bf, tf, h, model.p);
    const OutputScaler& sc = model.outputs[static_cast<std::size_t>(h)];
    auto& dst = out.heads[static_cast<std::size_t>(h)];
    dst.resize(static_cast<std::size_t>(pred.cols()));
    for (Eigen::Index q = 0; q < pred.cols(); ++q) dst[static_cast<std::size_t>(q)] = sc.mean + sc.scale * pred(0, q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void mlp(const Mlp& m) {
    u32(static_cast<std::uint32_t>(m.widths().size()));
    for (int w : m.widths()) u32(static_cast<std::uint32_t>(w));
    for (const auto& layer : m.layers()) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) f64(layer.weight(r, c));
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) f64(layer.bias(r));
    }
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw ModelIoError("model file truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  Mlp mlp() {
    const std::uint32_t count = u32();
    if (count < 2 || count > 64) throw ModelIoError("model file: implausible layer count");
    std::vector<int> widths;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t w = u32();
      if (w == 0 || w > (1u << 16)) throw ModelIoError("model file: implausible layer width");
      widths.push_back(static_cast<int>(w));
    }
    Mlp m = Mlp::zeros(widths);
    for (auto& layer : m.layers()) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = f64();
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = f64();
    }
    return m;
  }
  [[nodiscard]] bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const DeepONet& model) {
  model.validate();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.kind));
  w.u32(static_cast<std::uint32_t>(model.p));
  w.u32(static_cast<std::uint32_t>(model.heads));
  w.u32(kActivationTanh);
  w.f64(model.sensor.lo);
  w.f64(model.sensor.hi);
  w.u32(static_cast<std::uint32_t>(model.coords.size()));
  for (const auto& c : model.coords) {
    w.f64(c.lo);
    w.f64(c.hi);
  }
  for (const auto& o : model.outputs) {
    w.f64(o.mean);
    w.f64(o.scale);
  }
  w.f64(model.length);
  w.f64(model.horizon);
  w.mlp(model.branch);
  w.mlp(model.trunk);
  return w.take();
}

DeepONet deserialize_model(const std::string& bytes, std::optional<OperatorKind> expected) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ModelIoError("not a model file (bad magic bytes)");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw ModelIoError("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw ModelIoError("model file: unknown operator kind");
  DeepONet m;
  m.kind = static_cast<OperatorKind>(kind);
  if (expected && *expected != m.kind) {
    throw ModelIoError(std::string("model kind mismatch: file holds a ") + to_string(m.kind) + ", expected a " +
                       to_string(*expected));
  }
  m.p = static_cast<int>(r.u32());
  m.heads = static_cast<int>(r.u32());
  if (r.u32() != kActivationTanh) throw ModelIoError("model file: unsupported activation");
  m.sensor.lo = r.f64();
  m.sensor.hi = r.f64();
  const std::uint32_t ncoords = r.u32();
  if (ncoords > 2) throw ModelIoError("model file: implausible trunk dimension");
  m.coords.resize(ncoords);
  for (auto& c : m.coords) {
    c.lo = r.f64();
    c.hi = r.f64();
  }
  if (m.heads < 1 || m.heads > 2) throw ModelIoError("model file: implausible head count");
  m.outputs.resize(static_cast<std::size_t>(m.heads));
  for (auto& o : m.outputs) {
    o.mean = r.f64();
    o.scale = r.f64();
  }
  m.length = r.f64();
  m.horizon = r.f64();
  m.branch = r.mlp();
  m.trunk = r.mlp();
  if (!r.at_end()) throw ModelIoError("model file: trailing bytes");
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw ModelIoError(std::string("model file: ") + e.what());
  }
  return m;
}

void save_model(const DeepONet& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ModelIoError("cannot write model file " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw ModelIoError("error writing model file " + path.string());
  }
  nlohmann::json meta;
  meta["format"] = "arz-deeponet";
  meta["version"] = kFormatVersion;
  meta["kind"] = to_string(model.kind);
  meta["p"] = model.p;
  meta["heads"] = model.heads;
  meta["activation"] = "tanh";
  meta["branch_widths"] = model.branch.widths();
  meta["trunk_widths"] = model.trunk.widths();
  meta["trained_lambda2_range"] = {model.sensor.lo, model.sensor.hi};
  meta["length_m"] = model.length;
  meta["horizon_s"] = model.horizon;
  meta["hash"] = hex64(fnv1a64(bytes));
  std::ofstream js(path.string() + ".json");
  if (!js) throw ModelIoError("cannot write model manifest for " + path.string());
  js << meta.dump(2) << '\n';
}

DeepONet load_model(const std::filesystem::path& path, std::optional<OperatorKind> expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelIoError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return deserialize_model(ss.str(), expected);
  } catch (const ModelIoError& e) {
    throw ModelIoError(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace arz
