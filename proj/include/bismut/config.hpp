#pragma once

#include <bismut/bounds.hpp>
#include <bismut/estimators.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace bismut::config {

using json = nlohmann::json;

inline constexpr const char* kResultSchema = "bismut.result/1";
inline constexpr const char* kBoundSchema = "bismut.bound/1";

// ----------------------------------------------------------------------------
// Reading

/// View of one JSON object that records which keys were read, so that
/// unknown keys can be rejected with their full field name.
class Node {
public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError("expected an object", path_);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

  const json& raw(const std::string& key) const {
    used_.insert(key);
    if (!has(key)) throw ValidationError("missing required field '" + field(key) + "'", field(key));
    return (*j_)[key];
  }

  Node child(const std::string& key) const { return Node(raw(key), field(key)); }
  std::optional<Node> opt_child(const std::string& key) const {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return Node((*j_)[key], field(key));
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ValidationError("expected a number", field(key));
    return v.get<double>();
  }
  double number_or(const std::string& key, double def) const {
    used_.insert(key);
    return has(key) ? number(key) : def;
  }

  std::uint64_t count(const std::string& key) const {
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d <= 9.007199254740992e15 && d == std::floor(d)) return static_cast<std::uint64_t>(d);
    }
    throw ValidationError("expected a non-negative integer", field(key));
  }
  std::uint64_t count_or(const std::string& key, std::uint64_t def) const {
    used_.insert(key);
    return has(key) ? count(key) : def;
  }

  std::string str(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw ValidationError("expected a string", field(key));
    return v.get<std::string>();
  }
  std::string str_or(const std::string& key, const std::string& def) const {
    used_.insert(key);
    return has(key) ? str(key) : def;
  }

  Vec vec(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxAmbient))
      throw ValidationError("expected an array of 1.." + std::to_string(kMaxAmbient) + " numbers", field(key));
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ValidationError("expected an array of numbers", field(key));
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) throw ValidationError("expected an array of numbers", field(key));
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError("expected an array of numbers", field(key));
      out.push_back(x.get<double>());
    }
    return out;
  }

  Mat mat(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxAmbient))
      throw ValidationError("expected a square array of rows", field(key));
    const auto n = static_cast<Eigen::Index>(v.size());
    Mat out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = v[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
        throw ValidationError("expected a square array of rows", field(key));
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!row[static_cast<std::size_t>(j)].is_number())
          throw ValidationError("expected numbers", field(key));
        out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
    return out;
  }

  std::map<std::string, double> number_map(const std::string& key) const {
    std::map<std::string, double> out;
    used_.insert(key);
    if (!has(key)) return out;
    const json& v = (*j_)[key];
    if (!v.is_object()) throw ValidationError("expected an object of numbers", field(key));
    for (const auto& [k, x] : v.items()) {
      if (!x.is_number()) throw ValidationError("expected a number", field(key) + "." + k);
      out[k] = x.get<double>();
    }
    return out;
  }

  /// Marks an optional key as known without reading it.
  void allow(const std::string& key) const { used_.insert(key); }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw ValidationError("unknown field '" + field(k) + "'", field(k));
  }

private:
  const json* j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'", "config");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what(), "config");
  }
}

// ----------------------------------------------------------------------------
// Hashing and output

/// Canonical form: sorted keys, compact, without the output block and the
/// worker count.
inline std::string canonical_form(json cfg) {
  cfg.erase("output");
  if (cfg.contains("execution") && cfg["execution"].is_object()) cfg["execution"].erase("workers");
  return cfg.dump();
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string config_hash(const json& cfg) { return sha256_hex(canonical_form(cfg)); }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

/// Shortest round-trip decimal form, independent of the locale.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\r\n";
}

// ----------------------------------------------------------------------------
// Model, domain, functions

inline ManifoldModel parse_model(const Node& m) {
  const std::string kind = m.str("kind");
  ManifoldModel model = [&] {
    if (kind == "euclidean") return ManifoldModel::euclidean(static_cast<int>(m.count_or("n", 2)));
    if (kind == "sphere")
      return ManifoldModel::sphere(static_cast<int>(m.count_or("n", 2)), m.number_or("kappa", 1.0));
    if (kind == "hyperbolic")
      return ManifoldModel::hyperbolic(static_cast<int>(m.count_or("n", 2)), m.number_or("kappa", -1.0));
    if (kind == "conformal_plane") return ManifoldModel::conformal_plane(m.str("phi"), m.number_map("params"));
    throw ValidationError("unknown model kind '" + kind + "'", m.field("kind"));
  }();
  m.finish();
  return model;
}

/// Test function or harmonic case of the estimator block.
struct FunctionSpec {
  TestFunction f;
  std::optional<HarmonicCase> harmonic;
};

inline FunctionSpec parse_function(const Node& n, const ManifoldModel& model, const BallDomain& ball) {
  const int amb = model->ambient_dim();
  const std::string kind = n.str("kind");
  FunctionSpec out;
  auto check_dim = [&](const Vec& v, const char* key) {
    if (v.size() != amb) throw ValidationError("expected " + std::to_string(amb) + " ambient coordinates", n.field(key));
  };
  if (kind == "constant") {
    out.f = TestFunction::constant(amb, n.number("c"));
  } else if (kind == "linear") {
    const Vec a = n.vec("a");
    check_dim(a, "a");
    out.f = TestFunction::linear(a, n.number_or("c", 0.0));
  } else if (kind == "quadratic") {
    const Mat A = n.mat("A");
    if (A.rows() != amb) throw ValidationError("A must be ambient-dimensional", n.field("A"));
    const Vec b = n.has("b") ? n.vec("b") : Vec(Vec::Zero(amb));
    check_dim(b, "b");
    out.f = TestFunction::quadratic(A, b, n.number_or("c", 0.0));
  } else if (kind == "gaussian_bump") {
    const Vec c = n.has("center") ? n.vec("center") : Vec(Vec::Zero(amb));
    check_dim(c, "center");
    out.f = TestFunction::gaussian_bump(c, n.number_or("sigma", 1.0));
  } else if (kind == "expr") {
    out.f = TestFunction::expression(n.str("expr"), amb, n.number_map("params"));
  } else if (kind == "harmonic") {
    const std::string data = n.str_or("data", "exp(x)*cos(y)");
    out.harmonic = harmonic_library(model, n.str("id"), ball, data);
    out.f = out.harmonic->u;
  } else {
    throw ValidationError("unknown function kind '" + kind + "'", n.field("kind"));
  }
  if (n.has("bound")) out.f.with_bound(n.number("bound"));
  n.finish();
  return out;
}

inline KSpec parse_k(const std::optional<Node>& n, double T, KOrientation default_orientation) {
  KSpec k;
  k.T = T;
  k.orientation = default_orientation;
  if (!n) return k;
  const std::string kind = n->str_or("kind", "linear");
  if (kind == "linear") k.kind = KKind::linear;
  else if (kind == "exp_profile") k.kind = KKind::exp_profile;
  else if (kind == "timechange") k.kind = KKind::timechange;
  else throw ValidationError("unknown k kind '" + kind + "'", n->field("kind"));
  const std::string orient = n->str_or("orientation", default_orientation == KOrientation::one_to_zero
                                                          ? "one_to_zero"
                                                          : "zero_to_one");
  if (orient == "one_to_zero") k.orientation = KOrientation::one_to_zero;
  else if (orient == "zero_to_one") k.orientation = KOrientation::zero_to_one;
  else throw ValidationError("orientation must be one_to_zero or zero_to_one", n->field("orientation"));
  k.lambda = n->number_or("lambda", 0.0);
  k.delay = n->number_or("delay", 0.0);
  if (k.kind == KKind::timechange) {
    k.t_horizon = n->number("t_horizon");
    k.T = k.t_horizon;
  } else {
    k.T = n->number_or("T", T);
  }
  n->finish();
  return k;
}

inline ExecutionConfig parse_execution(const Node& n) {
  ExecutionConfig e;
  e.n_paths = n.count("n_paths");
  e.h = n.number("h");
  e.seed = n.count("seed");
  e.workers = static_cast<unsigned>(n.count_or("workers", 0));
  e.chunk_size = n.count_or("chunk_size", e.chunk_size);
  e.max_discard_fraction = n.number_or("max_discard_fraction", e.max_discard_fraction);
  n.finish();
  e.validate();
  return e;
}

struct OutputSpec {
  std::string json_path;
  std::string csv_path;
};

inline OutputSpec parse_output(const std::optional<Node>& n) {
  OutputSpec o;
  if (!n) return o;
  o.json_path = n->str_or("json", "");
  o.csv_path = n->str_or("csv", "");
  n->finish();
  return o;
}

// ----------------------------------------------------------------------------
// simulate

enum class EstimatorKind {
  gradient,
  hessian_vv,
  hessian_vw,
  harmonic_hessian,
  martingale_drift,
  k_moment,
  w_moment,
  fd_hessian
};

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::gradient: return "gradient";
    case EstimatorKind::hessian_vv: return "hessian_vv";
    case EstimatorKind::hessian_vw: return "hessian_vw";
    case EstimatorKind::harmonic_hessian: return "harmonic_hessian";
    case EstimatorKind::martingale_drift: return "martingale_drift";
    case EstimatorKind::k_moment: return "k_moment";
    case EstimatorKind::w_moment: return "w_moment";
    case EstimatorKind::fd_hessian: return "fd_hessian";
  }
  return "?";
}

inline EstimatorKind estimator_from_string(const std::string& s, const std::string& field) {
  for (int i = 0; i <= static_cast<int>(EstimatorKind::fd_hessian); ++i)
    if (s == to_string(static_cast<EstimatorKind>(i))) return static_cast<EstimatorKind>(i);
  throw ValidationError("unknown estimator kind '" + s + "'", field);
}

struct SimulationSpec {
  json raw;
  std::string hash;
  EstimatorKind kind = EstimatorKind::hessian_vv;
  EstimatorSetup setup;
  std::optional<FunctionSpec> fn;
  Vec v, w;
  HessianVariant variant = HessianVariant::three_term;
  HarmonicMode mode = HarmonicMode::interior_eval;
  double harmonic_tolerance = kHarmonicTolerance;
  std::vector<double> grid;
  double q = 1.0, t = 1.0, lambda = -1.0, epsilon = 0.02;
  OutputSpec output;

  const ManifoldModel& model() const { return setup.ball->model(); }
};

/// Validates a simulate config completely; nothing is simulated.
inline SimulationSpec parse_simulation(const json& cfg) {
  SimulationSpec s;
  s.raw = cfg;
  s.hash = config_hash(cfg);
  const Node root(cfg, "");
  const ManifoldModel model = parse_model(root.child("model"));
  const Node est = root.child("estimator");
  s.kind = estimator_from_string(est.str("kind"), "estimator.kind");
  s.setup.exec = parse_execution(root.child("execution"));
  s.output = parse_output(root.opt_child("output"));

  const Vec x = est.has("x") ? est.vec("x") : model->base_point();
  const double radius = est.number("radius");
  s.setup.ball = std::make_shared<BallDomain>(model, x, radius);
  const int n = model.dim();
  auto unit_vec = [&](const char* key) {
    const Vec v = est.vec(key);
    detail::require_unit(v, n, (std::string("estimator.") + key).c_str());
    return v;
  };

  if (s.kind == EstimatorKind::k_moment) {
    s.q = est.number_or("q", 1.0);
    s.t = est.number("t");
    s.lambda = est.number_or("lambda", -1.0);
    s.setup.T = s.t;
  } else {
    s.setup.T = est.number("T");
    s.v = unit_vec("v");
    if (s.kind == EstimatorKind::hessian_vw) s.w = unit_vec("w");
    s.fn = parse_function(est.child("f"), model, *s.setup.ball);
    const auto orient = s.kind == EstimatorKind::gradient ? KOrientation::zero_to_one : KOrientation::one_to_zero;
    s.setup.k = parse_k(est.opt_child("k"), s.setup.T, orient);
  }
  if (s.kind == EstimatorKind::hessian_vv) {
    const std::string var = est.str_or("variant", "three_term");
    if (var == "three_term") s.variant = HessianVariant::three_term;
    else if (var == "iterated") s.variant = HessianVariant::iterated;
    else throw ValidationError("variant must be three_term or iterated", "estimator.variant");
  }
  if (s.kind == EstimatorKind::harmonic_hessian) {
    if (!s.fn->harmonic) throw ValidationError("harmonic_hessian needs a harmonic function", "estimator.f.kind");
    const std::string mode = est.str_or("mode", "interior_eval");
    if (mode == "interior_eval") s.mode = HarmonicMode::interior_eval;
    else if (mode == "exit_eval") s.mode = HarmonicMode::exit_eval;
    else throw ValidationError("mode must be interior_eval or exit_eval", "estimator.mode");
    s.harmonic_tolerance = est.number_or("harmonic_tolerance", kHarmonicTolerance);
  }
  if (s.kind == EstimatorKind::martingale_drift) s.grid = est.numbers("grid");
  if (s.kind == EstimatorKind::fd_hessian) s.epsilon = est.number_or("epsilon", 0.02);
  est.finish();
  if (root.has("description")) root.str("description");
  root.allow("sweep");
  root.finish();
  return s;
}

inline json estimate_json(const Estimate& e) {
  const auto& d = e.diagnostics;
  return json{{"value", e.value},
              {"stderr", e.stderr_},
              {"n_paths", e.n_paths},
              {"seed", e.seed},
              {"diagnostics",
               {{"kurtosis", d.kurtosis},
                {"effective_sample_size", d.effective_sample_size},
                {"discarded_paths", d.discarded_paths},
                {"clock_not_reached", d.clock_not_reached},
                {"exited_early", d.exited_early},
                {"heavy_tail_warning", d.heavy_tail_warning}}}};
}

struct SimulationResult {
  json result;  // without the timestamp
  std::string csv;
  double estimate = 0.0;
  double stderr_ = 0.0;
};

inline SimulationResult run_simulation(const SimulationSpec& s) {
  SimulationResult out;
  json& r = out.result;
  r["schema"] = kResultSchema;
  r["config_hash"] = s.hash;
  r["estimator"] = to_string(s.kind);
  r["model"] = to_string(s.model().kind());
  const auto& ball = *s.setup.ball;
  const Mat& frame = ball.center_frame();
  std::optional<double> reference;
  std::string ref_source;
  auto exact_jet = [&]() -> std::optional<HeatJet> {
    if (s.fn && has_exact_heat(s.model(), s.fn->f)) return exact_heat(s.model(), s.fn->f, ball.center(), frame, s.setup.T);
    return std::nullopt;
  };
  Estimate e;
  switch (s.kind) {
    case EstimatorKind::gradient: {
      e = estimate_gradient(s.setup, s.fn->f, s.v);
      if (auto j = exact_jet()) reference = j->grad.dot(s.v), ref_source = "exact_heat";
      break;
    }
    case EstimatorKind::hessian_vv: {
      e = estimate_hessian_vv(s.setup, s.fn->f, s.v, s.variant);
      if (auto j = exact_jet()) reference = s.v.dot(j->hess * s.v), ref_source = "exact_heat";
      r["variant"] = s.variant == HessianVariant::three_term ? "three_term" : "iterated";
      break;
    }
    case EstimatorKind::hessian_vw: {
      e = estimate_hessian_vw(s.setup, s.fn->f, s.v, s.w);
      if (auto j = exact_jet()) reference = s.v.dot(j->hess * s.w), ref_source = "exact_heat";
      break;
    }
    case EstimatorKind::harmonic_hessian: {
      e = estimate_harmonic_hessian(s.setup, s.fn->f, s.v, s.mode, s.harmonic_tolerance);
      reference = s.v.dot(s.fn->harmonic->hessian(ball.center(), frame) * s.v);
      ref_source = "harmonic_library";
      r["mode"] = s.mode == HarmonicMode::interior_eval ? "interior_eval" : "exit_eval";
      break;
    }
    case EstimatorKind::martingale_drift: {
      const auto table = martingale_drift_test(s.setup, s.fn->f, s.v, s.grid);
      json rows = json::array();
      out.csv = csv_row({"t", "mean", "stderr"});
      for (const auto& row : table.rows) {
        rows.push_back({{"t", row.t}, {"mean", row.mean}, {"stderr", row.stderr_}});
        out.csv += csv_row({format_number(row.t), format_number(row.mean), format_number(row.stderr_)});
      }
      r["drift"] = {{"reference", table.reference}, {"rows", rows}, {"passed", table.passed()}};
      e = table.estimates.back();
      reference = table.reference;
      ref_source = "exact_heat";
      break;
    }
    case EstimatorKind::k_moment: {
      const auto km = k_moment_check(s.setup, s.q, s.t, s.lambda);
      e = km.mc;
      r["k_moment"] = {{"q", s.q}, {"t", s.t}, {"lambda", km.lambda}, {"bound", km.bound}, {"crude", km.crude}};
      break;
    }
    case EstimatorKind::w_moment: {
      e = w_moment(s.setup, s.v);
      if (s.setup.k.kind == KKind::linear) {
        const double kdot2 = 1.0 / (s.setup.k.T - s.setup.k.delay);
        r["bound"] = lemma22_rhs_deterministic(geom_bounds(ball), s.setup.T, kdot2);
      }
      break;
    }
    case EstimatorKind::fd_hessian: {
      FdHessianConfig fc;
      fc.T = s.setup.T;
      fc.h = s.setup.exec.h;
      fc.epsilon = s.epsilon;
      fc.exec = s.setup.exec;
      e = fd_hessian(s.model(), s.fn->f, ball.center(), frame, s.v, fc);
      if (auto j = exact_jet()) reference = s.v.dot(j->hess * s.v), ref_source = "exact_heat";
      break;
    }
  }
  r["estimate"] = estimate_json(e);
  if (reference) r["reference"] = {{"value", *reference}, {"source", ref_source}};
  out.estimate = e.value;
  out.stderr_ = e.stderr_;
  return out;
}

// ----------------------------------------------------------------------------
// bound

struct BoundSpec {
  json raw;
  std::string hash;
  FormulaId id = FormulaId::c1;
  BoundInputs in;
  OutputSpec output;
};

/// {formula_id, inputs}. Curvature constants come from `inputs` directly or
/// from a `domain` block {model, x, radius} through the geometry bounds.
inline BoundSpec parse_bound(const json& cfg) {
  BoundSpec b;
  b.raw = cfg;
  b.hash = config_hash(cfg);
  const Node root(cfg, "");
  const std::string fid = root.str("formula_id");
  try {
    b.id = formula_from_string(fid);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "formula_id");
  }
  const Node in = root.child("inputs");
  BoundInputs& x = b.in;
  if (auto dom = root.opt_child("domain")) {
    const ManifoldModel model = parse_model(dom->child("model"));
    const Vec c = dom->has("x") ? dom->vec("x") : model->base_point();
    x.gb = geom_bounds(model, c, dom->number("radius"));
    dom->finish();
  }
  x.gb.n = static_cast<int>(in.count_or("n", static_cast<std::uint64_t>(x.gb.n)));
  x.gb.K0 = in.number_or("K0", x.gb.K0);
  x.gb.K1 = in.number_or("K1", x.gb.K1);
  x.gb.K2 = in.number_or("K2", x.gb.K2);
  x.gb.delta_x = in.number_or("delta_x", x.gb.delta_x);
  x.T = in.number_or("T", x.T);
  x.sup_f = in.number_or("sup_f", x.sup_f);
  x.sup_u = in.number_or("sup_u", x.sup_u);
  x.u_at_x = in.number_or("u_at_x", x.u_at_x);
  x.q = in.number_or("q", x.q);
  x.delta = in.number_or("delta", x.delta);
  x.delta1 = in.number_or("delta1", x.delta1);
  x.delta2 = in.number_or("delta2", x.delta2);
  x.p = in.number_or("p", x.p);
  x.k_moment = in.number_or("k_moment", x.k_moment);
  x.t = in.number_or("t", x.t);
  in.finish();
  b.output = parse_output(root.opt_child("output"));
  if (root.has("description")) root.str("description");
  root.allow("sweep");
  root.finish();
  x.validate();
  return b;
}

inline json run_bound(const BoundSpec& b) {
  const auto r = evaluate_bound(b.in, b.id);
  if (!std::isfinite(r.value)) throw NumericalError(std::string("bound ") + to_string(b.id) + " is not finite");
  json out;
  out["schema"] = kBoundSchema;
  out["config_hash"] = b.hash;
  out["formula_id"] = to_string(b.id);
  out["value"] = r.value;
  out["minimizer"] = json::object();
  for (const auto& [k, v] : r.minimizer) out["minimizer"][k] = v;
  out["attained_in_limit"] = r.attained_in_limit;
  return out;
}

// ----------------------------------------------------------------------------
// sweep

struct SweepAxis {
  std::string param;  // dotted path into the config
  std::vector<json> values;
};

inline std::vector<SweepAxis> parse_sweep(const json& cfg) {
  if (!cfg.contains("sweep")) throw ValidationError("missing required field 'sweep'", "sweep");
  const json& s = cfg["sweep"];
  if (!s.is_array() || s.empty()) throw ValidationError("sweep must be a non-empty array of axes", "sweep");
  std::vector<SweepAxis> axes;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Node n(s[i], "sweep[" + std::to_string(i) + "]");
    SweepAxis a;
    a.param = n.str("param");
    const json& vals = n.raw("values");
    if (!vals.is_array() || vals.empty()) throw ValidationError("values must be a non-empty array", n.field("values"));
    for (const auto& v : vals) a.values.push_back(v);
    n.finish();
    if (a.param.empty() || a.param == "sweep" || a.param.rfind("output", 0) == 0)
      throw ValidationError("param must name a config field", n.field("param"));
    axes.push_back(std::move(a));
  }
  return axes;
}

inline json::json_pointer dotted_pointer(const std::string& dotted) {
  std::string p = "/";
  for (char c : dotted) p += c == '.' ? '/' : c;
  return json::json_pointer(p);
}

inline std::string csv_value(const json& v) {
  if (v.is_number()) return format_number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

/// Cartesian product over the axes, first axis slowest. Bound configs (with
/// formula_id) report the bound value; simulate configs report the estimate.
inline std::string run_sweep(const json& cfg) {
  const auto axes = parse_sweep(cfg);
  json base = cfg;
  base.erase("sweep");
  base.erase("output");
  const bool is_bound = base.contains("formula_id");
  std::vector<std::string> header;
  for (const auto& a : axes) header.push_back(a.param);
  if (is_bound) {
    header.push_back("value");
  } else {
    for (const char* h : {"estimate", "stderr", "n_paths"}) header.push_back(h);
  }
  std::string csv = csv_row(header);
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    json point = base;
    std::vector<std::string> row;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const json& v = axes[i].values[idx[i]];
      point[dotted_pointer(axes[i].param)] = v;
      row.push_back(csv_value(v));
    }
    if (is_bound) {
      row.push_back(format_number(run_bound(parse_bound(point))["value"].get<double>()));
    } else {
      const auto res = run_simulation(parse_simulation(point));
      row.push_back(format_number(res.estimate));
      row.push_back(format_number(res.stderr_));
      row.push_back(std::to_string(res.result["estimate"]["n_paths"].get<std::uint64_t>()));
    }
    csv += csv_row(row);
    std::size_t d = axes.size();
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].values.size()) break;
      idx[d] = 0;
      if (d == 0) return csv;
    }
    if (axes.empty()) return csv;
  }
}

} // namespace bismut::config
