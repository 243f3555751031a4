#include "bhmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bhmc/diagnostics.hpp"

#ifndef BHMC_VERSION
#define BHMC_VERSION "unknown"
#endif

namespace bhmc {

using nlohmann::json;

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::bhmc:
      return "bhmc";
    case SamplerKind::bhmc_no_involution:
      return "bhmc_no_involution";
    case SamplerKind::mala:
      return "mala";
    case SamplerKind::imh:
      return "imh";
  }
  return "unknown";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "bhmc") return SamplerKind::bhmc;
  if (name == "bhmc_no_involution") return SamplerKind::bhmc_no_involution;
  if (name == "mala") return SamplerKind::mala;
  if (name == "imh") return SamplerKind::imh;
  throw std::invalid_argument("unknown sampler '" + name + "'");
}

namespace {

std::string to_string(MalaDrift drift) {
  switch (drift) {
    case MalaDrift::half_step:
      return "half_step";
    case MalaDrift::full_step:
      return "full_step";
    case MalaDrift::std_dev:
      return "std_dev";
  }
  return "unknown";
}

MalaDrift parse_drift(const std::string& name) {
  if (name == "half_step") return MalaDrift::half_step;
  if (name == "full_step") return MalaDrift::full_step;
  if (name == "std_dev") return MalaDrift::std_dev;
  throw std::invalid_argument("unknown mala_drift '" + name + "'");
}

}  // namespace

json default_config() {
  return {
      {"sampler", "bhmc"},
      {"polytope", "hypercube"},
      {"d", 5},
      {"half_width", 0.5},
      {"target", "gaussian"},
      {"mu", "default_mu"},
      {"replicates", 10},
      {"N", 100000},
      {"beta", 1.0},
      {"h0", 0.1},
      {"eta", nullptr},
      {"K", 30},
      {"fp_tol", 1e-10},
      {"blow_up", 1e6},
      {"require_convergence", true},
      {"seed", 0},
      {"norm_mode", "self_concordant"},
      {"adapt", true},
      {"target_accept", 0.5},
      {"rate_exponent", 0.7},
      {"burn_in", 0.2},
      {"include_burn_in", false},
      {"mala_h", 0.05},
      {"mala_drift", "std_dev"},
      {"threads", 0},
      {"out", "out"},
      {"trace_every", 0},
      {"reference_factor", 10},
      {"ablation_K", 5},
      {"write_samples", true},
  };
}

json experiment_defaults(const std::string& name) {
  if (name == "hypercube_bias") {
    return {{"polytope", "hypercube"}, {"half_width", 0.5}, {"target", "gaussian"},
            {"mu", "default_mu"}, {"write_samples", false}};
  }
  if (name == "simplex_bias") {
    return {{"polytope", "simplex"}, {"target", "gaussian"}, {"mu", "default_mu"},
            {"write_samples", false}};
  }
  if (name == "norm_ablation") {
    // Uniform law on [-1, 1]^2 at a fixed step. fp_tol is loosened so
    // round-trip errors are comparable to eta.
    return {{"polytope", "hypercube"}, {"d", 2},       {"half_width", 1.0},
            {"target", "uniform"},     {"N", 25000},   {"replicates", 1},
            {"h0", 0.8},               {"eta", 1e-4},  {"fp_tol", 1e-6},
            {"adapt", false},          {"include_burn_in", true}, {"write_samples", false}};
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

std::pair<std::string, json> parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value: '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

double default_eta(const std::string& polytope, int d) {
  if (polytope == "hypercube") return d <= 5 ? 5.0 : 10.0;
  if (polytope == "simplex") return d <= 5 ? 10.0 : 200.0;
  return 10.0;
}

namespace {

template <typename T>
T get_as(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentConfig resolve_config(const std::vector<json>& layers) {
  json merged = default_config();
  for (const auto& layer : layers) {
    if (layer.is_null()) continue;
    if (!layer.is_object()) throw std::invalid_argument("config layers must be JSON objects");
    for (const auto& [key, value] : layer.items()) {
      if (!merged.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
      merged[key] = value;
    }
  }

  ExperimentConfig cfg;
  cfg.sampler = parse_sampler(get_as<std::string>(merged, "sampler"));
  cfg.polytope = get_as<std::string>(merged, "polytope");
  cfg.d = get_as<int>(merged, "d");
  cfg.half_width = get_as<double>(merged, "half_width");
  cfg.target = get_as<std::string>(merged, "target");
  cfg.mu = merged.at("mu");
  cfg.replicates = get_as<int>(merged, "replicates");
  cfg.include_burn_in = get_as<bool>(merged, "include_burn_in");
  cfg.mala_h = get_as<double>(merged, "mala_h");
  cfg.mala_drift = parse_drift(get_as<std::string>(merged, "mala_drift"));
  cfg.threads = get_as<int>(merged, "threads");
  cfg.out = get_as<std::string>(merged, "out");
  cfg.trace_every = get_as<std::size_t>(merged, "trace_every");
  cfg.reference_factor = get_as<int>(merged, "reference_factor");
  cfg.ablation_K = get_as<int>(merged, "ablation_K");
  cfg.write_samples = get_as<bool>(merged, "write_samples");

  if (!parse_preset(cfg.polytope)) {
    if (!std::filesystem::exists(cfg.polytope)) {
      throw std::invalid_argument("polytope '" + cfg.polytope +
                                  "' is neither a preset nor an existing file");
    }
    cfg.d = static_cast<int>(Polytope::load(cfg.polytope).d());
  }
  if (cfg.d < 1) throw std::invalid_argument("d must be >= 1");
  if (cfg.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.target != "uniform" && cfg.target != "gaussian") {
    throw std::invalid_argument("target must be 'uniform' or 'gaussian'");
  }
  if (cfg.target == "gaussian") {
    if (cfg.mu.is_string()) {
      if (cfg.mu.get<std::string>() != "default_mu") {
        throw std::invalid_argument("mu must be \"default_mu\" or an array of numbers");
      }
      if (cfg.d < 2) throw std::invalid_argument("default_mu needs d >= 2");
    } else if (!cfg.mu.is_array() || static_cast<int>(cfg.mu.size()) != cfg.d) {
      throw std::invalid_argument("mu must have d entries");
    }
  }
  if (cfg.sampler == SamplerKind::imh && cfg.polytope != "simplex") {
    throw std::invalid_argument("imh is only available on the simplex preset");
  }
  if (cfg.reference_factor < 1) throw std::invalid_argument("reference_factor must be >= 1");
  if (cfg.ablation_K < 1) throw std::invalid_argument("ablation_K must be >= 1");
  if (!(cfg.mala_h > 0.0)) throw std::invalid_argument("mala_h must be > 0");

  ChainConfig& c = cfg.chain;
  c.N = get_as<std::size_t>(merged, "N");
  c.beta = get_as<double>(merged, "beta");
  c.h0 = get_as<double>(merged, "h0");
  c.eta = merged.at("eta").is_null() ? default_eta(cfg.polytope, cfg.d)
                                     : get_as<double>(merged, "eta");
  c.K = get_as<int>(merged, "K");
  c.fp_tol = get_as<double>(merged, "fp_tol");
  c.blow_up = get_as<double>(merged, "blow_up");
  c.require_convergence = get_as<bool>(merged, "require_convergence");
  c.seed = get_as<std::uint64_t>(merged, "seed");
  c.norm_mode = parse_norm_mode(get_as<std::string>(merged, "norm_mode"));
  c.involution = cfg.sampler != SamplerKind::bhmc_no_involution;
  c.adapt.enabled = get_as<bool>(merged, "adapt");
  c.adapt.target_accept = get_as<double>(merged, "target_accept");
  c.adapt.rate_exponent = get_as<double>(merged, "rate_exponent");
  c.adapt.burn_in = get_as<double>(merged, "burn_in");
  c.validate();

  if (cfg.trace_every == 0) cfg.trace_every = std::max<std::size_t>(1, c.N / 1000);
  return cfg;
}

json ExperimentConfig::to_json() const {
  return {
      {"sampler", to_string(sampler)},
      {"polytope", polytope},
      {"d", d},
      {"half_width", half_width},
      {"target", target},
      {"mu", mu},
      {"replicates", replicates},
      {"N", chain.N},
      {"beta", chain.beta},
      {"h0", chain.h0},
      {"eta", chain.eta},
      {"K", chain.K},
      {"fp_tol", chain.fp_tol},
      {"blow_up", chain.blow_up},
      {"require_convergence", chain.require_convergence},
      {"seed", chain.seed},
      {"norm_mode", to_string(chain.norm_mode)},
      {"adapt", chain.adapt.enabled},
      {"target_accept", chain.adapt.target_accept},
      {"rate_exponent", chain.adapt.rate_exponent},
      {"burn_in", chain.adapt.burn_in},
      {"include_burn_in", include_burn_in},
      {"mala_h", mala_h},
      {"mala_drift", to_string(mala_drift)},
      {"threads", threads},
      {"out", out.string()},
      {"trace_every", trace_every},
      {"reference_factor", reference_factor},
      {"ablation_K", ablation_K},
      {"write_samples", write_samples},
  };
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

// RFC 4180: comma separated, CRLF line endings, quoted when needed.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  CsvWriter& field(const std::string& s) {
    sep();
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
      out_ << s;
    } else {
      out_ << '"';
      for (char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
      out_ << '"';
    }
    return *this;
  }
  CsvWriter& field(double v) { return raw(format_double(v)); }
  CsvWriter& field(std::size_t v) { return raw(std::to_string(v)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(bool v) { return raw(v ? "1" : "0"); }

  void end_row() {
    out_ << "\r\n";
    first_ = true;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Polytope build_polytope(const ExperimentConfig& cfg) {
  if (auto kind = parse_preset(cfg.polytope)) return make_preset(*kind, cfg.d, cfg.half_width);
  return Polytope::load(cfg.polytope);
}

Vector target_mu(const ExperimentConfig& cfg) {
  if (cfg.mu.is_string()) return mu_vector(cfg.d);
  Vector mu(cfg.d);
  for (int j = 0; j < cfg.d; ++j) mu(j) = cfg.mu[static_cast<std::size_t>(j)].get<double>();
  return mu;
}

std::unique_ptr<TargetPotential> build_target(const ExperimentConfig& cfg) {
  if (cfg.target == "uniform") return std::make_unique<UniformTarget>();
  return std::make_unique<GaussianTarget>(target_mu(cfg));
}

// Direction of the tracked functional <x, w>: mu for Gaussian targets,
// the all-ones vector for the uniform target.
Vector functional_direction(const ExperimentConfig& cfg) {
  if (cfg.target == "gaussian") return target_mu(cfg);
  return Vector::Ones(cfg.d);
}

// Runs tasks on up to `threads` workers. Each task writes only its own slot,
// so the result does not depend on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TracePoint {
  std::size_t iter;
  double estimate;
};

struct StepRow {
  Vector x;  // position the iteration started from
  bool accepted;
  bool involution_rejected;
  bool dom_failed;
};

struct ReplicateResult {
  std::string arm;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::size_t kept = 0;
  double acceptance_rate = 0.0;
  double involution_rejection_rate = 0.0;
  double dom_failure_rate = 0.0;
  double final_h = std::numeric_limits<double>::quiet_NaN();
  Vector mean_x;
  double functional_mean = 0.0;
  double ess = std::numeric_limits<double>::quiet_NaN();
  std::vector<Vector> positions;
  std::vector<TracePoint> trace;
  std::vector<StepRow> steps;
};

struct RunRequest {
  std::string arm;
  SamplerKind kind = SamplerKind::bhmc;
  ChainConfig chain;
  std::size_t N = 0;
  int replicate = 0;
  bool keep_positions = false;
  bool keep_steps = false;
};

// Accumulates the kept part of a run.
class Tally {
 public:
  Tally(const Vector& direction, std::size_t skip, std::size_t trace_every)
      : dir_(direction), skip_(skip), every_(trace_every), sum_x_(Vector::Zero(direction.size())) {}

  void add(std::size_t iter, const Vector& x, bool accepted, bool inv, bool dom) {
    if (iter > skip_) {
      const double f = x.dot(dir_);
      fvals_.push_back(f);
      fsum_ += f;
      sum_x_ += x;
      accepted_ += accepted;
      inv_ += inv;
      dom_ += dom;
      if (iter % every_ == 0) trace_.push_back({iter, fsum_ / static_cast<double>(fvals_.size())});
    }
  }

  void finish(ReplicateResult& r, std::size_t last_iter) {
    r.iterations = last_iter;
    r.kept = fvals_.size();
    const double n = static_cast<double>(std::max<std::size_t>(r.kept, 1));
    r.acceptance_rate = accepted_ / n;
    r.involution_rejection_rate = inv_ / n;
    r.dom_failure_rate = dom_ / n;
    r.mean_x = sum_x_ / n;
    r.functional_mean = r.kept ? fsum_ / n : std::numeric_limits<double>::quiet_NaN();
    if (!trace_.empty() && trace_.back().iter != last_iter && r.kept) {
      trace_.push_back({last_iter, r.functional_mean});
    }
    r.trace = std::move(trace_);
    if (fvals_.size() >= 100) r.ess = ess(std::span<const double>(fvals_));
  }

 private:
  Vector dir_;
  std::size_t skip_;
  std::size_t every_;
  Vector sum_x_;
  std::vector<double> fvals_;
  double fsum_ = 0.0;
  double accepted_ = 0.0, inv_ = 0.0, dom_ = 0.0;
  std::vector<TracePoint> trace_;
};

ReplicateResult execute(const RunRequest& req, const ExperimentConfig& cfg, const Polytope& P,
                        const TargetPotential& V, const Vector& x_init, const Vector& direction) {
  ReplicateResult r;
  r.arm = req.arm;
  r.replicate = req.replicate;
  r.seed = req.chain.seed;
  const std::size_t trace_every = std::max<std::size_t>(1, cfg.trace_every * req.N / cfg.chain.N);

  if (req.kind == SamplerKind::bhmc || req.kind == SamplerKind::bhmc_no_involution) {
    ChainConfig cc = req.chain;
    cc.N = req.N;
    const std::size_t skip = cfg.include_burn_in ? 0 : cc.burn_in_iterations();
    Tally tally(direction, skip, trace_every);
    Chain chain(V, P, cc, x_init);
    for (std::size_t n = 1; n <= cc.N; ++n) {
      Vector start = chain.state().x;
      const ChainRecord& rec = chain.step();
      tally.add(n, rec.x, rec.accepted, rec.involution_rejected, rec.dom_failed);
      if (req.keep_positions) r.positions.push_back(rec.x);
      if (req.keep_steps) {
        r.steps.push_back({std::move(start), rec.accepted, rec.involution_rejected, rec.dom_failed});
      }
    }
    r.final_h = chain.step_size();
    tally.finish(r, cc.N);
    return r;
  }

  Tally tally(direction, 0, trace_every);
  auto observe = [&](std::size_t n, const Vector& x, bool accepted) {
    tally.add(n + 1, x, accepted, false, false);
    if (req.keep_positions) r.positions.push_back(x);
  };
  if (req.kind == SamplerKind::mala) {
    MalaConfig mc{cfg.mala_h, req.N, req.chain.seed, cfg.mala_drift};
    run_mala(V, P, mc, x_init, observe);
  } else {
    ImhConfig ic{req.N, req.chain.seed};
    run_imh(V, ic, x_init, observe);
  }
  tally.finish(r, req.N);
  return r;
}

std::vector<ReplicateResult> execute_all(const std::vector<RunRequest>& requests,
                                         const ExperimentConfig& cfg, const Polytope& P,
                                         const TargetPotential& V, const Vector& x_init,
                                         const Vector& direction) {
  std::vector<ReplicateResult> results(requests.size());
  parallel_for(requests.size(), cfg.threads, [&](std::size_t i) {
    results[i] = execute(requests[i], cfg, P, V, x_init, direction);
  });
  return results;
}

json replicate_json(const ReplicateResult& r, bool involution_tracked) {
  json j = {{"replicate", r.replicate},
            {"seed", r.seed},
            {"iterations", r.iterations},
            {"kept", r.kept},
            {"acceptance_rate", r.acceptance_rate},
            {"dom_failure_rate", r.dom_failure_rate},
            {"mean_x", vector_json(r.mean_x)},
            {"functional_mean", r.functional_mean}};
  if (involution_tracked) j["involution_rejection_rate"] = r.involution_rejection_rate;
  if (std::isfinite(r.final_h)) j["final_h"] = r.final_h;
  if (std::isfinite(r.ess)) j["ess"] = r.ess;
  return j;
}

json summary_json(const std::vector<double>& means) {
  if (means.size() < 2) return {{"means", means}, {"mean", means.empty() ? 0.0 : means[0]}};
  const ReplicateSummary s = replicate_ci(means);
  return {{"means", s.means},
          {"mean", s.mean},
          {"std_error", s.std_error},
          {"ci_half_width", s.ci_half_width}};
}

json meta_json(const ExperimentConfig& cfg, double seconds, const std::string& command) {
  return {{"command", command},
          {"version", BHMC_VERSION},
          {"config", cfg.to_json()},
          {"functional", cfg.target == "gaussian" ? "<x, mu>" : "<x, 1>"},
          {"wall_time_seconds", seconds}};
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vector start_point(const ExperimentConfig& cfg, const Polytope& P) {
  (void)cfg;
  return analytic_center(P);
}

std::vector<RunRequest> replicate_requests(const std::string& arm, SamplerKind kind,
                                           const ChainConfig& chain, std::size_t N, int R) {
  std::vector<RunRequest> out;
  for (int i = 0; i < R; ++i) {
    RunRequest req;
    req.arm = arm;
    req.kind = kind;
    req.chain = chain;
    req.chain.seed = chain.seed + static_cast<std::uint64_t>(i);
    req.N = N;
    req.replicate = i;
    out.push_back(std::move(req));
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<ReplicateResult>& results) {
  CsvWriter csv(path);
  csv.field(std::string("sampler")).field(std::string("replicate")).field(std::string("iter"))
      .field(std::string("estimate"));
  csv.end_row();
  for (const auto& r : results) {
    for (const auto& t : r.trace) {
      csv.field(r.arm).field(r.replicate).field(t.iter).field(t.estimate);
      csv.end_row();
    }
  }
}

}  // namespace

int cmd_sample(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Polytope P = build_polytope(cfg);
  const auto V = build_target(cfg);
  const Vector direction = functional_direction(cfg);
  const Vector x_init = start_point(cfg, P);

  auto requests = replicate_requests(to_string(cfg.sampler), cfg.sampler, cfg.chain, cfg.chain.N,
                                     cfg.replicates);
  for (auto& r : requests) r.keep_positions = cfg.write_samples;
  const auto results = execute_all(requests, cfg, P, *V, x_init, direction);

  std::filesystem::create_directories(cfg.out);
  if (cfg.write_samples) {
    CsvWriter csv(cfg.out / "samples.csv");
    csv.field(std::string("replicate")).field(std::string("iter"));
    for (int j = 1; j <= cfg.d; ++j) csv.field("x_" + std::to_string(j));
    csv.end_row();
    for (const auto& r : results) {
      for (std::size_t n = 0; n < r.positions.size(); ++n) {
        csv.field(r.replicate).field(n + 1);
        for (Eigen::Index j = 0; j < r.positions[n].size(); ++j) csv.field(r.positions[n](j));
        csv.end_row();
      }
    }
  }

  const bool involution_tracked = cfg.sampler == SamplerKind::bhmc;
  json reps = json::array();
  std::vector<double> means;
  for (const auto& r : results) {
    reps.push_back(replicate_json(r, involution_tracked));
    means.push_back(r.functional_mean);
  }
  write_json(cfg.out / "stats.json",
             {{"sampler", to_string(cfg.sampler)}, {"replicates", reps}, {"summary", summary_json(means)}});
  const double seconds = elapsed(start);
  write_json(cfg.out / "meta.json", meta_json(cfg, seconds, "sample"));

  log << to_string(cfg.sampler) << ": " << cfg.replicates << " replicate(s) x " << cfg.chain.N
      << " iterations in " << std::fixed << std::setprecision(1) << seconds << "s -> "
      << cfg.out.string() << "\n";
  return 0;
}

namespace {

struct ArmSummary {
  std::string arm;
  std::size_t N = 0;
  ReplicateSummary q;
  double acceptance_rate = 0.0;
  double involution_rejection_rate = 0.0;
  double dom_failure_rate = 0.0;
  double final_h = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
};

ArmSummary summarize_arm(const std::string& arm, const std::vector<ReplicateResult>& results) {
  ArmSummary s;
  s.arm = arm;
  std::vector<double> means;
  double count = 0.0, h_sum = 0.0, ess_sum = 0.0;
  bool have_h = true, have_ess = true;
  for (const auto& r : results) {
    if (r.arm != arm) continue;
    s.N = r.iterations;
    means.push_back(r.functional_mean);
    s.acceptance_rate += r.acceptance_rate;
    s.involution_rejection_rate += r.involution_rejection_rate;
    s.dom_failure_rate += r.dom_failure_rate;
    have_h = have_h && std::isfinite(r.final_h);
    have_ess = have_ess && std::isfinite(r.ess);
    h_sum += r.final_h;
    ess_sum += r.ess;
    count += 1.0;
  }
  if (means.size() >= 2) {
    s.q = replicate_ci(means);
  } else {
    s.q.means = means;
    s.q.mean = means.empty() ? 0.0 : means[0];
  }
  if (count > 0) {
    s.acceptance_rate /= count;
    s.involution_rejection_rate /= count;
    s.dom_failure_rate /= count;
    if (have_h) s.final_h = h_sum / count;
    if (have_ess) s.ess = ess_sum / count;
  }
  return s;
}

int bias_experiment(const std::string& name, const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const bool hypercube = name == "hypercube_bias";
  const Polytope P = build_polytope(cfg);
  const auto V = build_target(cfg);
  const Vector direction = functional_direction(cfg);
  const Vector x_init = start_point(cfg, P);

  ChainConfig nbhmc = cfg.chain;
  nbhmc.involution = true;
  ChainConfig ablation = cfg.chain;
  ablation.involution = false;
  ablation.K = cfg.ablation_K;
  ablation.require_convergence = false;

  const std::string reference_arm = hypercube ? "mala" : "imh";
  std::vector<RunRequest> requests =
      replicate_requests("bhmc", SamplerKind::bhmc, nbhmc, cfg.chain.N, cfg.replicates);
  auto more = replicate_requests("bhmc_no_involution", SamplerKind::bhmc_no_involution, ablation,
                                 cfg.chain.N, cfg.replicates);
  requests.insert(requests.end(), more.begin(), more.end());
  more = replicate_requests(reference_arm, hypercube ? SamplerKind::mala : SamplerKind::imh,
                            cfg.chain,
                            cfg.chain.N * static_cast<std::size_t>(cfg.reference_factor),
                            cfg.replicates);
  requests.insert(requests.end(), more.begin(), more.end());

  const auto results = execute_all(requests, cfg, P, *V, x_init, direction);
  std::filesystem::create_directories(cfg.out);
  write_trace(cfg.out / "trace.csv", results);

  std::vector<ArmSummary> arms;
  for (const std::string arm : {"bhmc", "bhmc_no_involution", reference_arm.c_str()}) {
    arms.push_back(summarize_arm(arm, results));
  }

  double reference_q = arms.back().q.mean;
  std::string reference_source = reference_arm + " x" + std::to_string(cfg.reference_factor);
  if (hypercube && cfg.target == "gaussian") {
    reference_q = truncated_box_gaussian_q(target_mu(cfg), -cfg.half_width, cfg.half_width);
    reference_source = "closed_form";
  }

  CsvWriter csv(cfg.out / "summary.csv");
  for (const char* h : {"sampler", "replicates", "N", "q_hat", "std_error", "ci_half_width",
                        "reference_q", "bias", "bias_over_se", "acceptance_rate",
                        "involution_rejection_rate", "dom_failure_rate", "final_h", "ess"}) {
    csv.field(std::string(h));
  }
  csv.end_row();
  json arms_json = json::array();
  log << "reference Q = " << format_double(reference_q) << " (" << reference_source << ")\n";
  log << std::left << std::setw(20) << "sampler" << std::right << std::setw(12) << "Q_hat"
      << std::setw(12) << "SE" << std::setw(12) << "bias" << std::setw(10) << "accept"
      << std::setw(10) << "inv_rej" << std::setw(10) << "dom_fail" << "\n";
  for (const auto& a : arms) {
    const double bias = a.q.mean - reference_q;
    const double ratio = a.q.std_error > 0 ? bias / a.q.std_error
                                           : std::numeric_limits<double>::quiet_NaN();
    csv.field(a.arm).field(a.q.means.size()).field(a.N).field(a.q.mean).field(a.q.std_error)
        .field(a.q.ci_half_width).field(reference_q).field(bias).field(ratio)
        .field(a.acceptance_rate).field(a.involution_rejection_rate).field(a.dom_failure_rate)
        .field(a.final_h).field(a.ess);
    csv.end_row();
    json aj = {{"sampler", a.arm},
               {"N", a.N},
               {"q", {{"means", a.q.means}, {"mean", a.q.mean}, {"std_error", a.q.std_error},
                      {"ci_half_width", a.q.ci_half_width}}},
               {"bias", bias},
               {"acceptance_rate", a.acceptance_rate},
               {"involution_rejection_rate", a.involution_rejection_rate},
               {"dom_failure_rate", a.dom_failure_rate}};
    if (std::isfinite(a.final_h)) aj["final_h"] = a.final_h;
    if (std::isfinite(a.ess)) aj["ess"] = a.ess;
    if (std::isfinite(ratio)) aj["bias_over_se"] = ratio;
    arms_json.push_back(aj);
    log << std::left << std::setw(20) << a.arm << std::right << std::fixed << std::setprecision(4)
        << std::setw(12) << a.q.mean << std::setw(12) << a.q.std_error << std::setw(12) << bias
        << std::setw(10) << std::setprecision(3) << a.acceptance_rate << std::setw(10)
        << a.involution_rejection_rate << std::setw(10) << a.dom_failure_rate << "\n";
  }
  write_json(cfg.out / "summary.json", {{"experiment", name},
                                        {"reference_q", reference_q},
                                        {"reference_source", reference_source},
                                        {"arms", arms_json}});
  write_json(cfg.out / "meta.json", meta_json(cfg, elapsed(start), "experiment " + name));
  return 0;
}

int norm_ablation(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Polytope P = build_polytope(cfg);
  const auto V = build_target(cfg);
  const Vector direction = functional_direction(cfg);
  const Vector x_init = start_point(cfg, P);

  std::vector<RunRequest> requests;
  for (NormMode mode : {NormMode::self_concordant, NormMode::euclidean}) {
    ChainConfig c = cfg.chain;
    c.involution = true;
    c.norm_mode = mode;
    auto reqs = replicate_requests(to_string(mode), SamplerKind::bhmc, c, c.N, cfg.replicates);
    for (auto& r : reqs) r.keep_steps = true;
    requests.insert(requests.end(), reqs.begin(), reqs.end());
  }
  const auto results = execute_all(requests, cfg, P, *V, x_init, direction);

  std::filesystem::create_directories(cfg.out);
  {
    CsvWriter csv(cfg.out / "points.csv");
    csv.field(std::string("norm_mode")).field(std::string("replicate")).field(std::string("iter"));
    for (int j = 1; j <= cfg.d; ++j) csv.field("x_" + std::to_string(j));
    for (const char* h : {"accepted", "involution_rejected", "dom_failed"}) csv.field(std::string(h));
    csv.end_row();
    for (const auto& r : results) {
      for (std::size_t n = 0; n < r.steps.size(); ++n) {
        const StepRow& s = r.steps[n];
        csv.field(r.arm).field(r.replicate).field(n + 1);
        for (Eigen::Index j = 0; j < s.x.size(); ++j) csv.field(s.x(j));
        csv.field(s.accepted).field(s.involution_rejected).field(s.dom_failed);
        csv.end_row();
      }
    }
  }

  json modes = json::array();
  CsvWriter csv(cfg.out / "summary.csv");
  for (const char* h : {"norm_mode", "iterations", "involution_rejection_rate", "acceptance_rate",
                        "dom_failure_rate", "mean_linf_rejected", "mean_linf_accepted"}) {
    csv.field(std::string(h));
  }
  csv.end_row();
  for (NormMode mode : {NormMode::self_concordant, NormMode::euclidean}) {
    const std::string name = to_string(mode);
    double total = 0, inv = 0, acc = 0, dom = 0, linf_rej = 0, linf_acc = 0;
    for (const auto& r : results) {
      if (r.arm != name) continue;
      for (const auto& s : r.steps) {
        total += 1;
        dom += s.dom_failed;
        if (s.involution_rejected) {
          inv += 1;
          linf_rej += s.x.lpNorm<Eigen::Infinity>();
        } else if (s.accepted) {
          acc += 1;
          linf_acc += s.x.lpNorm<Eigen::Infinity>();
        }
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double rej_mean = inv > 0 ? linf_rej / inv : nan;
    const double acc_mean = acc > 0 ? linf_acc / acc : nan;
    csv.field(name).field(static_cast<std::size_t>(total)).field(inv / total).field(acc / total)
        .field(dom / total).field(rej_mean).field(acc_mean);
    csv.end_row();
    modes.push_back({{"norm_mode", name},
                     {"iterations", total},
                     {"involution_rejection_rate", inv / total},
                     {"acceptance_rate", acc / total},
                     {"dom_failure_rate", dom / total},
                     {"mean_linf_rejected", inv > 0 ? json(rej_mean) : json(nullptr)},
                     {"mean_linf_accepted", acc > 0 ? json(acc_mean) : json(nullptr)}});
    log << std::left << std::setw(16) << name << std::right << std::fixed << std::setprecision(4)
        << " involution_rejection_rate " << inv / total << "  mean |x|_inf rejected "
        << rej_mean << "  accepted " << acc_mean << "\n";
  }
  write_json(cfg.out / "summary.json", {{"experiment", "norm_ablation"}, {"modes", modes}});
  write_json(cfg.out / "meta.json", meta_json(cfg, elapsed(start), "experiment norm_ablation"));
  return 0;
}

}  // namespace

int cmd_experiment(const std::string& name, const ExperimentConfig& cfg, std::ostream& log) {
  if (name == "hypercube_bias" || name == "simplex_bias") return bias_experiment(name, cfg, log);
  if (name == "norm_ablation") return norm_ablation(cfg, log);
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

}  // namespace bhmc
