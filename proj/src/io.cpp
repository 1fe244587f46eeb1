#include "enkf/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

namespace enkf::io {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw InvalidInputError(field + ": " + message);
}

const json& require(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains(field)) fail(field, "missing");
  return j.at(field);
}

double require_number(const json& j, const std::string& field) {
  const json& v = require(j, field);
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

double number_or(const json& j, const std::string& field, double fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const json& v = j.at(field);
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

std::string string_or(const json& j, const std::string& field, const std::string& fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const json& v = j.at(field);
  if (!v.is_string()) fail(field, "expected a string");
  return v.get<std::string>();
}

std::optional<double> optional_number(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains(field) || j.at(field).is_null()) return std::nullopt;
  if (!j.at(field).is_number()) fail(field, "expected a number");
  return j.at(field).get<double>();
}

Index require_index(const json& j, const std::string& field) {
  const double v = require_number(j, field);
  if (v < 0 || v != static_cast<double>(static_cast<Index>(v))) {
    fail(field, "expected a nonnegative integer");
  }
  return static_cast<Index>(v);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    fail(field, "expected a nonempty array of rows");
  }
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      fail(field, "ragged rows");
    }
    for (Index c = 0; c < cols; ++c) {
      const json& v = row.at(static_cast<std::size_t>(c));
      if (!v.is_number()) fail(field, "expected numeric entries");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "expected a nonempty array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const json& x = j.at(static_cast<std::size_t>(i));
    if (!x.is_number()) fail(field, "expected numeric entries");
    v(i) = x.get<double>();
  }
  return v;
}

json covariance_spec_to_json(const CovarianceSpec& spec) {
  json j;
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      j["kind"] = "identity";
      j["dim"] = spec.dim;
      break;
    case CovarianceSpec::Kind::diagonal_spectrum:
      j["kind"] = "diagonal";
      j["eigenvalues"] = vector_to_json(spec.spectrum);
      break;
    case CovarianceSpec::Kind::ar1:
      j["kind"] = "ar1";
      j["dim"] = spec.dim;
      j["phi"] = spec.phi;
      j["sigma2"] = spec.sigma2;
      break;
    case CovarianceSpec::Kind::banded:
      j["kind"] = "banded";
      j["dim"] = spec.dim;
      j["bandwidth"] = spec.bandwidth;
      j["values"] = vector_to_json(spec.band_values);
      break;
    case CovarianceSpec::Kind::custom:
      j["kind"] = "custom";
      j["matrix"] = matrix_to_json(spec.custom);
      break;
  }
  return j;
}

CovarianceSpec covariance_spec_from_json(const json& j, Index default_dim) {
  if (!j.is_object()) fail("cov", "expected an object");
  const std::string kind = string_or(j, "kind", "identity");
  const Index dim = j.contains("dim") ? require_index(j, "dim") : default_dim;
  if (kind == "identity") {
    return CovarianceSpec::identity(dim);
  }
  if (kind == "diagonal") {
    return CovarianceSpec::diagonal_spectrum(
        vector_from_json(require(j, "eigenvalues"), "eigenvalues"));
  }
  if (kind == "spectrum-r2") {
    // Geometric spectrum solved to hit the requested effective dimension.
    return CovarianceSpec::diagonal_spectrum(
        geometric_spectrum(dim, require_number(j, "r2")));
  }
  if (kind == "ar1") {
    return CovarianceSpec::ar1(dim, require_number(j, "phi"), number_or(j, "sigma2", 1.0));
  }
  if (kind == "banded") {
    return CovarianceSpec::banded(dim, require_index(j, "bandwidth"),
                                  vector_from_json(require(j, "values"), "values"));
  }
  if (kind == "custom") {
    return CovarianceSpec::custom_matrix(matrix_from_json(require(j, "matrix"), "matrix"));
  }
  fail("kind", "unknown covariance kind '" + kind + "'");
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  ExperimentSpec& s = cfg.spec;
  s.id = require(j, "id").get<std::string>();
  s.kind = experiment_kind_from_string(require(j, "kind").get<std::string>());
  s.d = require_index(j, "d");
  s.k = require_index(j, "k");
  s.prior_cov = covariance_spec_from_json(require(j, "prior_cov"), s.d);
  if (j.contains("gamma")) {
    s.gamma_cov = covariance_spec_from_json(j.at("gamma"), s.k);
  } else {
    s.gamma_cov = CovarianceSpec::identity(s.k);
  }
  s.gamma_scale = number_or(j, "gamma_scale", 1.0);
  s.forward = string_or(j, "forward", "identity");
  s.method = string_or(j, "method", "sr");

  const json& grid = require(j, "n_grid");
  if (!grid.is_array() || grid.empty()) fail("n_grid", "expected a nonempty array");
  for (const json& v : grid) {
    if (!v.is_number_integer()) fail("n_grid", "expected integers");
    s.n_grid.push_back(v.get<Index>());
  }
  const double seeds = require_number(j, "seeds");
  s.seeds = static_cast<int>(seeds);
  if (seeds != s.seeds || s.seeds < 1) fail("seeds", "expected a positive integer");
  const json& master = require(j, "master_seed");
  if (!master.is_number_integer() && !master.is_number_unsigned()) {
    fail("master_seed", "expected an integer");
  }
  s.master_seed = master.get<std::uint64_t>();

  s.t_param = number_or(j, "t", 1.0);
  s.c_cov = number_or(j, "c_cov", 1.0);
  s.c_cross = number_or(j, "c_cross", 1.0);
  s.rho = optional_number(j, "rho");
  s.rho_up = optional_number(j, "rho_up");
  s.rho_pp = optional_number(j, "rho_pp");
  if (j.contains("rho_multipliers")) {
    for (const json& v : j.at("rho_multipliers")) {
      if (!v.is_number()) fail("rho_multipliers", "expected numbers");
      s.rho_multipliers.push_back(v.get<double>());
    }
  }
  s.n_ref = j.contains("n_ref") ? require_index(j, "n_ref") : Index{100000};
  s.steps = j.contains("steps") ? require_index(j, "steps") : Index{0};
  s.spectral_radius = number_or(j, "spectral_radius", 0.9);
  s.out_path = string_or(j, "out", "");

  if (j.contains("checks")) {
    const json& c = j.at("checks");
    ExperimentChecks& k = cfg.checks;
    k.slope_target = optional_number(c, "slope_target");
    k.slope_tol = number_or(c, "slope_tol", 0.15);
    k.metric = string_or(c, "metric", "mean");
    k.method = string_or(c, "method", "");
    k.min_win_rate = optional_number(c, "min_win_rate");
    k.candidate = string_or(c, "candidate", "");
    k.baseline = string_or(c, "baseline", "");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    fail("config", std::string("parse error: ") + ex.what());
  }
  return parse_experiment_config(j);
}

std::string records_to_csv(const std::vector<TrialRecord>& records) {
  std::string out = "experiment,N,seed,method,error_mean,error_cov,offset_norm,radius,r2,r_inf\n";
  char buf[256];
  for (const TrialRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%" PRId64 ",%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.experiment.c_str(), static_cast<std::int64_t>(r.n), r.seed,
                  r.method.c_str(), r.error_mean, r.error_cov, r.offset_norm, r.radius, r.r2,
                  r.r_inf);
    out += buf;
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<TrialRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("out", "cannot open '" + path + "' for writing");
  out << records_to_csv(records);
}

std::vector<TrialRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("records", "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail("records", "no records");
  if (line.rfind("experiment,", 0) != 0) fail("records", "missing CSV header");
  std::vector<TrialRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string item;
    std::vector<std::string> fields;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (fields.size() != 10) fail("records", "malformed row '" + line + "'");
    TrialRecord r;
    try {
      r.experiment = fields[0];
      r.n = static_cast<Index>(std::stoll(fields[1]));
      r.seed = std::stoi(fields[2]);
      r.method = fields[3];
      r.error_mean = std::stod(fields[4]);
      r.error_cov = std::stod(fields[5]);
      r.offset_norm = std::stod(fields[6]);
      r.radius = std::stod(fields[7]);
      r.r2 = std::stod(fields[8]);
      r.r_inf = std::stod(fields[9]);
    } catch (const std::exception&) {
      fail("records", "malformed row '" + line + "'");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) fail("records", "no records");
  return records;
}

namespace {

json fit_to_json(const RateFit& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["residual_std"] = fit.residual_std;
  j["points"] = fit.points;
  return j;
}

std::optional<RateFit> try_fit(const std::vector<std::pair<Index, double>>& med) {
  if (med.size() < 2) return std::nullopt;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [n, e] : med) {
    if (!(e > 0.0)) return std::nullopt;
    pts.emplace_back(static_cast<double>(n), e);
  }
  return fit_rate(pts);
}

}  // namespace

ExperimentSummary summarize(const std::vector<TrialRecord>& records,
                            const ExperimentConfig* config) {
  if (records.empty()) fail("records", "no records");

  std::set<std::string> methods;
  std::set<std::string> experiments;
  for (const auto& r : records) {
    methods.insert(r.method);
    experiments.insert(r.experiment);
  }

  ExperimentSummary summary;
  json& out = summary.data;
  out["experiments"] = json(std::vector<std::string>(experiments.begin(), experiments.end()));
  out["record_count"] = records.size();

  std::ostringstream table;
  table << "method          N   median_mean    median_cov\n";
  json methods_json;
  std::map<std::string, std::map<std::string, RateFit>> fits;
  for (const std::string& m : methods) {
    json mj;
    json med_mean = json::object();
    json med_cov = json::object();
    const auto mean_meds = medians_by_n(records, m, ErrorMetric::mean);
    const auto cov_meds = medians_by_n(records, m, ErrorMetric::cov);
    for (const auto& [n, e] : mean_meds) med_mean[std::to_string(n)] = e;
    for (const auto& [n, e] : cov_meds) med_cov[std::to_string(n)] = e;
    mj["medians_mean"] = med_mean;
    mj["medians_cov"] = med_cov;
    if (auto fit = try_fit(mean_meds)) {
      mj["fit_mean"] = fit_to_json(*fit);
      fits[m]["mean"] = *fit;
    }
    if (auto fit = try_fit(cov_meds)) {
      mj["fit_cov"] = fit_to_json(*fit);
      fits[m]["cov"] = *fit;
    }
    for (std::size_t i = 0; i < mean_meds.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-10s %8" PRId64 "  %12.6g  %12.6g\n", m.c_str(),
                    static_cast<std::int64_t>(mean_meds[i].first), mean_meds[i].second,
                    i < cov_meds.size() ? cov_meds[i].second : 0.0);
      table << buf;
    }
    methods_json[m] = std::move(mj);
  }
  out["methods"] = std::move(methods_json);

  // Pairwise win rates whenever methods pair by (N, seed).
  json win_rates = json::object();
  std::vector<std::string> mlist(methods.begin(), methods.end());
  for (std::size_t i = 0; i < mlist.size(); ++i) {
    for (std::size_t j = 0; j < mlist.size(); ++j) {
      if (i == j) continue;
      std::vector<TrialRecord> a, b;
      for (const auto& r : records) {
        if (r.method == mlist[i]) a.push_back(r);
        if (r.method == mlist[j]) b.push_back(r);
      }
      if (a.empty() || a.size() != b.size()) continue;
      try {
        const double wm = compare_win_rate(a, b, ErrorMetric::mean);
        const double wc = compare_win_rate(a, b, ErrorMetric::cov);
        json w;
        w["mean"] = wm;
        w["cov"] = wc;
        win_rates[mlist[i] + "_vs_" + mlist[j]] = std::move(w);
      } catch (const InvalidInputError&) {
        // unmatched keys (e.g. radius sweeps); no win rate
      }
    }
  }
  out["win_rates"] = std::move(win_rates);

  // Check evaluation against the config thresholds.
  json checks = json::object();
  if (config != nullptr) {
    const ExperimentChecks& k = config->checks;
    if (k.slope_target.has_value()) {
      std::string method = k.method;
      if (method.empty()) method = config->spec.method;
      const auto it = fits.find(method);
      json cj;
      cj["target"] = *k.slope_target;
      cj["tol"] = k.slope_tol;
      cj["metric"] = k.metric;
      cj["method"] = method;
      if (it != fits.end() && it->second.count(k.metric)) {
        const double slope = it->second.at(k.metric).slope;
        const bool pass = std::abs(slope - *k.slope_target) <= k.slope_tol;
        cj["slope"] = slope;
        cj["pass"] = pass;
        summary.all_checks_pass = summary.all_checks_pass && pass;
      } else {
        cj["pass"] = false;
        summary.all_checks_pass = false;
      }
      checks["slope"] = std::move(cj);
    }
    if (k.min_win_rate.has_value() && !k.candidate.empty() && !k.baseline.empty()) {
      std::vector<TrialRecord> a, b;
      for (const auto& r : records) {
        if (r.method == k.candidate) a.push_back(r);
        if (r.method == k.baseline) b.push_back(r);
      }
      json cj;
      cj["candidate"] = k.candidate;
      cj["baseline"] = k.baseline;
      cj["min"] = *k.min_win_rate;
      const ErrorMetric metric = k.metric == "cov" ? ErrorMetric::cov : ErrorMetric::mean;
      if (!a.empty() && a.size() == b.size()) {
        const double w = compare_win_rate(a, b, metric);
        const bool pass = w >= *k.min_win_rate;
        cj["win_rate"] = w;
        cj["pass"] = pass;
        summary.all_checks_pass = summary.all_checks_pass && pass;
      } else {
        cj["pass"] = false;
        summary.all_checks_pass = false;
      }
      checks["win_rate"] = std::move(cj);
    }
  }
  out["checks"] = std::move(checks);

  if (config != nullptr && !out.at("checks").empty()) {
    table << "checks:\n";
    for (const auto& [name, c] : out.at("checks").items()) {
      table << "  " << (c.value("pass", false) ? "PASS" : "FAIL") << "  " << name << "\n";
    }
  }
  summary.text_table = table.str();
  return summary;
}

UpdateRequest::UpdateRequest(std::string m, ForwardMap f, CovarianceMatrix g, Vector y_in)
    : method(std::move(m)), forward(std::move(f)), gamma(std::move(g)), y(std::move(y_in)) {}

UpdateRequest parse_update_request(const json& j) {
  const std::string method = require(j, "method").get<std::string>();
  static const std::set<std::string> known{"po", "etkf", "eakf", "loc-po",
                                           "loc-sr", "eki", "leki"};
  if (!known.count(method)) fail("method", "unknown method '" + method + "'");

  // Forward map: explicit matrix "A" or a {"kind": ...} description.
  std::optional<ForwardMap> forward;
  if (j.contains("A")) {
    forward = ForwardMap::linear(matrix_from_json(j.at("A"), "A"));
  } else if (j.contains("forward")) {
    const json& f = j.at("forward");
    const std::string kind = string_or(f, "kind", "linear");
    if (kind == "linear") {
      forward = ForwardMap::linear(matrix_from_json(require(f, "matrix"), "forward.matrix"));
    } else if (kind == "tanh") {
      forward = ForwardMap::tanh_bandwidth(require_index(f, "d"), require_index(f, "k"));
    } else {
      fail("forward.kind", "unknown forward map '" + kind + "'");
    }
  } else {
    fail("A", "missing (supply A or forward)");
  }

  if (!j.contains("gamma")) fail("gamma", "missing");
  CovarianceMatrix gamma =
      j.at("gamma").is_array()
          ? CovarianceMatrix(matrix_from_json(j.at("gamma"), "gamma"))
          : make_covariance(covariance_spec_from_json(j.at("gamma"), forward->output_dim()));

  Vector y = vector_from_json(require(j, "y"), "y");

  UpdateRequest req(method, std::move(*forward), std::move(gamma), std::move(y));
  req.alpha = number_or(j, "alpha", 1.0);
  req.rho = optional_number(j, "rho");
  req.rho_up = optional_number(j, "rho_up");
  req.rho_pp = optional_number(j, "rho_pp");
  req.t_param = number_or(j, "t", 1.0);
  req.c_param = number_or(j, "c", 1.0);

  if (j.contains("members")) {
    // Members arrive as a list of d-vectors; stored one per column.
    const Matrix rows = matrix_from_json(j.at("members"), "members");
    req.members = rows.transpose();
  } else if (j.contains("prior")) {
    const json& p = j.at("prior");
    const CovarianceSpec cov_spec =
        covariance_spec_from_json(require(p, "cov"), req.forward.input_dim());
    CovarianceMatrix cov = make_covariance(cov_spec);
    Vector mean;
    if (p.contains("mean") && p.at("mean").is_array()) {
      mean = vector_from_json(p.at("mean"), "prior.mean");
    } else {
      mean = Vector::Constant(cov.dim(), number_or(p, "mean", 0.0));
    }
    req.prior.emplace(std::move(mean), std::move(cov));
    req.ensemble_size = require_index(j, "ensemble_size");
    if (req.ensemble_size < 2) fail("ensemble_size", "need at least 2 members");
  } else {
    fail("members", "missing (supply members or prior + ensemble_size)");
  }
  return req;
}

UpdateRequest load_update_request(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("problem", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    fail("problem", std::string("parse error: ") + ex.what());
  }
  return parse_update_request(j);
}

json run_update(const UpdateRequest& req, std::uint64_t seed) {
  Ensemble e = req.members.has_value()
                   ? Ensemble(*req.members)
                   : sample_ensemble(*req.prior, req.ensemble_size,
                                     mix_seed(seed, "update/ensemble", 0));
  const std::uint64_t noise_seed = mix_seed(seed, "update/noise", 0);

  std::optional<UpdateResult> result;
  if (req.method == "eki" || req.method == "leki") {
    EkiProblem prob(req.forward, req.gamma, req.y, req.alpha);
    if (req.method == "eki") {
      result = eki_update(e, prob, noise_seed);
    } else {
      if (!req.rho_up.has_value() || !req.rho_pp.has_value()) {
        fail("rho_up", "leki needs rho_up and rho_pp");
      }
      result = leki_update(e, prob, *req.rho_up, *req.rho_pp, noise_seed);
    }
  } else {
    if (!req.forward.is_linear()) fail("A", "method needs a linear forward map");
    LinearProblem prob(req.forward.matrix(), req.gamma, req.y);
    const LocalizationConfig loc = req.rho.has_value()
                                       ? LocalizationConfig::radius(*req.rho)
                                       : LocalizationConfig::derived(req.t_param, req.c_param);
    if (req.method == "po") {
      result = po_update(e, prob, noise_seed);
    } else if (req.method == "etkf") {
      result = etkf_update(e, prob);
    } else if (req.method == "eakf") {
      result = eakf_update(e, prob);
    } else if (req.method == "loc-po") {
      result = localized_po_update(e, prob, loc, noise_seed);
    } else {
      result = localized_sr_update(e, prob, loc);
    }
  }

  json out;
  out["method"] = req.method;
  out["d"] = result->updated.dim();
  out["n"] = result->updated.size();
  out["mu_hat"] = vector_to_json(result->mu_hat);
  out["sigma_hat"] = matrix_to_json(result->sigma_hat.mat());
  json diag;
  diag["gain"] = matrix_to_json(result->diagnostics.gain);
  if (result->diagnostics.offset_norm) diag["offset_norm"] = *result->diagnostics.offset_norm;
  if (result->diagnostics.radius_used) diag["radius_used"] = *result->diagnostics.radius_used;
  if (result->diagnostics.radius_used_pp) {
    diag["radius_used_pp"] = *result->diagnostics.radius_used_pp;
  }
  if (result->diagnostics.mean_drift) diag["mean_drift"] = *result->diagnostics.mean_drift;
  out["diagnostics"] = std::move(diag);
  return out;
}

}  // namespace enkf::io
