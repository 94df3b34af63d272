#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/cli/config.hpp"
#include "nowcast/dgp/dgp.hpp"
#include "nowcast/explain/treeshap.hpp"
#include "nowcast/report/dashboard.hpp"
#include "nowcast/report/release.hpp"

namespace nowcast {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRefused = 3;

inline constexpr const char* kEngineVersion = "nowcast-engine/0.1";

// ---------------------------------------------------------------------------
// Simulation job: the --spec file of the simulate command.

struct SimulationJob {
  DGPSpec dgp;
  std::map<std::string, int> lag_days;
  RevisionScheme revisions;
};

inline SimulationJob parse_simulation_job(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ValidationError("simulation spec must be an object with a 'kind'");
  SimulationJob job;
  const auto kind_str = j.at("kind").get<std::string>();
  auto kind = dgp_kind_from_string(kind_str);
  if (!kind) throw ValidationError("simulation spec: unknown kind '" + kind_str + "'");
  job.dgp.kind = *kind;
  job.dgp.n = detail::get_or<std::size_t>(j, "n", 200);
  job.dgp.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("start"))
    job.dgp.start = Period::parse_or_throw(j.at("start").get<std::string>());
  job.dgp.target_name = detail::get_or<std::string>(j, "target_name", "y");
  if (j.contains("ar1")) {
    const auto& a = j.at("ar1");
    job.dgp.ar1.phi = detail::get_or(a, "phi", 0.8);
    job.dgp.ar1.sigma = detail::get_or(a, "sigma", 1.0);
  }
  if (j.contains("sparse")) {
    const auto& s = j.at("sparse");
    job.dgp.sparse.p = detail::get_or<std::size_t>(s, "p", 20);
    job.dgp.sparse.s = detail::get_or<std::size_t>(s, "s", 5);
    job.dgp.sparse.beta = detail::get_or(s, "beta", 1.0);
    job.dgp.sparse.sigma = detail::get_or(s, "sigma", 0.5);
  }
  if (j.contains("factor")) {
    const auto& f = j.at("factor");
    job.dgp.factor.r = detail::get_or<std::size_t>(f, "r", 2);
    job.dgp.factor.p = detail::get_or<std::size_t>(f, "p", 20);
    job.dgp.factor.factor_phi = detail::get_or(f, "factor_phi", 0.7);
    job.dgp.factor.loading_sigma = detail::get_or(f, "loading_sigma", 1.0);
    job.dgp.factor.idio_sigma = detail::get_or(f, "idio_sigma", 0.5);
  }
  if (j.contains("regime")) {
    const auto& r = j.at("regime");
    if (r.contains("break"))
      job.dgp.regime.break_period = Period::parse_or_throw(r.at("break").get<std::string>());
    auto params = [](const nlohmann::json& p, Ar1Params fallback) {
      fallback.phi = detail::get_or(p, "phi", fallback.phi);
      fallback.sigma = detail::get_or(p, "sigma", fallback.sigma);
      return fallback;
    };
    if (r.contains("pre")) job.dgp.regime.pre = params(r.at("pre"), job.dgp.regime.pre);
    if (r.contains("post")) job.dgp.regime.post = params(r.at("post"), job.dgp.regime.post);
  }
  if (j.contains("lags"))
    for (const auto& [series, lag] : j.at("lags").items())
      job.lag_days[series] = lag.get<int>();
  if (j.contains("revisions")) {
    const auto& r = j.at("revisions");
    job.revisions.enabled = detail::get_or(r, "enabled", true);
    job.revisions.delay_days = detail::get_or(r, "delay_days", 45);
    job.revisions.sd = detail::get_or(r, "sd", 0.1);
    job.revisions.seed = detail::get_or<std::uint64_t>(r, "seed", 0);
  }
  return job;
}

// ---------------------------------------------------------------------------
// Shared command plumbing.

namespace detail {

inline void write_error_record(std::ostream& err, const std::string& type,
                               const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"type", type}, {"message", message}};
  err << j.dump() << '\n';
}

template <typename Fn>
int run_command(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ReleaseRefused& e) {
    write_error_record(err, "refused", e.what());
    return kExitRefused;
  } catch (const ValidationError& e) {
    write_error_record(err, "validation", e.what());
    return kExitValidation;
  } catch (const FitError& e) {
    write_error_record(err, "fit", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    write_error_record(err, "internal", e.what());
    return kExitValidation;
  }
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

/// Strict load for pipeline commands: malformed rows or rejected publications
/// in the data file are configuration errors, not data-quality findings.
inline ObservationLog load_log_strict(const std::string& path) {
  auto parsed = parse_observation_csv(split_lines(read_text_file(path)));
  if (!parsed.malformed.empty())
    throw ValidationError("data file " + path + ": row " +
                          std::to_string(parsed.malformed.front().row) + " is malformed (" +
                          parsed.malformed.front().reason + ")");
  ObservationLog log;
  auto summary = log.ingest(parsed.records);
  if (summary.rejects > 0)
    throw ValidationError("data file " + path + ": " + std::to_string(summary.rejects) +
                          " records rejected (first: " +
                          summary.reject_details.front().reason + ")");
  return log;
}

inline std::optional<DesignMatrix> try_design(const EvaluationPlan& plan,
                                              const ObservationLog& log, const Date& origin) {
  try {
    Snapshot snap = log.snapshot_at(origin);
    return assemble_design(snap, plan.recipe, origin, plan.window);
  } catch (const ValidationError&) {
    return std::nullopt;
  } catch (const FitError&) {
    return std::nullopt;
  }
}

/// Family-appropriate additive attribution for release waterfalls and
/// stability profiles: exact Shapley values on trees, integrated gradients on
/// neural models, per-feature linear contributions everywhere else.
inline AttributionVector attribution_for(const FittedModel& m, const DesignMatrix& d,
                                         const ExplainConfig& ex) {
  switch (m.spec.family) {
    case Family::random_forest:
    case Family::gbdt: return tree_shap(m, d);
    case Family::mlp:
    case Family::gru: {
      const std::size_t rows = std::min<std::size_t>(
          d.n_rows(), static_cast<std::size_t>(std::max(ex.ig_preshock_rows, 1)));
      Vec base = ig_baseline(d, ex.ig_baseline, rows);
      return integrated_gradients(m, d, base, ex.ig_steps, to_string(ex.ig_baseline));
    }
    default: return linear_contributions(m, d);
  }
}

/// Lowest cumulative squared error over the realized origins, settled by
/// portfolio order; the first portfolio member when nothing has resolved yet.
inline ModelSpec best_model_by_cumloss(const LossTable& table,
                                       const std::vector<ModelSpec>& portfolio) {
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < portfolio.size(); ++k) {
    auto idx = table.model_index(portfolio[k].id());
    if (!idx) continue;
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < table.origins.size(); ++j) {
      const double v = table.sqerr(*idx, j);
      if (!std::isfinite(v)) continue;
      total += v;
      ++n;
    }
    if (n == 0) continue;
    if (total < best_loss) {
      best_loss = total;
      best = k;
    }
  }
  return portfolio[best];
}

inline std::map<std::string, EconomicBlock> block_tags(const DesignMatrix& d) {
  std::map<std::string, EconomicBlock> tags;
  for (const auto& meta : d.feature_meta) tags[meta.name] = meta.block;
  return tags;
}

struct IntervalMatrix {
  // model id -> intervals at the origins where the design assembled and the
  // bootstrap resolved; origins align with `origins` per model
  std::map<std::string, std::vector<PredictionInterval>> intervals;
};

inline AuditRecord make_audit_record(const std::string& actor, const std::string& timestamp,
                                     const RunConfig& cfg, const ObservationLog& log,
                                     const std::string& outputs_digest) {
  AuditRecord r;
  r.timestamp = timestamp;
  r.actor = actor;
  r.config_hash = cfg.config_hash;
  r.data_log_digest = log.digest();
  r.model_version = kEngineVersion;
  r.outputs_digest = outputs_digest;
  return r;
}

inline void append_audit_file(const std::string& dir, const AuditRecord& record) {
  std::ofstream trail(std::filesystem::path(dir) / "audit.jsonl", std::ios::app);
  if (!trail) throw ValidationError("cannot append to audit trail in " + dir);
  append_audit(trail, record);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest: validate a publication batch; optionally append it to a log file.

inline int cmd_ingest(const std::string& data_path, const std::string& log_path,
                      std::ostream& out, std::ostream& err) {
  return detail::run_command(err, [&] {
    auto parsed = parse_observation_csv(detail::split_lines(read_text_file(data_path)));
    ObservationLog log;
    if (!log_path.empty() && std::filesystem::exists(log_path))
      log = detail::load_log_strict(log_path);
    auto summary = log.ingest(parsed.records);
    if (!log_path.empty()) detail::write_file(log_path, observation_csv(log.entries()));

    nlohmann::json j;
    j["command"] = "ingest";
    j["inserts"] = summary.inserts;
    j["revisions"] = summary.revisions;
    j["rejects"] = summary.rejects;
    j["malformed"] = parsed.malformed.size();
    nlohmann::json details = nlohmann::json::array();
    for (const auto& r : summary.reject_details)
      details.push_back({{"row", r.row}, {"reason", r.reason}});
    for (const auto& r : parsed.malformed)
      details.push_back({{"row", r.row}, {"reason", r.reason}});
    j["detail"] = details;
    j["log_digest"] = log.digest();
    if (!log_path.empty()) j["log"] = log_path;
    out << j.dump() << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// simulate: spec file -> observation CSV (+ ground truth sidecar).

inline int cmd_simulate(const std::string& spec_path, const std::string& out_path,
                        std::ostream& out, std::ostream& err) {
  return detail::run_command(err, [&] {
    nlohmann::json spec_json;
    try {
      spec_json = nlohmann::json::parse(read_text_file(spec_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("simulation spec is not valid JSON: ") + e.what());
    }
    SimulationJob job = parse_simulation_job(spec_json);
    SimulatedData sim = simulate(job.dgp);
    auto obs = apply_publication_lags(sim, job.lag_days, job.revisions);
    const std::string csv = observation_csv(obs);
    detail::write_file(out_path, csv);

    nlohmann::json truth;
    truth["kind"] = to_string(job.dgp.kind);
    truth["n"] = job.dgp.n;
    truth["seed"] = job.dgp.seed;
    truth["target"] = job.dgp.target_name;
    truth["spec_digest"] = digest_hex(spec_json.dump());
    if (!sim.truth.beta.empty()) {
      truth["beta"] = sim.truth.beta;
      truth["support"] = sim.truth.support;
    }
    if (sim.truth.break_period) {
      truth["break_period"] = sim.truth.break_period->str();
      truth["pre"] = {{"phi", sim.truth.pre.phi}, {"sigma", sim.truth.pre.sigma}};
      truth["post"] = {{"phi", sim.truth.post.phi}, {"sigma", sim.truth.post.sigma}};
    }
    if (sim.truth.factors.rows() > 0)
      truth["factors"] = {{"rows", sim.truth.factors.rows()},
                          {"cols", sim.truth.factors.cols()}};
    const std::string truth_path = out_path + ".truth.json";
    detail::write_file(truth_path, truth.dump(2) + "\n");

    nlohmann::json j;
    j["command"] = "simulate";
    j["observations"] = obs.size();
    j["series"] = sim.predictor_names.size() + 1;
    j["csv"] = out_path;
    j["truth"] = truth_path;
    j["csv_digest"] = digest_hex(csv);
    out << j.dump() << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// backtest: walk-forward losses, intervals, coverage, MCS, weights.

inline int cmd_backtest(const std::string& config_path, const std::string& timestamp,
                        std::ostream& out, std::ostream& err) {
  return detail::run_command(err, [&] {
    RunConfig cfg = load_run_config(config_path);
    ObservationLog log = detail::load_log_strict(cfg.data_path);
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);

    auto records = run_walk_forward(cfg.plan, log);
    LossTable table = compute_losses(cfg.plan, records, log);

    // Intervals for every portfolio member at every origin that assembles.
    std::map<std::string, std::vector<PredictionInterval>> intervals;
    std::string interval_rows = "model,origin,alpha,lower,upper,point\n";
    for (const auto& origin : cfg.plan.origins) {
      auto design = detail::try_design(cfg.plan, log, origin);
      if (!design) continue;
      for (const auto& spec : cfg.plan.portfolio) {
        try {
          ReplicateSet reps = bootstrap_forecast(*design, spec, cfg.bootstrap);
          PredictionInterval iv =
              percentile_interval(reps.forecasts, cfg.interval_alpha, origin, reps.point);
          interval_rows += csv_join({spec.id(), origin.str(), format_double(iv.alpha),
                                     format_double(iv.lower), format_double(iv.upper),
                                     format_double(iv.point)}) +
                           "\n";
          intervals[spec.id()].push_back(std::move(iv));
        } catch (const FitError&) {
        } catch (const ValidationError&) {
        }
      }
    }

    // Empirical coverage per model over origins whose actual has resolved.
    std::string coverage_rows = "model,nominal,empirical,mean_width,resolved\n";
    for (const auto& spec : cfg.plan.portfolio) {
      auto it = intervals.find(spec.id());
      if (it == intervals.end()) continue;
      std::vector<PredictionInterval> resolved;
      Vec actuals;
      for (const auto& iv : it->second)
        for (std::size_t j = 0; j < table.origins.size(); ++j)
          if (table.origins[j] == iv.origin) {
            resolved.push_back(iv);
            actuals.push_back(table.actuals[j]);
          }
      if (resolved.empty()) continue;
      CoverageReport rep = coverage_report(resolved, actuals);
      coverage_rows += csv_join({spec.id(), format_double(rep.nominal),
                                 format_double(rep.empirical), format_double(rep.mean_width),
                                 std::to_string(rep.resolved)}) +
                       "\n";
    }

    ModelConfidenceSet confidence = mcs(table, cfg.mcs_alpha, cfg.mcs);
    LossTable surviving = restrict_losses(table, confidence.survivors);
    CombinationWeights weights =
        combination_weights(surviving, cfg.combination, cfg.combination_eta, cfg.mcs.loss);
    WeightTrajectory trajectory =
        weight_trajectory(surviving, cfg.combination, cfg.combination_eta, cfg.mcs.loss);

    nlohmann::json summary;
    summary["command"] = "backtest";
    summary["config_hash"] = cfg.config_hash;
    summary["data_digest"] = log.digest();
    summary["model_version"] = kEngineVersion;
    summary["origins"] = cfg.plan.origins.size();
    summary["resolved_origins"] = table.origins.size();
    std::size_t skipped = 0;
    for (const auto& r : records) skipped += r.skipped ? 1 : 0;
    summary["forecasts"] = records.size();
    summary["skipped"] = skipped;
    summary["mcs"] = {{"alpha", cfg.mcs_alpha},
                      {"survivors", confidence.survivors},
                      {"common_origins", confidence.common_origins}};
    nlohmann::json weight_doc = nlohmann::json::object();
    for (std::size_t i = 0; i < weights.model_ids.size(); ++i)
      weight_doc[weights.model_ids[i]] = weights.weights[i];
    summary["weights"] = {{"scheme", to_string(weights.scheme)}, {"values", weight_doc},
                          {"turnover", trajectory.turnover}};
    if (!cfg.plan.benchmark_ids.empty()) {
      auto flags = benchmark_filter(table, cfg.plan.benchmark_ids, cfg.plan.margin);
      nlohmann::json filter_doc = nlohmann::json::object();
      for (const auto& [id, flag] : flags)
        filter_doc[id] = flag == FilterFlag::flagged ? "flagged" : "retained";
      summary["benchmark_filter"] = filter_doc;
    }

    const std::string forecasts_csv_text = forecast_records_csv(records);
    const std::string losses_csv_text = loss_table_csv(table);
    const std::string mcs_csv_text = mcs_csv(confidence);
    const std::string weights_csv_text = weights_csv(weights);
    const std::string trajectory_csv_text = trajectory_csv(trajectory);

    nlohmann::json artifacts;
    artifacts["forecasts.csv"] = digest_hex(forecasts_csv_text);
    artifacts["losses.csv"] = digest_hex(losses_csv_text);
    artifacts["intervals.csv"] = digest_hex(interval_rows);
    artifacts["coverage.csv"] = digest_hex(coverage_rows);
    artifacts["mcs.csv"] = digest_hex(mcs_csv_text);
    artifacts["weights.csv"] = digest_hex(weights_csv_text);
    artifacts["weight_trajectory.csv"] = digest_hex(trajectory_csv_text);
    summary["artifacts"] = artifacts;
    const std::string outputs_digest = digest_hex(artifacts.dump());
    summary["outputs_digest"] = outputs_digest;

    detail::write_file((dir / "forecasts.csv").string(), forecasts_csv_text);
    detail::write_file((dir / "losses.csv").string(), losses_csv_text);
    detail::write_file((dir / "intervals.csv").string(), interval_rows);
    detail::write_file((dir / "coverage.csv").string(), coverage_rows);
    detail::write_file((dir / "mcs.csv").string(), mcs_csv_text);
    detail::write_file((dir / "weights.csv").string(), weights_csv_text);
    detail::write_file((dir / "weight_trajectory.csv").string(), trajectory_csv_text);
    detail::write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
    detail::append_audit_file(cfg.output_dir,
                              detail::make_audit_record("cmd_backtest", timestamp, cfg, log,
                                                        outputs_digest));

    out << summary.dump() << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// nowcast: one origin -> release package with fallback and leakage gates.

inline int cmd_nowcast(const std::string& config_path, const std::string& origin_str,
                       const std::string& timestamp, std::ostream& out, std::ostream& err) {
  return detail::run_command(err, [&] {
    RunConfig cfg = load_run_config(config_path);
    if (!(cfg.reporting.fallback_tolerance > 0.0))
      throw ValidationError(
          "run config reporting: 'tolerance' (fallback interval width gate) must be > 0 for "
          "releases");
    ObservationLog log = detail::load_log_strict(cfg.data_path);
    const Date origin = Date::parse_or_throw(origin_str);
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);

    Snapshot snap = log.snapshot_at(origin);
    DesignMatrix design = assemble_design(snap, cfg.plan.recipe, origin, cfg.plan.window);

    // Gate on the full-horizon audit so recipes that peek past the origin are
    // caught even though the fitting snapshot cannot see the leaked rows.
    auto violations = audit_design(design);
    {
      EvaluationPlan gate = cfg.plan;
      gate.origins = {origin};
      const AuditVerdict gate_verdict = leakage_audit(gate, log);
      if (gate_verdict.origins.front().assembled)
        violations = gate_verdict.origins.front().violations;
    }

    // Release model: best cumulative squared error over plan origins that
    // precede the release origin; the first portfolio member without history.
    ModelSpec released = cfg.plan.portfolio.front();
    {
      EvaluationPlan history = cfg.plan;
      history.origins.clear();
      for (const auto& o : cfg.plan.origins)
        if (o < origin) history.origins.push_back(o);
      if (!history.origins.empty()) {
        auto records = run_walk_forward(history, log);
        LossTable table = compute_losses(history, records, log);
        if (!table.origins.empty())
          released = detail::best_model_by_cumloss(table, cfg.plan.portfolio);
      }
    }

    FittedModel model = fit(released, design);
    const double point = predict_design(model, design);
    ReplicateSet reps = bootstrap_forecast(design, released, cfg.bootstrap);
    PredictionInterval interval =
        percentile_interval(reps.forecasts, cfg.interval_alpha, origin, point);

    std::vector<std::pair<ModelSpec, double>> benchmark_candidates;
    for (const auto& spec : cfg.plan.portfolio) {
      if (spec.family != Family::ar && spec.family != Family::rw_drift &&
          spec.family != Family::rw)
        continue;
      try {
        FittedModel bm = fit(spec, design);
        benchmark_candidates.emplace_back(spec, predict_design(bm, design));
      } catch (const FitError&) {
      }
    }

    ReleaseInputs inputs;
    inputs.origin = origin;
    inputs.interval = interval;
    inputs.attribution = detail::attribution_for(model, design, cfg.explain);
    inputs.block_tags = detail::block_tags(design);
    inputs.leakage = violations;
    inputs.tolerance = cfg.reporting.fallback_tolerance;
    inputs.benchmark = fallback_benchmark(benchmark_candidates);
    inputs.model_version = kEngineVersion;
    inputs.config_hash = cfg.config_hash;
    inputs.bootstrap = reps.resolved;
    inputs.top_k = cfg.reporting.top_k;

    ReleasePackage pkg = assemble_release(inputs);  // ReleaseRefused on leakage
    const std::string digest = release_digest(pkg);

    nlohmann::json release_doc = release_json(pkg);
    release_doc["released_model"] = released.id();
    release_doc["release_digest"] = digest;
    detail::write_file((dir / ("release-" + origin.str() + ".json")).string(),
                       release_doc.dump(2) + "\n");
    detail::write_file((dir / ("release-" + origin.str() + ".txt")).string(),
                       release_text(pkg));
    detail::append_audit_file(cfg.output_dir, detail::make_audit_record("cmd_nowcast", timestamp,
                                                                        cfg, log, digest));

    nlohmann::json j;
    j["command"] = "nowcast";
    j["origin"] = origin.str();
    j["model"] = released.id();
    j["point"] = pkg.point;
    j["interval"] = {{"lower", pkg.interval.lower}, {"upper", pkg.interval.upper}};
    j["flags"] = {{"low_confidence", pkg.flags.low_confidence},
                  {"fallback_used", pkg.flags.fallback_used},
                  {"leakage_clean", pkg.flags.leakage_clean}};
    j["config_hash"] = cfg.config_hash;
    j["release_digest"] = digest;
    out << j.dump() << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// audit: leakage verdict over the whole plan plus monitoring dashboard.

inline int cmd_audit(const std::string& config_path, const std::string& timestamp,
                     std::ostream& out, std::ostream& err) {
  return detail::run_command(err, [&] {
    RunConfig cfg = load_run_config(config_path);
    ObservationLog log = detail::load_log_strict(cfg.data_path);
    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path dir(cfg.output_dir);

    AuditVerdict verdict = leakage_audit(cfg.plan, log);
    nlohmann::json audit_doc;
    audit_doc["command"] = "audit";
    audit_doc["config_hash"] = cfg.config_hash;
    audit_doc["data_digest"] = log.digest();
    audit_doc["clean"] = verdict.clean();
    audit_doc["violations"] = verdict.violation_count();
    nlohmann::json origin_docs = nlohmann::json::array();
    for (const auto& o : verdict.origins) {
      nlohmann::json od;
      od["origin"] = o.origin.str();
      od["assembled"] = o.assembled;
      if (!o.assembly_error.empty()) od["error"] = o.assembly_error;
      nlohmann::json vs = nlohmann::json::array();
      for (const auto& v : o.violations)
        vs.push_back({{"feature", v.feature}, {"plane", v.plane}, {"detail", v.detail}});
      od["violations"] = vs;
      origin_docs.push_back(std::move(od));
    }
    audit_doc["origins"] = origin_docs;

    if (!verdict.clean()) {
      detail::write_file((dir / "audit.json").string(), audit_doc.dump(2) + "\n");
      detail::append_audit_file(
          cfg.output_dir, detail::make_audit_record("cmd_audit", timestamp, cfg, log,
                                                    digest_hex(audit_doc.dump())));
      out << audit_doc.dump() << '\n';
      const auto& first = verdict.origins.front();
      for (const auto& o : verdict.origins)
        if (!o.violations.empty())
          throw ReleaseRefused("release refused: leakage audit flagged feature '" +
                               o.violations.front().feature + "' on plane " +
                               o.violations.front().plane + " (" +
                               o.violations.front().detail + ") at origin " + o.origin.str());
      throw ReleaseRefused("release refused: leakage audit unclean at origin " +
                           first.origin.str());
    }

    auto records = run_walk_forward(cfg.plan, log);
    LossTable table = compute_losses(cfg.plan, records, log);
    ModelSpec released = detail::best_model_by_cumloss(table, cfg.plan.portfolio);

    std::vector<PredictionInterval> intervals;
    Vec actuals;
    std::vector<AttributionVector> profiles;
    std::vector<std::string> digests;
    std::vector<Date> profile_origins;
    for (const auto& origin : cfg.plan.origins) {
      auto design = detail::try_design(cfg.plan, log, origin);
      if (!design) continue;
      FittedModel m = fit(released, *design);
      profiles.push_back(detail::attribution_for(m, *design, cfg.explain));
      digests.push_back(design->data_digest());
      profile_origins.push_back(origin);
      for (std::size_t j = 0; j < table.origins.size(); ++j)
        if (table.origins[j] == origin) {
          ReplicateSet reps = bootstrap_forecast(*design, released, cfg.bootstrap);
          intervals.push_back(
              percentile_interval(reps.forecasts, cfg.interval_alpha, origin, reps.point));
          actuals.push_back(table.actuals[j]);
        }
    }

    DashboardInputs din;
    din.losses = table;
    din.benchmark_id =
        cfg.plan.benchmark_ids.empty() ? released.id() : cfg.plan.benchmark_ids.front();
    din.intervals = intervals;
    din.actuals = actuals;
    din.profile = summarize_profiles(profiles);
    din.stability = stability_report(profiles, cfg.explain.sign_priors, digests);
    din.stability_origins = profile_origins;
    DashboardMetrics metrics = dashboard(din);

    nlohmann::json dash;
    dash["window"] = {{"start", metrics.window_start.str()}, {"end", metrics.window_end.str()}};
    dash["nominal"] = metrics.nominal;
    dash["rolling_coverage"] = metrics.rolling_coverage;
    dash["rank_correlations"] = metrics.rank_correlation_series;
    nlohmann::json distances = nlohmann::json::array();
    for (const auto& d : metrics.benchmark_distance)
      distances.push_back({{"model", d.model_id},
                           {"rmsfe_ratio", d.rmsfe_ratio},
                           {"mafe_ratio", d.mafe_ratio}});
    dash["benchmark_distance"] = distances;
    dash["instability_signals"] = metrics.instability_signals.size();
    dash["monitored_model"] = released.id();
    audit_doc["dashboard"] = dash;

    std::map<std::string, std::string> choices = {
        {"interval alpha", format_double(cfg.interval_alpha)},
        {"ig baseline", to_string(cfg.explain.ig_baseline)},
        {"ig steps", std::to_string(cfg.explain.ig_steps)},
        {"permutation repetitions", std::to_string(cfg.explain.permutation_reps)},
        {"mcs alpha", format_double(cfg.mcs_alpha)},
        {"combination scheme", to_string(cfg.combination)},
        {"fallback tolerance", format_double(cfg.reporting.fallback_tolerance)},
        {"benchmark margin", format_double(cfg.plan.margin)},
        {"actuals vintage", to_string(cfg.plan.actuals)},
    };
    const std::string methodology =
        methodology_appendix(cfg.plan.recipe, cfg.plan.portfolio, cfg.bootstrap, choices);

    detail::write_file((dir / "audit.json").string(), audit_doc.dump(2) + "\n");
    detail::write_file((dir / "dashboard.txt").string(), dashboard_text(metrics));
    detail::write_file((dir / "methodology.md").string(), methodology);
    detail::append_audit_file(cfg.output_dir,
                              detail::make_audit_record("cmd_audit", timestamp, cfg, log,
                                                        digest_hex(audit_doc.dump())));
    out << audit_doc.dump() << '\n';
    return kExitOk;
  });
}

}  // namespace nowcast
