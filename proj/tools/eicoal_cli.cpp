// Command-line front end: simulation, inference, validation and reporting
// workflows over JSON configs with flag overrides.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "eicoal/coal_sim.hpp"
#include "eicoal/diagnostics.hpp"
#include "eicoal/epi_dynamics.hpp"
#include "eicoal/genealogy.hpp"
#include "eicoal/inference.hpp"
#include "eicoal/metrics.hpp"
#include "eicoal/phasetype.hpp"
#include "eicoal/workflows.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eicoal;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  return cfg;
}

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

void write_meta(const fs::path& out_dir, const std::string& command, std::uint64_t seed,
                const json& effective, const json& extra = json::object()) {
  json meta;
  meta["command"] = command;
  meta["seed"] = seed;
  meta["config"] = effective;
  meta["config_hash"] = format_double(0);  // replaced below; keep key ordering stable
  meta["versions"] = {{"eicoal", kVersion}, {"rng", Rng::kName}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(effective.dump())));
  meta["config_hash"] = hex;
  write_file(out_dir / "meta.json", meta.dump(2) + "\n");
}

PriorConfig priors_from_config(const json& cfg, json& effective) {
  PriorConfig priors = prior_preset(get_or<std::string>(cfg, "preset", "sim-fixed"));
  const auto apply = [&](const char* name, LogNormalPrior& p) {
    if (cfg.contains(name)) {
      const json& j = cfg.at(name);
      p.log_mean = get_or<double>(j, "log_mean", p.log_mean);
      p.log_sd = get_or<double>(j, "log_sd", p.log_sd);
    }
    effective[name] = {{"log_mean", p.log_mean}, {"log_sd", p.log_sd}};
  };
  effective["preset"] = get_or<std::string>(cfg, "preset", "sim-fixed");
  apply("gamma", priors.gamma);
  apply("nu", priors.nu);
  apply("e0", priors.e0);
  apply("i0", priors.i0);
  apply("r0", priors.r0);
  apply("sigma_rw", priors.sigma_rw);
  return priors;
}

// ---------------------------------------------------------------------------

int cmd_simulate_epidemic(const json& cfg) {
  EpidemicStudyConfig sc;
  sc.scenario = get_or<std::string>(cfg, "scenario", "fixed");
  sc.population = get_or<int>(cfg, "population", 15000);
  sc.init_infectious = get_or<int>(cfg, "init_infectious", 1);
  sc.gamma = get_or<double>(cfg, "gamma", 0.25);
  sc.nu = get_or<double>(cfg, "nu", 1.0 / 7.0);
  sc.t_end = get_or<double>(cfg, "t_end_days", 154.0);
  sc.max_attempts = get_or<int>(cfg, "max_attempts", 100);
  sc.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  const json sampling = cfg.contains("sampling") ? cfg.at("sampling") : json::object();
  const std::string scheme = get_or<std::string>(sampling, "scheme", "isochronous");
  if (scheme == "isochronous")
    sc.sampling.scheme = SamplingScheme::Isochronous;
  else if (scheme == "heterochronous")
    sc.sampling.scheme = SamplingScheme::Heterochronous;
  else
    throw ConfigError("sampling.scheme must be isochronous or heterochronous");
  sc.sampling.n_samples = get_or<int>(sampling, "n_samples", 50);
  sc.sampling.at_time = get_or<double>(sampling, "at_day", sc.t_end - 1.0);
  sc.sampling.window_days = get_or<double>(sampling, "window_days", 35.0);
  const double truth_step = get_or<double>(cfg, "truth_grid_step", 0.5);
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  EpidemicStudyResult res = simulate_epidemic_study(sc);

  write_file(out_dir / "tree.nwk", to_newick(res.tree) + "\n");
  {
    std::ostringstream ss;
    write_trajectory_csv(ss, res.sim.trajectory);
    write_file(out_dir / "trajectory.csv", ss.str());
  }
  {
    std::ostringstream ss;
    write_history_csv(ss, res.sim.history);
    write_file(out_dir / "history.csv", ss.str());
  }
  {
    const PiecewiseConstantFn r0 = scenario_r0(sc.scenario);
    std::ostringstream ss;
    ss << "u,t_back,r_true,s,e,i\n";
    for (double u = 0.0; u <= sc.t_end + 1e-9; u += truth_step) {
      const double r = r0(u) * res.sim.s_at(u) / static_cast<double>(sc.population);
      ss << format_double(u) << ',' << format_double(res.anchor_time - u) << ','
         << format_double(r) << ',' << res.sim.s_at(u) << ','
         << res.sim.trajectory.e_at(u) << ',' << res.sim.trajectory.i_at(u) << '\n';
    }
    write_file(out_dir / "truth.csv", ss.str());
  }

  json effective{{"scenario", sc.scenario},
                 {"population", sc.population},
                 {"init_infectious", sc.init_infectious},
                 {"gamma", sc.gamma},
                 {"nu", sc.nu},
                 {"t_end_days", sc.t_end},
                 {"max_attempts", sc.max_attempts},
                 {"seed", sc.seed},
                 {"truth_grid_step", truth_step},
                 {"out", out_dir.string()},
                 {"sampling",
                  {{"scheme", scheme},
                   {"n_samples", sc.sampling.n_samples},
                   {"at_day", sc.sampling.at_time},
                   {"window_days", sc.sampling.window_days}}}};
  json extra;
  extra["attempts_used"] = res.attempts_used;
  extra["anchor_time"] = res.anchor_time;
  extra["final_size"] = static_cast<int>(res.sim.history.individuals.size());
  write_meta(out_dir, "simulate-epidemic", sc.seed, effective, extra);
  return 0;
}

int cmd_infer(const json& cfg) {
  const std::string tree_path = get_or<std::string>(cfg, "tree", "");
  if (tree_path.empty()) throw ConfigError("infer needs a tree file (config key 'tree')");
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  json effective;
  const json priors_json = cfg.contains("priors") ? cfg.at("priors") : json::object();
  json eff_priors;
  PriorConfig priors = priors_from_config(priors_json, eff_priors);
  priors.changepoint_interval = get_or<double>(cfg, "changepoint_interval_days", 7.0);

  McmcConfig mc;
  mc.iterations = get_or<int>(cfg, "iterations", 100000);
  mc.burn_in = get_or<int>(cfg, "burn_in", -1);
  mc.thinning = get_or<int>(cfg, "thinning", 10);
  mc.seed = get_or<std::uint64_t>(cfg, "seed", 1);

  const SampledTree tree = parse_newick(read_file(tree_path));
  EventTimeline timeline = insert_grid(extract_events(tree), priors.changepoint_interval);

  const PosteriorSamples samples = run_mcmc(timeline, priors, mc);

  {
    std::ostringstream ss;
    write_timeline_csv(ss, timeline);
    write_file(out_dir / "timeline.csv", ss.str());
  }
  {
    std::ostringstream ss;
    for (std::size_t c = 0; c < samples.names.size(); ++c)
      ss << samples.names[c] << ',';
    ss << "loglik\n";
    for (std::size_t d = 0; d < samples.n_draws(); ++d) {
      for (Eigen::Index c = 0; c < samples.draws.cols(); ++c)
        ss << format_double(samples.draws(static_cast<Eigen::Index>(d), c)) << ',';
      ss << format_double(samples.logliks[d]) << '\n';
    }
    write_file(out_dir / "posterior.csv", ss.str());
  }

  effective["tree"] = tree_path;
  effective["priors"] = eff_priors;
  effective["changepoint_interval_days"] = priors.changepoint_interval;
  effective["iterations"] = mc.iterations;
  effective["burn_in"] = mc.burn_in;
  effective["thinning"] = mc.thinning;
  effective["seed"] = mc.seed;
  effective["out"] = out_dir.string();

  json extra;
  extra["span"] = samples.span;
  extra["n_segments"] = samples.n_segments;
  extra["n_draws"] = samples.n_draws();
  extra["mean_proposals_per_step"] = samples.mean_proposals_per_step;
  extra["latent_retries"] = samples.latent_retries;
  if (samples.n_draws() >= 100) {
    json diag = json::array();
    for (const auto& d : diagnostics(samples)) {
      json row{{"name", d.name}, {"defined", d.defined}};
      if (d.defined) {
        row["bulk_ess"] = d.bulk_ess;
        row["tail_ess"] = d.tail_ess;
        row["split_rhat"] = d.split_rhat;
        row["below_100"] = d.below_100;
      }
      diag.push_back(row);
    }
    extra["diagnostics"] = diag;
  }
  write_meta(out_dir, "infer", mc.seed, effective, extra);
  return 0;
}

int cmd_validate_fidelity(const json& cfg, int threads) {
  FidelityConfig fc;
  fc.alpha = get_or<double>(cfg, "alpha", 2.0 / 3.0);
  fc.nu = get_or<double>(cfg, "nu", 1.0 / 3.0);
  fc.gamma = get_or<double>(cfg, "gamma", 0.5);
  fc.t_end = get_or<double>(cfg, "t_end", 35.0);
  fc.n_sampled = get_or<int>(cfg, "n_sampled", 5);
  fc.min_infectious = get_or<int>(cfg, "min_infectious", 5);
  fc.n_trajectories = get_or<int>(cfg, "n_trajectories", 1000);
  fc.ode_grid_step = get_or<double>(cfg, "ode_grid_step", 0.5);
  fc.max_tt_attempts = get_or<int>(cfg, "max_tt_attempts", 1000);
  fc.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  fc.threads = get_or<int>(cfg, "threads", threads);
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  const FidelityResult res = run_fidelity_study(fc);

  const auto dump_arm = [&](const char* name,
                            const std::vector<std::vector<double>>& arm) {
    std::ostringstream ss;
    ss << "replicate,interval_index,length\n";
    for (std::size_t r = 0; r < arm.size(); ++r)
      for (std::size_t j = 0; j < arm[r].size(); ++j)
        ss << r << ',' << (j + 1) << ',' << format_double(arm[r][j]) << '\n';
    write_file(out_dir / name, ss.str());
  };
  dump_arm("empirical.csv", res.empirical);
  dump_arm("tt.csv", res.tt);
  dump_arm("tt_ode.csv", res.tt_ode);
  {
    std::ostringstream ss;
    ss << "arm,interval_index,median\n";
    const auto put = [&](const char* arm, const std::vector<double>& med) {
      for (std::size_t j = 0; j < med.size(); ++j)
        ss << arm << ',' << (j + 1) << ',' << format_double(med[j]) << '\n';
    };
    put("empirical", FidelityResult::interval_medians(res.empirical));
    put("tt", FidelityResult::interval_medians(res.tt));
    put("tt_ode", FidelityResult::interval_medians(res.tt_ode));
    write_file(out_dir / "interval_medians.csv", ss.str());
  }

  json effective{{"alpha", fc.alpha},
                 {"nu", fc.nu},
                 {"gamma", fc.gamma},
                 {"t_end", fc.t_end},
                 {"n_sampled", fc.n_sampled},
                 {"min_infectious", fc.min_infectious},
                 {"n_trajectories", fc.n_trajectories},
                 {"ode_grid_step", fc.ode_grid_step},
                 {"max_tt_attempts", fc.max_tt_attempts},
                 {"seed", fc.seed},
                 {"out", out_dir.string()}};
  json extra;
  extra["sim_attempts"] = res.sim_attempts;
  extra["tt_rejections"] = res.tt_rejections;
  extra["tt_ode_rejections"] = res.tt_ode_rejections;
  write_meta(out_dir, "validate-fidelity", fc.seed, effective, extra);
  return 0;
}

// Reads a posterior.csv + meta.json pair back into a PosteriorSamples.
PosteriorSamples load_posterior(const fs::path& posterior_csv, const fs::path& meta_json) {
  const json meta = json::parse(read_file(meta_json));
  PosteriorSamples s;
  s.span = meta.at("span").get<double>();
  s.n_segments = meta.at("n_segments").get<int>();
  s.changepoint_interval =
      meta.at("config").at("changepoint_interval_days").get<double>();
  s.seed = meta.at("seed").get<std::uint64_t>();

  const std::string text = read_file(posterior_csv);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty posterior file");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) names.push_back(field);
  }
  if (names.size() < 2 || names.back() != "loglik")
    throw ConfigError("unexpected posterior header");
  names.pop_back();
  s.names = names;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    if (row.size() != names.size() + 1) throw ConfigError("ragged posterior row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("posterior file has no draws");
  s.draws.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c)
      s.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    s.logliks.push_back(rows[r].back());
  }
  return s;
}

TruthGrid load_truth(const fs::path& truth_csv, double max_back) {
  const std::string text = read_file(truth_csv);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty truth file");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) names.push_back(field);
  }
  int col_t = -1, col_r = -1;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == "t_back") col_t = static_cast<int>(c);
    if (names[c] == "r_true") col_r = static_cast<int>(c);
  }
  if (col_t < 0 || col_r < 0)
    throw ConfigError("truth file needs t_back and r_true columns");
  std::vector<std::pair<double, double>> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    const double t = row.at(static_cast<std::size_t>(col_t));
    if (t < 0.0 || t > max_back + 1e-9) continue;
    pts.emplace_back(t, row.at(static_cast<std::size_t>(col_r)));
  }
  std::sort(pts.begin(), pts.end());
  TruthGrid grid;
  for (const auto& [t, r] : pts) {
    grid.times.push_back(t);
    grid.r_true.push_back(r);
  }
  grid.validate();
  return grid;
}

int cmd_metrics(const json& cfg) {
  if (!cfg.contains("simulations") || !cfg.at("simulations").is_array() ||
      cfg.at("simulations").empty())
    throw ConfigError("metrics needs a nonempty 'simulations' array");
  const double level = get_or<double>(cfg, "level", 0.95);
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  std::vector<double> envs, ads, widths;
  std::ostringstream per_sim;
  per_sim << "sim,posterior,env,ad,mciw\n";
  int idx = 0;
  for (const json& sim : cfg.at("simulations")) {
    const std::string posterior = sim.at("posterior").get<std::string>();
    const std::string meta = sim.at("meta").get<std::string>();
    const std::string truth_path = sim.at("truth").get<std::string>();
    const PosteriorSamples samples = load_posterior(posterior, meta);
    const TruthGrid truth = load_truth(truth_path, samples.span);
    const Eigen::MatrixXd grid = r_draws_on_grid(samples, truth.times);
    const double env = envelope(grid, truth.r_true, level);
    const double ad = abs_deviation(grid, truth.r_true);
    const double w = mciw(grid, level);
    envs.push_back(env);
    ads.push_back(ad);
    widths.push_back(w);
    per_sim << idx++ << ',' << posterior << ',' << format_double(env) << ','
            << format_double(ad) << ',' << format_double(w) << '\n';
  }
  write_file(out_dir / "metrics.csv", per_sim.str());

  const auto cell = [&](std::vector<double> xs) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2f (%.2f, %.2f)",
                  empirical_quantile(xs, 0.5), empirical_quantile(xs, 0.025),
                  empirical_quantile(xs, 0.975));
    return std::string(buf);
  };
  std::ostringstream summary;
  summary << "ENV,AD,MCIW\n";
  summary << '"' << cell(envs) << "\",\"" << cell(ads) << "\",\"" << cell(widths)
          << "\"\n";
  write_file(out_dir / "metrics_summary.csv", summary.str());

  json effective = cfg;
  effective["out"] = out_dir.string();
  write_meta(out_dir, "metrics", get_or<std::uint64_t>(cfg, "seed", 0), effective);
  return 0;
}

int cmd_summarize(const json& cfg) {
  const std::string posterior = get_or<std::string>(cfg, "posterior", "");
  const std::string meta = get_or<std::string>(cfg, "meta", "");
  if (posterior.empty() || meta.empty())
    throw ConfigError("summarize needs 'posterior' and 'meta' paths");
  const double step = get_or<double>(cfg, "grid_step", 0.5);
  const bool with_traj = get_or<bool>(cfg, "with_trajectories", false);
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  const PosteriorSamples samples = load_posterior(posterior, meta);
  std::vector<double> times;
  for (double t = 0.0; t <= samples.span + 1e-9; t += step) times.push_back(t);

  {
    const Eigen::MatrixXd grid = r_draws_on_grid(samples, times);
    std::ostringstream ss;
    write_summary_csv(ss, posterior_summary(grid, times));
    write_file(out_dir / "summary_r.csv", ss.str());
  }
  if (with_traj) {
    // Forward grid holding every changepoint plus the summary times.
    std::vector<double> fwd;
    for (double t : times) fwd.push_back(samples.span - t);
    const int needed = std::max(
        1, static_cast<int>(std::ceil(samples.span / samples.changepoint_interval - 1e-12)));
    for (int j = 1; j < needed; ++j)
      fwd.push_back(samples.span - j * samples.changepoint_interval);
    fwd.push_back(0.0);
    std::sort(fwd.begin(), fwd.end());
    fwd.erase(std::unique(fwd.begin(), fwd.end()), fwd.end());
    if (fwd.front() < 0.0) throw NumericalError("negative forward time");

    Eigen::MatrixXd e_grid(static_cast<Eigen::Index>(samples.n_draws()),
                           static_cast<Eigen::Index>(times.size()));
    Eigen::MatrixXd i_grid = e_grid;
    for (std::size_t d = 0; d < samples.n_draws(); ++d) {
      const NaturalParams p = samples.natural(d);
      const EiModelParams mp = samples.model_params(d);
      const int m = static_cast<int>(mp.r_segments.size());
      std::vector<double> cps;
      for (int j = needed - 1; j >= 1; --j)
        cps.push_back(samples.span - j * samples.changepoint_interval);
      std::vector<double> r_used(mp.r_segments.end() - std::min(needed, m),
                                 mp.r_segments.end());
      const DeterministicTrajectory traj =
          solve_on_grid(p.gamma, p.nu, r_used, cps, p.e0, p.i0, fwd);
      for (std::size_t c = 0; c < times.size(); ++c) {
        const double u = samples.span - times[c];
        e_grid(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = traj.e_at(u);
        i_grid(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = traj.i_at(u);
      }
    }
    std::ostringstream se, si;
    write_summary_csv(se, posterior_summary(e_grid, times));
    write_summary_csv(si, posterior_summary(i_grid, times));
    write_file(out_dir / "summary_e.csv", se.str());
    write_file(out_dir / "summary_i.csv", si.str());
  }

  json effective{{"posterior", posterior}, {"meta", meta},       {"grid_step", step},
                 {"with_trajectories", with_traj}, {"out", out_dir.string()}};
  write_meta(out_dir, "summarize", samples.seed, effective);
  return 0;
}

int cmd_dump_matrices(const json& cfg) {
  IntervalContext ctx;
  ctx.k = get_or<int>(cfg, "k", 3);
  ctx.e_pop = get_or<double>(cfg, "e", 10.0);
  ctx.i_pop = get_or<double>(cfg, "i", 10.0);
  ctx.alpha = get_or<double>(cfg, "alpha", 2.0 / 3.0);
  ctx.gamma = get_or<double>(cfg, "gamma", 0.5);
  ctx.nu = get_or<double>(cfg, "nu", 1.0 / 3.0);
  ctx.dt = get_or<double>(cfg, "dt", 1.0);
  const fs::path out_dir = get_or<std::string>(cfg, "out", "out");

  const RateMatrixSet m = build_rate_matrices(ctx);
  const auto dump = [&](const char* name, const Eigen::MatrixXd& mat) {
    std::ostringstream ss;
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c)
        ss << format_double(mat(r, c)) << (c + 1 < mat.cols() ? "," : "");
      ss << '\n';
    }
    write_file(out_dir / name, ss.str());
  };
  dump("A.csv", m.A);
  dump("L.csv", m.L);
  dump("Q.csv", m.assembled_generator());

  json effective{{"k", ctx.k},         {"e", ctx.e_pop},   {"i", ctx.i_pop},
                 {"alpha", ctx.alpha}, {"gamma", ctx.gamma}, {"nu", ctx.nu},
                 {"dt", ctx.dt},       {"out", out_dir.string()}};
  write_meta(out_dir, "dump-matrices", 0, effective);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EI coalescent simulation and inference toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, tree_path, scenario;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;
  int threads = 1;
  long long iterations = -1, n_trajectories = -1, n_samples = -1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "RNG seed (overrides config)")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_dir, "output directory (overrides config)")
        ->each([&](const std::string&) { out_set = true; });
    sub->add_option("--threads", threads, "worker threads for replicate fan-out");
  };

  CLI::App* sim = app.add_subcommand("simulate-epidemic",
                                     "agent SEIR epidemic, histories and true tree");
  add_common(sim);
  sim->add_option("--scenario", scenario, "fixed | increase | control");
  sim->add_option("--samples", n_samples, "number of sampled tips");

  CLI::App* infer = app.add_subcommand("infer", "posterior sampling from a dated tree");
  add_common(infer);
  infer->add_option("--tree", tree_path, "Newick input (overrides config)");
  infer->add_option("--iterations", iterations, "MCMC iterations (overrides config)");

  CLI::App* fidelity = app.add_subcommand(
      "validate-fidelity", "empirical vs time-transformation coalescent arms");
  add_common(fidelity);
  fidelity->add_option("--trajectories", n_trajectories,
                       "accepted trajectories per arm");

  CLI::App* metrics = app.add_subcommand("metrics", "coverage metrics across studies");
  add_common(metrics);

  CLI::App* summarize =
      app.add_subcommand("summarize", "posterior summary tables on a time grid");
  add_common(summarize);

  CLI::App* dump = app.add_subcommand("dump-matrices",
                                      "rate matrices for one interval context");
  add_common(dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    json cfg = load_config(config_path);
    if (seed_set) cfg["seed"] = seed;
    if (out_set) cfg["out"] = out_dir;
    if (!cfg.contains("out")) cfg["out"] = "out";

    if (sim->parsed()) {
      if (!scenario.empty()) cfg["scenario"] = scenario;
      if (n_samples > 0) cfg["sampling"]["n_samples"] = n_samples;
      return cmd_simulate_epidemic(cfg);
    }
    if (infer->parsed()) {
      if (!tree_path.empty()) cfg["tree"] = tree_path;
      if (iterations > 0) cfg["iterations"] = iterations;
      return cmd_infer(cfg);
    }
    if (fidelity->parsed()) {
      if (n_trajectories > 0) cfg["n_trajectories"] = n_trajectories;
      if (threads > 1) cfg["threads"] = threads;
      return cmd_validate_fidelity(cfg, threads);
    }
    if (metrics->parsed()) return cmd_metrics(cfg);
    if (summarize->parsed()) return cmd_summarize(cfg);
    if (dump->parsed()) return cmd_dump_matrices(cfg);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
