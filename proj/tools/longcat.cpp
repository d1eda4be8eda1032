// longcat: simulate, fit, predict and score longitudinal binary/ordinal data.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "longcat/diagnostics.hpp"
#include "longcat/error.hpp"
#include "longcat/gibbs.hpp"
#include "longcat/io.hpp"
#include "longcat/ordinal.hpp"
#include "longcat/predict.hpp"
#include "longcat/simulate.hpp"

namespace fs = std::filesystem;
using namespace longcat;
using nlohmann::json;

namespace {

int thread_count() {
  if (const char* env = std::getenv("LONGCAT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::string chain_dir(int c) { return "chain_" + std::to_string(c); }
std::string category_dir(int j) { return "category_" + std::to_string(j); }

struct SimulateArgs {
  std::string scenario, out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  json spec = read_json(a.scenario);
  if (!spec.is_object()) throw ValidationError("scenario must be a JSON object");
  spec["seed"] = a.seed;
  const SimScenario scenario = scenario_from_json(spec);
  const SimResult result = generate(scenario);
  write_simulation(a.out, scenario, result);
  std::cout << "wrote " << result.data.observation_count() << " observations for " << result.data.size()
            << " subjects to " << a.out << "\n";
  return 0;
}

struct FitArgs {
  std::string data, priors, config, out;
  bool ordinal = false;
  int chains = 1;
  std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a) {
  const auto records = read_csv(a.data);
  const PriorConfig priors = a.priors.empty() ? PriorConfig{} : priors_from_json(read_json(a.priors));
  SamplerConfig cfg = a.config.empty() ? SamplerConfig{} : config_from_json(read_json(a.config));
  if (a.chains < 1) throw ValidationError("--chains must be >= 1");
  const int threads = thread_count();
  fs::create_directories(a.out);

  json manifest = {{"data", a.data}, {"seed", a.seed}, {"chains", a.chains}, {"threads", threads},
                   {"ordinal", a.ordinal}, {"config", to_json(cfg)}, {"priors", to_json(priors)},
                   {"runs", json::array()}};
  auto chain_seed = [&](int c) { return a.chains == 1 ? a.seed : derive_seed(a.seed, static_cast<std::uint64_t>(c)); };

  if (a.ordinal) {
    int categories = 0;
    for (const auto& r : records)
      for (int y : r.responses) categories = std::max(categories, y);
    const auto data = OrdinalDataset::from_records(records, std::max(categories, 2));
    const auto decomposition = decompose(data);
    write_decomposition(fs::path(a.out) / "decomposition", decomposition);
    manifest["categories"] = data.categories();
    for (int c = 1; c <= a.chains; ++c) {
      OrdinalFitOptions opt;
      opt.priors = {priors};
      opt.config = cfg;
      opt.config.seed = chain_seed(c);
      opt.threads = threads;
      const auto fits = fit_ordinal(decomposition, opt);
      for (std::size_t j = 0; j < fits.size(); ++j) {
        const auto dir = fs::path(a.out) / chain_dir(c) / category_dir(static_cast<int>(j) + 1);
        write_draws(dir, fits[j]);
        manifest["runs"].push_back({{"chain", c}, {"category", j + 1}, {"seed", fits[j].meta.seed},
                                    {"archive", dir.string()}, {"draws", fits[j].size()}});
      }
    }
  } else {
    const auto data = BinaryDataset::from_records(records);
    std::vector<PosteriorDraws> runs(static_cast<std::size_t>(a.chains));
    std::vector<std::exception_ptr> errors(runs.size());
    auto work = [&](std::size_t c) {
      try {
        SamplerConfig chain_cfg = cfg;
        chain_cfg.seed = chain_seed(static_cast<int>(c) + 1);
        runs[c] = run_chain(data, priors, chain_cfg);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), runs.size());
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < runs.size(); c += workers) work(c);
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t c = 0; c < runs.size(); ++c) {
      const auto dir = fs::path(a.out) / chain_dir(static_cast<int>(c) + 1);
      write_draws(dir, runs[c]);
      json steps = json::object();
      for (std::size_t k = 0; k < kStepNames.size(); ++k) steps[kStepNames[k]] = runs[c].meta.step_seconds[k];
      manifest["runs"].push_back({{"chain", c + 1}, {"seed", runs[c].meta.seed}, {"archive", dir.string()},
                                  {"draws", runs[c].size()}, {"step_seconds", steps}});
    }
  }
  write_text(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "fit complete: " << manifest["runs"].size() << " archive(s) in " << a.out << "\n";
  return 0;
}

// Category archives under `dir` (ordinal fit), or empty for a single archive.
std::vector<fs::path> category_archives(const fs::path& dir) {
  std::vector<fs::path> out;
  for (int j = 1; fs::exists(dir / category_dir(j) / "draws.json"); ++j) out.push_back(dir / category_dir(j));
  return out;
}

fs::path resolve_archive_root(const fs::path& dir) {
  if (fs::exists(dir / "draws.json") || fs::exists(dir / category_dir(1) / "draws.json")) return dir;
  if (fs::exists(dir / chain_dir(1))) return dir / chain_dir(1);
  throw ValidationError("no draws archive under '" + dir.string() + "'");
}

struct PredictArgs {
  std::string draws, subject = "new", fine_grid, out, pair;
  int mc_inner = 200;
  double level = 0.95;
  std::uint64_t seed = 0;
};

int cmd_predict(const PredictArgs& a) {
  const fs::path root = resolve_archive_root(a.draws);
  const fs::path out(a.out);
  const auto cats = category_archives(root);
  PredictOptions opt;
  opt.mc_inner = a.mc_inner;
  opt.level = a.level;
  if (opt.mc_inner < 1) throw ValidationError("--mc-inner must be >= 1");

  if (!cats.empty()) {
    std::vector<PosteriorDraws> fits;
    for (const auto& c : cats) fits.push_back(read_draws(c));
    std::vector<double> requested = a.fine_grid.empty() ? std::vector<double>{} : parse_grid_spec(a.fine_grid);
    const auto times = ordinal_time_grid(fits, requested);
    const auto curves = ordinal_probability_curves(fits, a.subject, times, opt, a.seed);
    for (std::size_t j = 0; j < curves.curves.size(); ++j) {
      const auto path = out.parent_path() / (out.stem().string() + "_category_" + std::to_string(j + 1) + ".csv");
      write_text(path, format_curve_csv(curves.curves[j]));
    }
    std::cout << "wrote " << curves.curves.size() << " category curves on " << times.size() << " points\n";
    return 0;
  }

  const auto draws = read_draws(root);
  const std::vector<double> requested = a.fine_grid.empty() ? std::vector<double>{} : parse_grid_spec(a.fine_grid);
  const auto fine = FineGrid::build(draws.layout.pooled_times, requested);
  const auto curve = probability_response_curve(draws, a.subject, fine, opt, a.seed);
  write_text(out, format_curve_csv(curve));

  if (!a.pair.empty()) {
    const auto pts = parse_grid_spec(a.pair);
    if (pts.size() != 2 && pts.size() != 1) throw ValidationError("--pair takes one or two times");
    auto position = [&](double t) {
      for (std::size_t k = 0; k < fine.size(); ++k)
        if (std::fabs(fine.times[k] - t) <= 1e-9) return k;
      throw ValidationError("pair time " + format_double(t) + " is not on the prediction grid");
    };
    const std::size_t pa = position(pts.front()), pb = position(pts.back());
    const auto bc = binary_covariance(draws, a.subject, fine, pa, pb, a.mc_inner, derive_seed(a.seed, 7));
    std::string csv = "quantity,mean,lower,upper\n";
    csv += "variance," + format_double(bc.variance_summary.mean) + "," + format_double(bc.variance_summary.lower) +
           "," + format_double(bc.variance_summary.upper) + "\n";
    csv += "conditional_covariance," + format_double(bc.covariance_summary.mean) + "," +
           format_double(bc.covariance_summary.lower) + "," + format_double(bc.covariance_summary.upper) + "\n";
    csv += "marginal_covariance," + format_double(bc.marginal_covariance) + ",,\n";
    write_text(out.parent_path() / (out.stem().string() + "_covariance.csv"), csv);
  }
  std::cout << "wrote curve on " << fine.size() << " points to " << a.out << "\n";
  return 0;
}

struct ScoreArgs {
  std::string draws, data, out;
  int replicates = 1000;
  std::uint64_t seed = 0;
};

int cmd_score(const ScoreArgs& a) {
  const auto draws = read_draws(resolve_archive_root(a.draws));
  const auto data = BinaryDataset::from_records(read_csv(a.data));
  const auto report = score(draws, data, a.replicates, a.seed);
  const fs::path out(a.out);
  write_text(out, to_json(report).dump(2) + "\n");
  write_text(out.parent_path() / (out.stem().string() + ".csv"), format_score_csv(report));
  std::cout << "G=" << report.loss.G << " P=" << report.loss.P << " total=" << report.loss.total
            << " crps=" << report.crps << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian functional models for longitudinal binary and ordinal responses"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  s->add_option("--scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--seed", sim.seed, "Random seed")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run the Gibbs sampler");
  f->add_option("--data", fit.data, "Data CSV (subject,time,response)")->required()->check(CLI::ExistingFile);
  f->add_option("--priors", fit.priors, "Priors JSON")->check(CLI::ExistingFile);
  f->add_option("--config", fit.config, "Sampler config JSON")->check(CLI::ExistingFile);
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_flag("--ordinal", fit.ordinal, "Treat responses as ordinal categories 1..C");
  f->add_option("--chains", fit.chains, "Number of chains");
  f->add_option("--seed", fit.seed, "Random seed")->required();

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Probability response curves from stored draws");
  p->add_option("--draws", pred.draws, "Draws archive or fit directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--subject", pred.subject, "Subject id or 'new'");
  p->add_option("--fine-grid", pred.fine_grid, "Extra times: start:end:step (step may be num/den) or a,b,c");
  p->add_option("--out", pred.out, "Curve CSV")->required();
  p->add_option("--mc-inner", pred.mc_inner, "Inner Monte Carlo size per draw");
  p->add_option("--level", pred.level, "Credible level");
  p->add_option("--pair", pred.pair, "Two times t,t' for the binary covariance summary");
  p->add_option("--seed", pred.seed, "Random seed");

  ScoreArgs sc;
  auto* c = app.add_subcommand("score", "Posterior predictive loss and CRPS");
  c->add_option("--draws", sc.draws, "Draws archive or fit directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--data", sc.data, "Data CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--out", sc.out, "Report JSON (a CSV is written alongside)")->required();
  c->add_option("--replicates", sc.replicates, "Posterior predictive replicates");
  c->add_option("--seed", sc.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*f) return cmd_fit(fit);
    if (*p) return cmd_predict(pred);
    if (*c) return cmd_score(sc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure in " << e.where() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
