#include "longcat/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "longcat/error.hpp"

namespace longcat {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "draw archives assume a little-endian host");

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ValidationError(std::string("unknown key '") + key + "' in " + what);
}

struct Field {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;  // in doubles

  std::size_t count() const {
    std::size_t c = 1;
    for (auto s : shape) c *= s;
    return c;
  }
};

const char* link_name(Link l) { return l == Link::Expit ? "expit" : "probit"; }
Link link_from(const std::string& s) {
  if (s == "expit") return Link::Expit;
  if (s == "probit") return Link::Probit;
  throw ValidationError("unknown link '" + s + "'");
}

const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::SquaredExponential: return "squared_exponential";
    case KernelKind::Exponential: return "exponential";
    case KernelKind::CompoundSymmetry: return "compound_symmetry";
    case KernelKind::Mixture: return "mixture";
  }
  return "";
}

KernelKind kernel_from(const std::string& s) {
  for (auto k : {KernelKind::SquaredExponential, KernelKind::Exponential, KernelKind::CompoundSymmetry,
                 KernelKind::Mixture})
    if (s == kernel_name(k)) return k;
  throw ValidationError("unknown kernel '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<SubjectRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError("line " + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) throw ValidationError("empty data file");
  ++lineno;
  if (trim(line) != "subject,time,response") fail("header must be 'subject,time,response'");

  std::vector<SubjectRecord> records;
  std::map<std::string, std::size_t> where;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 3) fail("expected 3 fields, got " + std::to_string(cells.size()));
    if (cells[0].empty()) fail("empty subject id");
    double t = 0.0;
    auto [tp, te] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), t);
    if (te != std::errc() || tp != cells[1].data() + cells[1].size() || !std::isfinite(t))
      fail("bad time '" + cells[1] + "'");
    int y = 0;
    auto [yp, ye] = std::from_chars(cells[2].data(), cells[2].data() + cells[2].size(), y);
    if (ye != std::errc() || yp != cells[2].data() + cells[2].size()) fail("bad response '" + cells[2] + "'");
    auto [it, inserted] = where.try_emplace(cells[0], records.size());
    if (inserted) records.push_back({cells[0], {}, {}});
    records[it->second].times.push_back(t);
    records[it->second].responses.push_back(y);
  }
  for (auto& r : records) {
    std::vector<std::size_t> order(r.times.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.times[a] < r.times[b]; });
    SubjectRecord sorted{r.id, {}, {}};
    for (auto k : order) {
      sorted.times.push_back(r.times[k]);
      sorted.responses.push_back(r.responses[k]);
    }
    r = std::move(sorted);
  }
  return records;
}

std::vector<SubjectRecord> read_csv(const fs::path& path) { return parse_csv(slurp(path)); }

std::string format_csv(const std::vector<SubjectRecord>& records) {
  std::string out = "subject,time,response\n";
  for (const auto& r : records)
    for (std::size_t t = 0; t < r.times.size(); ++t)
      out += r.id + "," + format_double(r.times[t]) + "," + std::to_string(r.responses[t]) + "\n";
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

void write_csv(const fs::path& path, const std::vector<SubjectRecord>& records) {
  write_text(path, format_csv(records));
}

json read_json(const fs::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

json to_json(const PriorConfig& p) {
  return {{"a_mu", p.a_mu},   {"b_mu", p.b_mu},   {"a_sigma", p.a_sigma}, {"b_sigma", p.b_sigma},
          {"a_rho", p.a_rho}, {"b_rho", p.b_rho}, {"a_nu", p.a_nu},       {"b_nu", p.b_nu},
          {"a_eps", p.a_eps}, {"b_eps", p.b_eps}};
}

PriorConfig priors_from_json(const json& j) {
  reject_unknown(j, {"a_mu", "b_mu", "a_sigma", "b_sigma", "a_rho", "b_rho", "a_nu", "b_nu", "a_eps", "b_eps"},
                 "priors");
  PriorConfig p;
  take(j, "a_mu", p.a_mu);
  take(j, "b_mu", p.b_mu);
  take(j, "a_sigma", p.a_sigma);
  take(j, "b_sigma", p.b_sigma);
  take(j, "a_rho", p.a_rho);
  take(j, "b_rho", p.b_rho);
  take(j, "a_nu", p.a_nu);
  take(j, "b_nu", p.b_nu);
  take(j, "a_eps", p.a_eps);
  take(j, "b_eps", p.b_eps);
  p.validate();
  return p;
}

json to_json(const SamplerConfig& c) {
  return {{"total_iterations", c.total_iterations},
          {"burn_in", c.burn_in},
          {"thinning", c.thinning},
          {"seed", c.seed},
          {"griddy_size", c.griddy_size},
          {"store_latents", c.store_latents},
          {"mean_structure", to_string(c.mean_structure)}};
}

SamplerConfig config_from_json(const json& j) {
  reject_unknown(j, {"total_iterations", "burn_in", "thinning", "seed", "griddy_size", "store_latents", "mean_structure"},
                 "sampler config");
  SamplerConfig c;
  take(j, "total_iterations", c.total_iterations);
  take(j, "burn_in", c.burn_in);
  take(j, "thinning", c.thinning);
  take(j, "seed", c.seed);
  take(j, "griddy_size", c.griddy_size);
  take(j, "store_latents", c.store_latents);
  std::string ms = to_string(c.mean_structure);
  take(j, "mean_structure", ms);
  c.mean_structure = mean_structure_from_string(ms);
  c.validate();
  return c;
}

SimScenario scenario_from_json(const json& j) {
  reject_unknown(j, {"preset", "case", "sparsity", "seed", "subjects", "noise_var", "components", "grid"}, "scenario");
  SimScenario s;
  std::uint64_t seed = 0;
  take(j, "seed", seed);
  if (j.contains("preset")) {
    std::string preset;
    int case_id = 1;
    double sparsity = 0.0;
    take(j, "preset", preset);
    take(j, "case", case_id);
    take(j, "sparsity", sparsity);
    if (preset == "trend")
      s = trend_scenario(case_id, sparsity, seed);
    else if (preset == "kernel")
      s = kernel_scenario(case_id, seed);
    else if (preset == "irregular")
      s = irregular_scenario(seed);
    else
      throw ValidationError("unknown preset '" + preset + "'");
    if (preset != "trend" && j.contains("sparsity")) s.sparsity = sparsity;
  } else {
    if (!j.contains("components")) throw ValidationError("scenario needs a preset or components");
    take(j, "sparsity", s.sparsity);
    s.seed = seed;
  }
  take(j, "subjects", s.subjects);
  take(j, "noise_var", s.noise_var);
  if (j.contains("components")) {
    s.components.clear();
    for (const auto& c : j.at("components")) {
      reject_unknown(c, {"link", "signal", "kernel", "student_t", "df"}, "scenario component");
      ScenarioComponent comp;
      std::string link = "expit";
      take(c, "link", link);
      comp.link = link_from(link);
      if (c.contains("signal")) {
        const auto& f = c.at("signal");
        reject_unknown(f, {"offset", "sin_amp", "sin_freq", "cos_amp", "cos_freq"}, "signal");
        take(f, "offset", comp.signal.offset);
        take(f, "sin_amp", comp.signal.sin_amp);
        take(f, "sin_freq", comp.signal.sin_freq);
        take(f, "cos_amp", comp.signal.cos_amp);
        take(f, "cos_freq", comp.signal.cos_freq);
      }
      if (c.contains("kernel")) {
        const auto& k = c.at("kernel");
        reject_unknown(k, {"kind", "variance", "length", "correlation", "weight"}, "kernel");
        std::string kind = kernel_name(comp.kernel.kind);
        take(k, "kind", kind);
        comp.kernel.kind = kernel_from(kind);
        take(k, "variance", comp.kernel.variance);
        take(k, "length", comp.kernel.length);
        take(k, "correlation", comp.kernel.correlation);
        take(k, "weight", comp.kernel.weight);
      }
      take(c, "student_t", comp.student_t);
      take(c, "df", comp.df);
      s.components.push_back(comp);
    }
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, {"kind", "points", "lo", "hi"}, "grid");
    std::string kind = s.grid.kind == GridKind::Regular ? "regular" : "uniform_random";
    take(g, "kind", kind);
    if (kind == "regular")
      s.grid.kind = GridKind::Regular;
    else if (kind == "uniform_random")
      s.grid.kind = GridKind::UniformRandom;
    else
      throw ValidationError("unknown grid kind '" + kind + "'");
    take(g, "points", s.grid.points);
    take(g, "lo", s.grid.lo);
    take(g, "hi", s.grid.hi);
  }
  s.validate();
  return s;
}

json to_json(const SimScenario& s) {
  json comps = json::array();
  for (const auto& c : s.components)
    comps.push_back({{"link", link_name(c.link)},
                     {"signal",
                      {{"offset", c.signal.offset},
                       {"sin_amp", c.signal.sin_amp},
                       {"sin_freq", c.signal.sin_freq},
                       {"cos_amp", c.signal.cos_amp},
                       {"cos_freq", c.signal.cos_freq}}},
                     {"kernel",
                      {{"kind", kernel_name(c.kernel.kind)},
                       {"variance", c.kernel.variance},
                       {"length", c.kernel.length},
                       {"correlation", c.kernel.correlation},
                       {"weight", c.kernel.weight}}},
                     {"student_t", c.student_t},
                     {"df", c.df}});
  return {{"components", comps},
          {"noise_var", s.noise_var},
          {"subjects", s.subjects},
          {"grid",
           {{"kind", s.grid.kind == GridKind::Regular ? "regular" : "uniform_random"},
            {"points", s.grid.points},
            {"lo", s.grid.lo},
            {"hi", s.grid.hi}}},
          {"sparsity", s.sparsity},
          {"seed", s.seed}};
}

void write_draws(const fs::path& dir, const PosteriorDraws& d) {
  d.check_consistent();
  fs::create_directories(dir);
  const std::size_t s = d.size(), n = d.subjects(), p = d.grid_size();
  std::vector<Field> fields;
  std::vector<double> data;
  auto add = [&](const std::string& name, std::vector<std::size_t> shape, auto&& fill) {
    Field f{name, std::move(shape), data.size()};
    const auto before = data.size();
    fill();
    if (data.size() - before != f.count()) throw std::logic_error("field " + name + " size mismatch");
    fields.push_back(std::move(f));
  };
  const std::pair<const char*, const std::vector<double>*> scalars[] = {
      {"noise_var", &d.noise_var}, {"mu0", &d.mu0}, {"sigma2", &d.sigma2}, {"rho", &d.rho}, {"nu", &d.nu}};
  for (const auto& [name, v] : scalars) add(name, {s}, [&] { data.insert(data.end(), v->begin(), v->end()); });
  add("mean", {s, p}, [&] {
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t t = 0; t < p; ++t) data.push_back(d.mean(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)));
  });
  add("signal", {s, n, p}, [&] {
    for (const auto& z : d.signal)
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index t = 0; t < z.cols(); ++t) data.push_back(z(i, t));
  });
  if (!d.cov.empty())
    add("cov", {s, p, p}, [&] {
      for (const auto& c : d.cov) data.insert(data.end(), c.data(), c.data() + c.size());
    });
  const std::size_t nobs = d.layout.observation_count();
  if (!d.latent.empty())
    add("latent", {s, nobs}, [&] {
      for (const auto& v : d.latent) data.insert(data.end(), v.data(), v.data() + v.size());
    });
  if (!d.pg.empty())
    add("pg", {s, nobs}, [&] {
      for (const auto& v : d.pg) data.insert(data.end(), v.data(), v.data() + v.size());
    });

  {
    std::ofstream out(dir / "draws.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw ValidationError("cannot write draws.bin in '" + dir.string() + "'");
  }

  json jf = json::array();
  for (const auto& f : fields) jf.push_back({{"name", f.name}, {"shape", f.shape}, {"offset", f.offset * sizeof(double)}});
  json steps = json::object();
  for (std::size_t k = 0; k < kStepNames.size(); ++k) steps[kStepNames[k]] = d.meta.step_seconds[k];
  SamplerConfig cfg;
  cfg.total_iterations = d.meta.total_iterations;
  cfg.burn_in = d.meta.burn_in;
  cfg.thinning = d.meta.thinning;
  cfg.seed = d.meta.seed;
  cfg.griddy_size = d.meta.griddy_size;
  cfg.store_latents = d.meta.store_latents;
  cfg.mean_structure = d.meta.mean_structure;
  const json meta = {{"format", "longcat-draws"},
                     {"version", 1},
                     {"dtype", "float64-le"},
                     {"draws", s},
                     {"seed", d.meta.seed},
                     {"config", to_json(cfg)},
                     {"priors", to_json(d.priors)},
                     {"layout",
                      {{"subject_ids", d.layout.subject_ids},
                       {"pooled_times", d.layout.pooled_times},
                       {"observed", d.layout.observed}}},
                     {"step_seconds", steps},
                     {"fields", jf}};
  write_text(dir / "draws.json", meta.dump(2) + "\n");

  std::string traces = "draw,noise_var,mu0,sigma2,rho,nu\n";
  for (std::size_t k = 0; k < s; ++k)
    traces += std::to_string(k) + "," + format_double(d.noise_var[k]) + "," + format_double(d.mu0[k]) + "," +
              format_double(d.sigma2[k]) + "," + format_double(d.rho[k]) + "," + format_double(d.nu[k]) + "\n";
  write_text(dir / "traces.csv", traces);
}

PosteriorDraws read_draws(const fs::path& dir) {
  const json meta = read_json(dir / "draws.json");
  PosteriorDraws d;
  try {
    if (meta.at("format") != "longcat-draws") throw ValidationError("not a draws archive");
    const auto& lay = meta.at("layout");
    d.layout.subject_ids = lay.at("subject_ids").get<std::vector<std::string>>();
    d.layout.pooled_times = lay.at("pooled_times").get<std::vector<double>>();
    d.layout.observed = lay.at("observed").get<std::vector<std::vector<int>>>();
    d.priors = priors_from_json(meta.at("priors"));
    const SamplerConfig cfg = config_from_json(meta.at("config"));
    d.meta.seed = cfg.seed;
    d.meta.burn_in = cfg.burn_in;
    d.meta.thinning = cfg.thinning;
    d.meta.total_iterations = cfg.total_iterations;
    d.meta.griddy_size = cfg.griddy_size;
    d.meta.store_latents = cfg.store_latents;
    d.meta.mean_structure = cfg.mean_structure;
    for (std::size_t k = 0; k < kStepNames.size(); ++k)
      if (meta.contains("step_seconds") && meta["step_seconds"].contains(kStepNames[k]))
        d.meta.step_seconds[k] = meta["step_seconds"][kStepNames[k]].get<double>();

    const std::string raw = slurp(dir / "draws.bin");
    if (raw.size() % sizeof(double) != 0) throw ValidationError("draws.bin has a partial value");
    std::vector<double> data(raw.size() / sizeof(double));
    std::memcpy(data.data(), raw.data(), raw.size());

    const std::size_t s = meta.at("draws").get<std::size_t>();
    const auto n = static_cast<Eigen::Index>(d.layout.subject_ids.size());
    const auto p = static_cast<Eigen::Index>(d.layout.pooled_times.size());
    for (const auto& jf : meta.at("fields")) {
      Field f{jf.at("name").get<std::string>(), jf.at("shape").get<std::vector<std::size_t>>(),
              jf.at("offset").get<std::size_t>() / sizeof(double)};
      if (f.offset + f.count() > data.size()) throw ValidationError("field '" + f.name + "' exceeds draws.bin");
      if (f.shape.empty() || f.shape[0] != s) throw ValidationError("field '" + f.name + "' has wrong draw count");
      const double* src = data.data() + f.offset;
      const std::size_t per = f.count() / std::max<std::size_t>(s, 1);
      auto scalar = [&](std::vector<double>& v) { v.assign(src, src + s); };
      if (f.name == "noise_var") scalar(d.noise_var);
      else if (f.name == "mu0") scalar(d.mu0);
      else if (f.name == "sigma2") scalar(d.sigma2);
      else if (f.name == "rho") scalar(d.rho);
      else if (f.name == "nu") scalar(d.nu);
      else if (f.name == "mean") {
        d.mean.resize(static_cast<Eigen::Index>(s), p);
        for (std::size_t k = 0; k < s; ++k)
          for (Eigen::Index t = 0; t < p; ++t) d.mean(static_cast<Eigen::Index>(k), t) = src[k * per + static_cast<std::size_t>(t)];
      } else if (f.name == "signal") {
        for (std::size_t k = 0; k < s; ++k) {
          Eigen::MatrixXd z(n, p);
          for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index t = 0; t < p; ++t) z(i, t) = src[k * per + static_cast<std::size_t>(i * p + t)];
          d.signal.push_back(std::move(z));
        }
      } else if (f.name == "cov") {
        for (std::size_t k = 0; k < s; ++k) d.cov.push_back(Eigen::Map<const Eigen::MatrixXd>(src + k * per, p, p));
      } else if (f.name == "latent" || f.name == "pg") {
        auto& target = f.name == "latent" ? d.latent : d.pg;
        for (std::size_t k = 0; k < s; ++k)
          target.push_back(Eigen::Map<const Eigen::VectorXd>(src + k * per, static_cast<Eigen::Index>(per)));
      } else {
        throw ValidationError("unknown field '" + f.name + "'");
      }
    }
    if (s == 0) d.mean.resize(0, p);
  } catch (const json::exception& e) {
    throw ValidationError("malformed draws.json in '" + dir.string() + "': " + e.what());
  }
  d.check_consistent();
  return d;
}

std::string format_curve_csv(const CurveEstimate& c) {
  std::string out = "time,mean,lower,upper\n";
  for (std::size_t k = 0; k < c.times.size(); ++k)
    out += format_double(c.times[k]) + "," + format_double(c.mean[k]) + "," + format_double(c.lower[k]) + "," +
           format_double(c.upper[k]) + "\n";
  return out;
}

json to_json(const ScoreReport& r) {
  return {{"G", r.loss.G}, {"P", r.loss.P}, {"total", r.loss.total}, {"crps", r.crps}};
}

std::string format_score_csv(const ScoreReport& r) {
  return "G,P,G+P,CRPS\n" + format_double(r.loss.G) + "," + format_double(r.loss.P) + "," +
         format_double(r.loss.total) + "," + format_double(r.crps) + "\n";
}

void write_decomposition(const fs::path& dir, const OrdinalDecomposition& d) {
  fs::create_directories(dir);
  json index = {{"categories", d.categories}, {"datasets", json::array()}};
  for (std::size_t j = 0; j < d.size(); ++j) {
    const std::string name = "category_" + std::to_string(j + 1) + ".csv";
    write_csv(dir / name, d.records[j]);
    json rows = json::array();
    for (const auto& o : d.index[j]) rows.push_back({o.subject, o.position});
    index["datasets"].push_back({{"category", j + 1}, {"file", name}, {"rows", rows}});
  }
  write_text(dir / "index.json", index.dump(2) + "\n");
}

void write_simulation(const fs::path& dir, const SimScenario& scenario, const SimResult& r) {
  fs::create_directories(dir);
  write_csv(dir / "data.csv", r.data.to_records());
  std::string truth = "subject,time,signal,latent,probability,curve,observed\n";
  for (Eigen::Index i = 0; i < r.latent.rows(); ++i)
    for (Eigen::Index t = 0; t < r.latent.cols(); ++t)
      truth += "s" + std::to_string(i + 1) + "," + format_double(r.grid[static_cast<std::size_t>(t)]) + "," +
               format_double(r.signal(i, t)) + "," + format_double(r.latent(i, t)) + "," +
               format_double(r.probability(i, t)) + "," + format_double(r.curve(i, t)) + "," +
               std::to_string(r.kept(i, t)) + "\n";
  write_text(dir / "truth.csv", truth);
  std::string kernel = "distance,value\n";
  for (std::size_t t = 0; t < r.grid.size(); ++t)
    kernel += format_double(r.grid[t] - r.grid.front()) + "," + format_double(r.kernel(0, static_cast<Eigen::Index>(t))) + "\n";
  write_text(dir / "kernel.csv", kernel);
  write_text(dir / "scenario.json", to_json(scenario).dump(2) + "\n");
}

}  // namespace longcat
