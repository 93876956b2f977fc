/* Copyright 2026 The bcastle Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// bcastle: command-line front end for simulation, verification and export.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bcastle/acceptance.hpp"

namespace fs = std::filesystem;
using namespace bcastle;
using nlohmann::json;

namespace {

// ---- configuration: flat key=value, flags override the file ----

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      {"seed", "1"},           {"workers", "1"},       {"out_dir", "out"},     {"delta", "0.1"},
      {"beta", "0"},           {"window", "1,-50,50"}, {"periodic", "0"},      {"frames", "4"},
      {"points", "1:0,1:0.5,1:1"},                     {"replicas", ""},       {"t", "1"},
      {"R", "1"},              {"n", "201"},           {"dt", "1e-4"},         {"ic_jumps", ""},
      {"ic_values", "0"},      {"deltas", "0.1,0.05,0.02"},                    {"T", "1"},
      {"x0", "0"},             {"x1", "1"},            {"ks_threshold", "0.05"}, {"format", "csv"},
      {"in_dir", ""}};
  return d;
}

std::string trim_ws(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string norm_key(std::string k) {
  for (auto& c : k)
    if (c == '-') c = '_';
  return k;
}

void set_key(std::map<std::string, std::string>& cfg, const std::string& raw_key, const std::string& value) {
  std::string k = norm_key(trim_ws(raw_key));
  if (!defaults().count(k)) throw ConfigError("unknown configuration key '" + k + "'");
  cfg[k] = trim_ws(value);
}

void read_config_file(const std::string& path, std::map<std::string, std::string>& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim_ws(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(no) + ": expected key=value");
    set_key(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

struct Config {
  std::map<std::string, std::string> kv;

  const std::string& str(const std::string& k) const { return kv.at(k); }
  double num(const std::string& k) const {
    const auto& s = kv.at(k);
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + k + "': not a number: '" + s + "'");
    }
  }
  long integer(const std::string& k) const {
    double v = num(k);
    if (v != std::floor(v) || std::isinf(v)) throw ConfigError("key '" + k + "': not an integer");
    return static_cast<long>(v);
  }
  std::vector<double> list(const std::string& k) const {
    std::vector<double> out;
    std::stringstream ss(kv.at(k));
    for (std::string tok; std::getline(ss, tok, ',');) {
      tok = trim_ws(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("key '" + k + "': bad list entry '" + tok + "'");
      }
    }
    return out;
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : kv) j[k] = v;
    return j;
  }
};

// ---- outputs and manifest ----

std::string git_blob_sha1(const std::string& content) {
  std::string hdr = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, hdr.data(), hdr.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

class Run {
 public:
  Run(std::string command, const Config& cfg) : command_(std::move(command)), cfg_(cfg), dir_(cfg.str("out_dir")) {
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream(dir_ / name, std::ios::binary) << content;
    files_.push_back({{"path", name}, {"bytes", content.size()}, {"sha1", git_blob_sha1(content)}});
  }

  void finish(const std::vector<std::uint64_t>& seeds) {
    json m = {{"command", command_}, {"config", cfg_.to_json()}, {"seeds", seeds}, {"files", files_}};
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << "\n";
  }

  const fs::path& dir() const { return dir_; }

 private:
  std::string command_;
  const Config& cfg_;
  fs::path dir_;
  json files_ = json::array();
};

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

StepFunction initial_condition(const Config& c) {
  StepFunction f{c.list("ic_jumps"), c.list("ic_values")};
  try {
    f.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return f;
}

// ---- commands ----

int cmd_simulate_bd(const Config& c) {
  double delta = c.num("delta"), beta = c.num("beta");
  auto w = c.list("window");
  if (w.size() != 3) throw ConfigError("window must be T,site_lo,site_hi");
  long periodic = c.integer("periodic");
  std::uint64_t seed = static_cast<std::uint64_t>(c.integer("seed"));
  WebWindow win{0.0, w[0], static_cast<long>(w[1]), static_cast<long>(w[2])};
  if (periodic > 0) {
    win.site_lo = 0;
    win.site_hi = periodic - 1;
  }
  EventField f(delta, win, seed, periodic);
  HeightField h0{0.0, f.first_site(), std::vector<double>(static_cast<std::size_t>(f.site_count()), 0.0)};
  long frames = c.integer("frames");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  std::vector<double> snaps{0.0};
  for (long k = 1; k < frames; ++k) snaps.push_back(win.t1 * k / frames);
  auto out = simulate_beta_bd(f, beta, h0, snaps);

  Run run("simulate-bd", c);
  std::ostringstream hs, rs, ev;
  hs << "t,x,h\n";
  for (const auto& s : out)
    for (std::size_t i = 0; i < s.h.size(); ++i) hs << fmt(s.t) << "," << s.site_lo + static_cast<long>(i) << "," << fmt(s.h[i]) << "\n";
  run.write("heights.csv", hs.str());
  if (beta == 0) {
    rs << "t,x,h\n";
    for (const auto& raw : out) {
      auto s = rescale_height(raw, f, 0.0);
      for (std::size_t i = 0; i < s.h.size(); ++i)
        rs << fmt(s.t) << "," << fmt(delta * static_cast<double>(s.site_lo + static_cast<long>(i))) << "," << fmt(s.h[i]) << "\n";
    }
    run.write("heights_rescaled.csv", rs.str());
  }
  f.write_jsonl(ev);
  run.write("events.jsonl", ev.str());
  run.finish({seed});
  std::cout << "simulate-bd: " << out.size() << " frames, " << f.site_count() << " sites -> " << run.dir().string() << "\n";
  return 0;
}

std::vector<BCPoint> parse_points(const std::string& s) {
  std::vector<BCPoint> pts;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    auto colon = tok.find(':');
    if (colon == std::string::npos) throw ConfigError("points must be t:x entries");
    try {
      pts.push_back({std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
    } catch (const std::exception&) {
      throw ConfigError("bad point '" + tok + "'");
    }
  }
  return pts;
}

int cmd_simulate_bc(const Config& c) {
  BCQuery q;
  q.points = parse_points(c.str("points"));
  q.ic = initial_condition(c);
  if (q.points.empty()) throw ConfigError("no query points");
  long reps = c.str("replicas").empty() ? 1 : c.integer("replicas");
  if (reps < 0) throw ConfigError("replicas must be >= 0");
  SamplerConfig cfg;
  cfg.dt = c.num("dt");
  std::uint64_t seed = static_cast<std::uint64_t>(c.integer("seed"));
  unsigned workers = static_cast<unsigned>(c.integer("workers"));
  struct One {
    std::vector<double> h;
    json forest;
  };
  auto res = replicate<One>(static_cast<std::size_t>(reps), make_key({seed, 0x5BC}), workers, [&](Stream& s, std::size_t i) {
    auto F = sample_coalescing_forest(q, cfg, s);
    One o{evaluate_bc(F, q.ic, s), {}};
    if (i == 0) o.forest = F.to_json();
    return o;
  });
  Run run("simulate-bc", c);
  std::ostringstream vs;
  vs << "replica,t,x,h\n";
  for (std::size_t r = 0; r < res.size(); ++r)
    for (std::size_t k = 0; k < q.points.size(); ++k)
      vs << r << "," << fmt(q.points[k].t) << "," << fmt(q.points[k].x) << "," << fmt(res[r].h[k]) << "\n";
  run.write("bc_values.csv", vs.str());
  run.write("forest.json", (res.empty() ? json::object() : res[0].forest).dump() + "\n");
  run.finish({seed});
  std::cout << "simulate-bc: " << reps << " replicas -> " << run.dir().string() << "\n";
  return 0;
}

int cmd_slice(const Config& c) {
  SamplerConfig cfg;
  cfg.dt = c.num("dt");
  std::uint64_t seed = static_cast<std::uint64_t>(c.integer("seed"));
  Stream s(make_key({seed, 0x511CE}));
  auto sl = bc_slice(c.num("t"), c.num("R"), static_cast<int>(c.integer("n")), initial_condition(c), cfg, s);
  Run run("slice", c);
  std::ostringstream os;
  os << "x,h\n";
  for (std::size_t i = 0; i < sl.x.size(); ++i) os << fmt(sl.x[i]) << "," << fmt(sl.h[i]) << "\n";
  run.write("slice.csv", os.str());
  json st = {{"distinct_ancestors", sl.distinct_ancestors},
             {"variation_1", p_variation(sl.h, 1.0)},
             {"variation_1_5", p_variation(sl.h, 1.5)}};
  run.write("slice_summary.json", st.dump() + "\n");
  run.finish({seed});
  std::cout << "slice: " << sl.x.size() << " points, " << sl.distinct_ancestors << " ancestors -> " << run.dir().string() << "\n";
  return 0;
}

int cmd_convergence(const Config& c) {
  ConvergenceConfig cc;
  cc.deltas = c.list("deltas");
  cc.T = c.num("T");
  cc.x0 = c.num("x0");
  cc.x1 = c.num("x1");
  cc.replicas = c.str("replicas").empty() ? 10000 : static_cast<std::size_t>(c.integer("replicas"));
  cc.seed = static_cast<std::uint64_t>(c.integer("seed"));
  cc.workers = static_cast<unsigned>(c.integer("workers"));
  cc.ks_threshold = c.num("ks_threshold");
  cc.bc.dt = c.num("dt");
  auto r = convergence_experiment(cc);
  Run run("convergence", c);
  std::ostringstream cs;
  cs << "delta,ks,se,pvalue,enlarged\n";
  for (const auto& p : r.series)
    cs << fmt(p.delta) << "," << fmt(p.ks.stat) << "," << fmt(p.ks.se) << "," << fmt(p.ks.pvalue) << "," << p.enlargements << "\n";
  run.write("convergence.csv", cs.str());
  run.write("reports.jsonl", r.report.to_json().dump() + "\n");
  run.finish({cc.seed});
  for (const auto& p : r.series) std::printf("delta=%-6g KS=%.4f (se %.4f)\n", p.delta, p.ks.stat, p.ks.se);
  std::printf("%s convergence\n", r.report.pass ? "PASS" : "FAIL");
  return r.report.pass ? 0 : 1;
}

// Fast deterministic checks of the worked examples.
std::vector<std::pair<std::string, std::function<bool()>>> trivial_checks() {
  return {
      {"path tree distance", [] {
         auto t = FiniteRTree::path(2.0);
         return near(t.distance(t.node(0), t.node(1)), 2.0);
       }},
      {"trim drops short branch", [] {
         FiniteRTree t({-1, 0, 1, 1}, {0, 1.0, 1.0, 2.0});
         return endpoint_count(trim(t, 1.5).tree) == 1;
       }},
      {"heat kernel frozen value", [] { return std::abs(heat_kernel(1.0, 0.0).p - 0.3989422804014327) < 1e-15; }},
      {"two-point charfn at zero", [] { return two_point_charfn(0.0, 1.0) == 1.0; }},
      {"gibbs max rule example", [] { return gibbs_choice(kBetaInf, {2, 1, 1}, 0.5) == 2.0; }},
      {"gibbs beta zero uniform", [] { return std::abs(gibbs_probabilities(0.0, {2, 1, 1})[0] - 1.0 / 3) < 1e-15; }},
      {"beta infinity equals max rule", [] {
         EventField f(0.5, WebWindow{0, 1, -10, 10}, 3);
         HeightField h0{0, -10, std::vector<double>(21, 0.0)};
         return simulate_beta_bd(f, kBetaInf, h0).back().h == max_rule_reference(f, h0).h;
       }},
      {"event field deterministic", [] {
         std::ostringstream a, b;
         EventField(0.5, WebWindow{0, 1, -3, 3}, 9).write_jsonl(a);
         EventField(0.5, WebWindow{0, 1, -3, 3}, 9).write_jsonl(b);
         return a.str() == b.str();
       }},
      {"single point forest", [] {
         BCQuery q;
         q.points = {{1.0, 0.0}};
         Stream s(1, 0);
         auto F = sample_coalescing_forest(q, SamplerConfig{}, s);
         return F.roots.size() == 1;
       }},
      {"p-variation of one jump", [] {
         return std::abs(p_variation(std::vector<double>{1.0, 3.5}, 1.5) - std::pow(2.5, 1.5)) < 1e-12;
       }},
      {"identical samples KS", [] { return ks_two_sample({1, 2, 3}, {1, 2, 3}).stat == 0.0; }},
      {"identity distortion", [] {
         auto t = FiniteRTree::star({1.0, 1.0});
         auto z = SpatialTree::linear(t, 1, 0.0, {0, -1, 1}, 0.0);
         return distortion(identity_correspondence(t, 0.1), z, z) == 0.0;
       }},
  };
}

int cmd_verify(const Config& c, const std::string& suite) {
  static const std::set<std::string> suites{"trivial", "oracles", "bc", "web", "coupling", "convergence", "singularity", "all"};
  if (!suites.count(suite)) throw ConfigError("unknown suite '" + suite + "'");
  acceptance::Options o;
  o.seed = static_cast<std::uint64_t>(c.integer("seed"));
  o.workers = static_cast<unsigned>(c.integer("workers"));
  Run run("verify " + suite, c);
  std::ostringstream js;
  int failed = 0;
  if (suite == "trivial" || suite == "all") {
    for (const auto& [name, fn] : trivial_checks()) {
      bool ok = false;
      try {
        ok = fn();
      } catch (const std::exception&) {
      }
      std::printf("%s  %s\n", ok ? "PASS" : "FAIL", name.c_str());
      TestReport r;
      r.name = name;
      r.pass = ok;
      r.value = ok;
      r.threshold = 1;
      js << r.to_json().dump() << "\n";
      failed += !ok;
    }
  }
  if (suite != "trivial") {
    for (const auto& cr : acceptance::criteria()) {
      if (suite != "all" && cr.suite != suite) continue;
      auto r = acceptance::run_one(cr, o);
      std::cout << acceptance::format_line(r) << std::endl;
      auto j = r.report.to_json();
      j["criterion"] = cr.id;
      if (!r.error.empty()) j["error"] = r.error;
      js << j.dump() << "\n";
      failed += !r.report.pass;
    }
  }
  run.write("reports.jsonl", js.str());
  run.finish({o.seed});
  return failed ? 1 : 0;
}

// ---- export ----

std::string csv_field(const json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (v.is_number_float()) return fmt(v.get<double>());
  if (v.is_null()) return "";
  return v.dump();
}

std::vector<std::string> known_columns(const std::string& file) {
  if (file == "reports.jsonl") return {"name", "value", "threshold", "pass", "n", "se", "seeds", "extra"};
  if (file == "events.jsonl") return {"site", "t", "kind"};
  return {};
}

std::string jsonl_to_csv(const std::string& file, std::istream& in) {
  std::vector<json> rows;
  for (std::string line; std::getline(in, line);)
    if (!trim_ws(line).empty()) rows.push_back(json::parse(line));
  auto cols = known_columns(file);
  if (cols.empty())
    for (const auto& r : rows)
      for (const auto& [k, v] : r.items())
        if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::ostringstream os;
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << (r.contains(cols[i]) ? csv_field(r[cols[i]]) : "");
    os << "\n";
  }
  return os.str();
}

std::string csv_to_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return "";
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) cols.push_back(tok);
  }
  std::ostringstream os;
  while (std::getline(in, line)) {
    if (trim_ws(line).empty()) continue;
    std::stringstream ss(line);
    json row = json::object();
    std::size_t i = 0;
    for (std::string tok; std::getline(ss, tok, ',') && i < cols.size(); ++i) {
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (!tok.empty() && end && *end == '\0')
        row[cols[i]] = v;
      else
        row[cols[i]] = tok;
    }
    os << row.dump() << "\n";
  }
  return os.str();
}

int cmd_export(const Config& c) {
  const std::string format = c.str("format");
  if (format != "csv" && format != "jsonl") throw ConfigError("unknown export format '" + format + "'");
  fs::path in_dir = c.str("in_dir");
  if (in_dir.empty()) throw ConfigError("export needs in_dir");
  std::ifstream mf(in_dir / "manifest.json");
  if (!mf) throw ConfigError("no manifest in " + in_dir.string());
  json manifest = json::parse(mf);
  Run run("export " + format, c);
  int converted = 0;
  for (const auto& f : manifest["files"]) {
    fs::path p = f["path"].get<std::string>();
    std::ifstream in(in_dir / p);
    std::string stem = p.stem().string(), ext = p.extension().string();
    if (format == "csv" && ext == ".jsonl") {
      run.write(stem + ".csv", jsonl_to_csv(p.string(), in));
    } else if (format == "jsonl" && ext == ".csv") {
      run.write(stem + ".jsonl", csv_to_jsonl(in));
    } else if (ext == "." + format) {
      std::ostringstream ss;
      ss << in.rdbuf();
      run.write(p.string(), ss.str());
    } else {
      continue;
    }
    ++converted;
  }
  run.finish(manifest.value("seeds", std::vector<std::uint64_t>{}));
  std::cout << "export: " << converted << " files -> " << run.dir().string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brownian castle and ballistic deposition lab"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "flat key=value file");
  auto flag = [&](const char* name, const char* key, const char* help) {
    app.add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  flag("--seed", "seed", "base seed");
  flag("--workers", "workers", "worker threads");
  flag("--out-dir", "out_dir", "output directory");
  flag("--delta", "delta", "lattice spacing of the 0-BD");
  flag("--beta", "beta", "inverse temperature (number or inf)");
  flag("--window", "window", "T,site_lo,site_hi");
  flag("--periodic", "periodic", "periodic lattice with N sites");
  flag("--format", "format", "export format: csv or jsonl");
  flag("--in-dir", "in_dir", "artifact directory to export");
  app.add_option("--set", sets, "extra KEY=VALUE overrides");

  std::string suite;
  auto* bd = app.add_subcommand("simulate-bd", "simulate beta-BD on an event field");
  auto* bc = app.add_subcommand("simulate-bc", "sample the castle at query points");
  auto* sl = app.add_subcommand("slice", "castle slice on a grid");
  auto* vf = app.add_subcommand("verify", "run a verification suite");
  vf->add_option("suite", suite, "trivial|oracles|bc|web|coupling|convergence|singularity|all")->required();
  auto* cv = app.add_subcommand("convergence", "0-BD to castle convergence experiment");
  auto* ex = app.add_subcommand("export", "convert run artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Config cfg{defaults()};
    if (!config_file.empty()) read_config_file(config_file, cfg.kv);
    for (const auto& [k, v] : flags) set_key(cfg.kv, k, v);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE");
      set_key(cfg.kv, s.substr(0, eq), s.substr(eq + 1));
    }
    if (cfg.integer("workers") < 0) throw ConfigError("workers must be >= 0");
    if (cfg.integer("seed") < 0) throw ConfigError("seed must be >= 0");
    if (*bd) return cmd_simulate_bd(cfg);
    if (*bc) return cmd_simulate_bc(cfg);
    if (*sl) return cmd_slice(cfg);
    if (*vf) return cmd_verify(cfg, suite);
    if (*cv) return cmd_convergence(cfg);
    if (*ex) return cmd_export(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
