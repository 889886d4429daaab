#include "fairsignal/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "fairsignal/agent.hpp"
#include "fairsignal/checkpoint.hpp"
#include "fairsignal/config.hpp"
#include "fairsignal/eval.hpp"

namespace fairsignal::cli {

namespace fs = std::filesystem;

namespace {

class CliUsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kEnvConfig = "FAIRSIGNAL_CONFIG";
constexpr const char* kEnvSeed = "FAIRSIGNAL_SEED";
constexpr const char* kEnvSteps = "FAIRSIGNAL_STEPS";
constexpr const char* kEnvBeta = "FAIRSIGNAL_BETA";
constexpr const char* kEnvOut = "FAIRSIGNAL_OUT";

std::optional<std::string> env_value(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

template <typename T>
T parse_env_number(const char* name, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (!in || !in.eof()) throw ConfigError(fmt::format("{}='{}' is not a valid number", name, text));
  return value;
}

struct Resolved {
  RunConfig config;
  std::optional<std::string> config_path;
  fs::path out_dir;
};

// flags > environment > config file > defaults
Resolved resolve(const CommonOptions& options) {
  Resolved r;
  r.config_path = options.config_path ? options.config_path : env_value(kEnvConfig);
  if (r.config_path) {
    if (!fs::exists(*r.config_path)) {
      throw ConfigError(fmt::format("config file '{}' does not exist", *r.config_path));
    }
    r.config = load_config(*r.config_path);
  }
  if (options.seed) {
    r.config.seed = *options.seed;
  } else if (auto v = env_value(kEnvSeed)) {
    r.config.seed = parse_env_number<std::uint64_t>(kEnvSeed, *v);
  }
  if (options.steps) {
    r.config.train.total_steps = *options.steps;
  } else if (auto v = env_value(kEnvSteps)) {
    r.config.train.total_steps = parse_env_number<std::int64_t>(kEnvSteps, *v);
  }
  if (options.beta) {
    r.config.env.beta = *options.beta;
  } else if (auto v = env_value(kEnvBeta)) {
    r.config.env.beta = parse_env_number<double>(kEnvBeta, *v);
  }
  std::optional<std::string> out = options.out_dir ? options.out_dir : env_value(kEnvOut);
  if (!out) throw CliUsageError(fmt::format("no output directory: pass --out or set {}", kEnvOut));
  r.out_dir = *out;
  r.config.validate();
  return r;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, const std::string& bytes) {
    files_.emplace(name, bytes);
  }

  // Writes every file plus manifest.json; nothing is written until all
  // outputs have been produced in memory.
  nlohmann::json commit(nlohmann::json manifest) {
    prepare_out_dir(dir_);
    nlohmann::json artifacts = nlohmann::json::object();
    for (const auto& [name, bytes] : files_) {
      const fs::path path = dir_ / name;
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
      artifacts[name] = sha256_hex(bytes);
    }
    manifest["artifacts"] = artifacts;
    const std::string text = manifest.dump(2) + "\n";
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("failed writing manifest.json");
    return manifest;
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> files_;
};

nlohmann::json base_manifest(const std::string& command, const Resolved& r) {
  nlohmann::json m;
  m["format_version"] = 1;
  m["command"] = command;
  m["config_path"] = r.config_path ? nlohmann::json(*r.config_path) : nlohmann::json(nullptr);
  m["config"] = config_to_json(r.config);
  m["seed"] = r.config.seed;
  m["out_dir"] = r.out_dir.string();
  return m;
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

void add_eval_outputs(OutputSet& outputs, const EvalReport& report) {
  outputs.add("samples.csv", render([&](std::ostream& o) { write_samples_csv(o, report); }));
  outputs.add("summary.csv",
              render([&](std::ostream& o) { write_summary_csv(o, summarize(report)); }));
  outputs.add("report.json", report_to_json(report).dump(2) + "\n");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path));
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

nlohmann::json cmd_train(const CommonOptions& options, std::ostream& log) {
  const Stopwatch clock;
  const Resolved r = resolve(options);
  const RunConfig& cfg = r.config;
  prepare_out_dir(r.out_dir);

  auto factory = [&cfg] { return TrafficEnv(cfg.sim, cfg.env, FlowProfile::named(FlowLevel::Light)); };
  const std::string divergence_path = (r.out_dir / "checkpoint.diverged.bin").string();
  const TrainResult result = train(factory, cfg.train, cfg.seed, divergence_path);

  OutputSet outputs(r.out_dir);
  outputs.add("checkpoint.bin",
              render([&](std::ostream& o) { write_checkpoint(o, result.params); }));
  outputs.add("train_log.csv", render([&](std::ostream& o) { write_train_log_csv(o, result.log); }));
  nlohmann::json manifest = base_manifest("train", r);
  manifest["beta"] = cfg.env.beta;
  manifest["total_steps"] = cfg.train.total_steps;
  manifest = outputs.commit(std::move(manifest));
  log << fmt::format("train: {} steps in {:.1f} s -> {}\n", cfg.train.total_steps, clock.seconds(),
                     r.out_dir.string());
  return manifest;
}

nlohmann::json cmd_eval(const EvalOptions& options, std::ostream& log) {
  const Stopwatch clock;
  if (options.baseline == options.checkpoint.has_value()) {
    throw CliUsageError("eval needs exactly one of --checkpoint or --baseline");
  }
  const Resolved r = resolve(options.common);

  Controller controller = FixedTimePolicy{FixedTimeController(r.config.baseline_schedules)};
  if (options.checkpoint) {
    controller = AgentPolicy{load_checkpoint(*options.checkpoint), "agent", r.config.env.beta};
  }
  const EvalReport report = run_eval(controller, r.config.seed, r.config.eval_config());

  OutputSet outputs(r.out_dir);
  add_eval_outputs(outputs, report);
  nlohmann::json manifest = base_manifest("eval", r);
  manifest["controller"] = report.controller_id;
  manifest["checkpoint"] = options.checkpoint ? nlohmann::json(*options.checkpoint)
                                              : nlohmann::json(nullptr);
  if (options.checkpoint) manifest["checkpoint_sha256"] = sha256_file(*options.checkpoint);
  manifest = outputs.commit(std::move(manifest));
  log << fmt::format("eval: {} in {:.1f} s -> {}\n", report.controller_id, clock.seconds(),
                     r.out_dir.string());
  return manifest;
}

nlohmann::json cmd_pareto(const ParetoOptions& options, std::ostream& log) {
  const Stopwatch clock;
  if (options.agents.size() < 2) {
    throw CliUsageError("pareto needs at least two --agent BETA=CHECKPOINT entries");
  }
  const Resolved r = resolve(options.common);

  std::map<double, MlpParams> agents;
  nlohmann::json sources = nlohmann::json::array();
  for (const std::string& entry : options.agents) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw CliUsageError(fmt::format("--agent '{}' is not of the form BETA=CHECKPOINT", entry));
    }
    double beta = 0.0;
    try {
      std::size_t used = 0;
      beta = std::stod(entry.substr(0, eq), &used);
      if (used != eq) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw CliUsageError(fmt::format("--agent '{}' has an invalid beta", entry));
    }
    const std::string path = entry.substr(eq + 1);
    if (agents.contains(beta)) throw CliUsageError(fmt::format("beta {} given twice", beta));

    const fs::path sibling = fs::path(path).parent_path() / "manifest.json";
    if (fs::exists(sibling)) {
      try {
        std::ifstream in(sibling);
        const auto m = nlohmann::json::parse(in);
        if (m.contains("beta") && m["beta"].is_number() && m["beta"].get<double>() != beta) {
          log << fmt::format("warning: {} records beta {} but --agent says {}; using {}\n",
                             sibling.string(), m["beta"].get<double>(), beta, beta);
        }
      } catch (const nlohmann::json::exception&) {
        log << fmt::format("warning: could not parse {}\n", sibling.string());
      }
    }
    agents.emplace(beta, load_checkpoint(path));
    sources.push_back({{"beta", beta}, {"checkpoint", path}, {"sha256", sha256_file(path)}});
  }

  const auto points = pareto_sweep(agents, r.config.seed, r.config.eval_config());

  OutputSet outputs(r.out_dir);
  outputs.add("pareto.csv", render([&](std::ostream& o) { write_pareto_csv(o, points); }));
  outputs.add("pareto.dat", render([&](std::ostream& o) { write_pareto_plot_data(o, points); }));
  nlohmann::json manifest = base_manifest("pareto", r);
  manifest["agents"] = sources;
  manifest = outputs.commit(std::move(manifest));
  log << fmt::format("pareto: {} agents in {:.1f} s -> {}\n", points.size(), clock.seconds(),
                     r.out_dir.string());
  return manifest;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-aware traffic signal control: train, evaluate, compare"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config_path, "flat JSON config file (env FAIRSIGNAL_CONFIG)");
    sub->add_option("--seed", o.seed, "random seed (env FAIRSIGNAL_SEED)");
    sub->add_option("--steps", o.steps, "training agent steps (env FAIRSIGNAL_STEPS)");
    sub->add_option("--beta", o.beta, "fairness coefficient in [0,1] (env FAIRSIGNAL_BETA)");
    sub->add_option("--out", o.out_dir, "output directory (env FAIRSIGNAL_OUT)");
  };

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a DDQN agent");
  add_common(train_cmd, train_opts);

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate an agent or the fixed-time baseline");
  add_common(eval_cmd, eval_opts.common);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "trained checkpoint");
  eval_cmd->add_flag("--baseline", eval_opts.baseline, "level-adaptive fixed-time baseline");

  ParetoOptions pareto_opts;
  auto* pareto_cmd = app.add_subcommand("pareto", "evaluate several agents and flag dominance");
  add_common(pareto_cmd, pareto_opts.common);
  pareto_cmd->add_option("--agent", pareto_opts.agents, "BETA=CHECKPOINT, repeat per agent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) cmd_train(train_opts, err);
    if (eval_cmd->parsed()) cmd_eval(eval_opts, err);
    if (pareto_cmd->parsed()) cmd_pareto(pareto_opts, err);
  } catch (const CliUsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fairsignal::cli
