#include "divakit/cli.hpp"

#include "divakit/analysis.hpp"
#include "divakit/config.hpp"
#include "divakit/control.hpp"
#include "divakit/engine.hpp"
#include "divakit/targets.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace divakit::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Normalization ranges for the sensory groups of `compare`.
constexpr double kAuditoryRange = 5000.0;  // Hz, top of the formant band
constexpr double kSomatoRange = 1.0;
constexpr double kMotorRange = 2.0 * tract::kShapeLimit;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f%%", v);
  return buf;
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<fs::path> outputs;
  std::string started = utc_now();

  void write(const fs::path& path) {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    j["config_hash"] = hex64(config_hash);
    json outs = json::array();
    for (const auto& o : outputs) {
      if (!fs::exists(o)) throw IoError("manifest lists missing output '" + o.string() + "'");
      outs.push_back(o.generic_string());
    }
    j["outputs"] = outs;
    j["started"] = started;
    j["finished"] = utc_now();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
  }
};

struct Globals {
  std::uint64_t seed = 1;
  bool deterministic = false;
  std::string config;
  CLI::Option* seed_opt = nullptr;
};

config::RunConfig run_config(const Globals& g) {
  config::RunConfig rc;
  if (!g.config.empty()) rc = config::load_config(g.config);
  if (g.seed_opt != nullptr && g.seed_opt->count() > 0) rc.engine.seed = g.seed;
  if (g.deterministic) rc.engine.deterministic = true;
  rc.engine.validate();
  return rc;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
}

/// A readable file path, then `$DIVAKIT_DATA/targets/<ref>.target`, then a built-in.
targets::SpeechTarget resolve_target(const std::string& ref) {
  if (fs::is_regular_file(ref)) return targets::parse_target(read_text(ref));
  if (const auto dir = config::data_dir()) {
    const auto p = *dir / "targets" / (ref + ".target");
    if (fs::is_regular_file(p)) return targets::parse_target(read_text(p));
  }
  if (auto t = targets::find_builtin(ref)) return *t;
  std::string names;
  for (const auto& t : targets::builtin_targets()) names += (names.empty() ? "" : ", ") + t.name;
  throw ValidationError("unknown target '" + ref + "' (built-ins: " + names + ")");
}

std::optional<control::ForwardProgram> stored_program(const targets::SpeechTarget& t) {
  if (const auto dir = config::data_dir()) {
    const auto p = *dir / "programs" / (t.name + ".prog.csv");
    if (fs::is_regular_file(p)) {
      auto prog = control::load_program(p, t.name, t.frame_ms);
      if (prog.frame_count() == t.frame_count()) return prog;
    }
  }
  return control::pretrained_program(t);
}

std::string iter_tag(int i, int total) {
  const int width = std::max<int>(2, static_cast<int>(std::to_string(total).size()));
  std::ostringstream s;
  s << "iter" << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

targets::SpeechTarget target_from_wav(const fs::path& wav, double tolerance, std::optional<int> duration,
                                      const std::string& name, int frame_ms) {
  const auto wave = analysis::read_wav(wav);
  const auto track = analysis::extract_track(wave);
  int dur = 0;
  if (duration) {
    dur = *duration;
  } else {
    const double ms = 1000.0 * static_cast<double>(wave.samples.size()) / wave.fs;
    dur = static_cast<int>(std::floor(ms / frame_ms)) * frame_ms;
  }
  if (dur <= 0) throw ValidationError("'" + wav.string() + "' is shorter than one frame");
  return targets::target_from_formant_track(track, tolerance, dur, name, frame_ms);
}

// ---------------------------------------------------------------------------

int cmd_targets_list(std::ostream& out) {
  for (const auto& t : targets::builtin_targets()) {
    const bool trained = control::pretrained_program(t).has_value();
    out << std::left << std::setw(10) << t.name << std::right << std::setw(6) << t.duration_ms
        << " ms  " << (trained ? "pretrained" : "untrained") << '\n';
  }
  return kExitOk;
}

int cmd_targets_show(const std::string& ref, std::ostream& out) {
  out << targets::serialize_target(resolve_target(ref));
  return kExitOk;
}

struct ProduceArgs {
  std::string target;
  int iterations = 20;
  bool reset = false;
  std::string out_dir = "out";
  int repetitions = 1;
  CLI::Option* repetitions_opt = nullptr;
  bool no_audio = false;
};

/// Writes trace, audio, program and sidecar for each iteration into `dir`.
void write_production(const engine::Production& prod, const std::string& name, const fs::path& dir,
                      bool audio, std::vector<fs::path>& outputs) {
  fs::create_directories(dir);
  const int total = static_cast<int>(prod.traces.size());
  for (int i = 0; i < total; ++i) {
    const auto& tr = prod.traces[static_cast<std::size_t>(i)];
    const std::string stem = name + "_" + iter_tag(i + 1, total);
    const auto trace_path = dir / (stem + ".trace.csv");
    const auto prog_path = dir / (stem + ".prog.csv");
    const auto meta_path = dir / (stem + ".json");
    engine::write_trace_csv(tr, trace_path);
    control::save_program(prod.programs[static_cast<std::size_t>(i)], prog_path);
    engine::write_trace_metadata(tr, meta_path);
    outputs.insert(outputs.end(), {trace_path, prog_path, meta_path});
    if (audio) {
      const auto wav_path = dir / (stem + ".wav");
      analysis::write_wav(wav_path, tr.audio, tr.fs);
      outputs.push_back(wav_path);
    }
  }
  const auto final_path = dir / (name + "_final.prog.csv");
  control::save_program(prod.programs.back(), final_path);
  outputs.push_back(final_path);
}

int cmd_produce(const ProduceArgs& a, const Globals& g, const std::vector<std::string>& argv,
                std::ostream& out, std::ostream& err) {
  if (a.iterations < 0) throw ValidationError("--iterations must be >= 0");
  if (a.repetitions < 1) throw ValidationError("--repetitions must be >= 1");
  const auto rc = run_config(g);
  const auto target = resolve_target(a.target);
  auto cfg = rc.engine;
  cfg.render_audio = !a.no_audio;
  cfg.validate_for(target);
  const auto basis = config::resolve_basis(rc);

  std::optional<control::ForwardProgram> start;
  if (!a.reset) {
    start = stored_program(target);
    if (!start) err << "note: no pretrained program for '" << target.name << "'; starting from reset\n";
  }

  std::vector<engine::Production> runs(static_cast<std::size_t>(a.repetitions));
  std::vector<std::exception_ptr> failures(runs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r; (r = next++) < runs.size();) {
      try {
        auto c = cfg;
        c.seed = cfg.seed + r;
        runs[r] = engine::produce_and_learn(target, a.iterations, c, start, basis);
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(runs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  Manifest m;
  m.command = "produce";
  m.args = argv;
  m.seed = cfg.seed;
  m.config_hash = engine::config_hash(cfg);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::ostringstream sub;
    sub << "rep" << std::setw(2) << std::setfill('0') << r + 1;
    write_production(runs[r], target.name, runs.size() == 1 ? dir : dir / sub.str(), cfg.render_audio, m.outputs);
  }

  if (a.repetitions_opt != nullptr && a.repetitions_opt->count() > 0) {
    const auto path = dir / "rmse_by_iteration.csv";
    std::ofstream csv(path, std::ios::binary);
    if (!csv) throw IoError("cannot write '" + path.string() + "'");
    csv << "repetition,iteration,rmse_percent\n";
    char buf[64];
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& traces = runs[r].traces;
      if (traces.empty()) continue;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const double v = analysis::normalized_rmse(traces[i].motor, traces.back().motor, kMotorRange);
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", r + 1, i + 1, v);
        csv << buf;
      }
    }
    csv.close();
    m.outputs.push_back(path);
  }

  for (std::size_t i = 0; i < runs.front().traces.size(); ++i) {
    const auto& tr = runs.front().traces[i];
    out << target.name << ' ' << iter_tag(static_cast<int>(i + 1), a.iterations) << "  corrective "
        << std::fixed << std::setprecision(4) << engine::mean_corrective_norm(tr) << "  inside "
        << std::setprecision(1) << 100.0 * engine::auditory_inside_fraction(tr, target) << "%\n";
  }
  out.unsetf(std::ios::floatfield);
  m.write(dir / "manifest.json");
  return kExitOk;
}

struct MakeTargetArgs {
  std::string formants;
  std::string from_wav;
  double tolerance = 0.05;
  std::optional<int> duration;
  std::string out;
  std::string name;
};

int cmd_make_target(const MakeTargetArgs& a, const Globals& g, const std::vector<std::string>& argv,
                    std::ostream& out) {
  if (a.formants.empty() == a.from_wav.empty()) {
    throw ValidationError("make-target needs exactly one of --formants or --from-wav");
  }
  if (!(a.tolerance >= 0)) throw ValidationError("--tolerance must be >= 0");
  const auto rc = run_config(g);
  const int frame = static_cast<int>(rc.engine.frame_ms);
  const std::string name = a.name.empty() ? fs::path(a.out).stem().string() : a.name;

  targets::SpeechTarget t;
  if (!a.formants.empty()) {
    std::vector<double> v;
    std::string_view rest = a.formants;
    while (true) {
      const auto comma = rest.find(',');
      const std::string cell(rest.substr(0, comma));
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("bad formant string '" + a.formants + "': expected \"f0,f1,f2,f3\"");
      }
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (v.size() != 4) throw ValidationError("bad formant string '" + a.formants + "': expected 4 values");
    const int dur = a.duration.value_or(500);
    targets::FormantTrack track{{0.0, static_cast<double>(dur)}, {v[0], v[0]}, {v[1], v[1]}, {v[2], v[2]}, {v[3], v[3]}};
    t = targets::target_from_formant_track(track, a.tolerance, dur, name, frame);
  } else {
    t = target_from_wav(a.from_wav, a.tolerance, a.duration, name, frame);
  }
  write_text(a.out, targets::serialize_target(t));
  Manifest m;
  m.command = "make-target";
  m.args = argv;
  m.seed = rc.engine.seed;
  m.config_hash = engine::config_hash(rc.engine);
  m.outputs.push_back(a.out);
  m.write(fs::path(a.out + ".manifest.json"));
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

struct MimicArgs {
  std::string wav;
  int iterations = 4;
  double tolerance = 0.1;
  std::string out_dir = ".";
};

int cmd_mimic(const MimicArgs& a, const Globals& g, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.iterations < 0) throw ValidationError("--iterations must be >= 0");
  const auto rc = run_config(g);
  const auto cfg = rc.engine;
  const auto basis = config::resolve_basis(rc);
  const std::string stem = fs::path(a.wav).stem().string();
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);

  const auto target = target_from_wav(a.wav, a.tolerance, std::nullopt, stem, static_cast<int>(cfg.frame_ms));
  cfg.validate_for(target);
  auto prod = engine::produce_and_learn(target, a.iterations, cfg, std::nullopt, basis);
  engine::Trace final = engine::simulate(target, prod.programs.back(), cfg, basis);
  final.iteration = a.iterations + 1;
  prod.traces.push_back(std::move(final));

  Manifest m;
  m.command = "mimic";
  m.args = argv;
  m.seed = cfg.seed;
  m.config_hash = engine::config_hash(cfg);

  const auto target_path = dir / (stem + ".target");
  write_text(target_path, targets::serialize_target(target));
  const auto wav_path = dir / (stem + "_mimic.wav");
  analysis::write_wav(wav_path, prod.traces.back().audio, prod.traces.back().fs);
  const auto trace_path = dir / (stem + "_mimic.trace.csv");
  engine::write_trace_csv(prod.traces.back(), trace_path);

  const auto csv_path = dir / (stem + "_mimic_errors.csv");
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot write '" + csv_path.string() + "'");
    csv << "production,learned,mean_corrective_norm,inside_fraction,mean_abs_eF0,mean_abs_eF1,mean_abs_eF2,mean_abs_eF3\n";
    char buf[256];
    for (std::size_t i = 0; i < prod.traces.size(); ++i) {
      const auto& tr = prod.traces[i];
      const Eigen::RowVector4d e = tr.aud_error.cwiseAbs().colwise().mean();
      std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i + 1,
                    i < static_cast<std::size_t>(a.iterations) ? 1 : 0, engine::mean_corrective_norm(tr),
                    engine::auditory_inside_fraction(tr, target), e(0), e(1), e(2), e(3));
      csv << buf;
    }
  }
  m.outputs = {target_path, wav_path, trace_path, csv_path};
  m.write(dir / (stem + "_mimic.manifest.json"));
  out << "productions " << prod.traces.size() << ", saved " << wav_path.string() << '\n';
  return kExitOk;
}

struct CompareArgs {
  std::string a, b;
  double range = kMotorRange;
};

void compare_traces(const fs::path& pa, const fs::path& pb, double range, const std::string& label,
                    std::ostream& out) {
  const auto ta = engine::read_trace_csv(pa);
  const auto tb = engine::read_trace_csv(pb);
  if (ta.frames() != tb.frames()) {
    throw ValidationError("trace shapes differ: " + std::to_string(ta.frames()) + " vs " +
                          std::to_string(tb.frames()) + " frames");
  }
  const auto n = ta.frames();
  Eigen::MatrixXd all_a(n, 3 * kMotorDims), all_b(n, 3 * kMotorDims);
  all_a << ta.motor, ta.feedforward, ta.corrective;
  all_b << tb.motor, tb.feedforward, tb.corrective;
  out << label << "  motor " << percent(analysis::normalized_rmse(ta.motor, tb.motor, range))
      << "  feedforward " << percent(analysis::normalized_rmse(ta.feedforward, tb.feedforward, range))
      << "  corrective " << percent(analysis::normalized_rmse(ta.corrective, tb.corrective, range))
      << "  auditory " << percent(analysis::normalized_rmse(ta.auditory, tb.auditory, kAuditoryRange))
      << "  somatosensory " << percent(analysis::normalized_rmse(ta.somato, tb.somato, kSomatoRange))
      << "  overall " << percent(analysis::normalized_rmse(all_a, all_b, range)) << '\n';
}

void compare_wavs(const fs::path& pa, const fs::path& pb, const std::string& label, std::ostream& out) {
  const auto wa = analysis::read_wav(pa);
  const auto wb = analysis::read_wav(pb);
  if (wa.fs != wb.fs || wa.samples.size() != wb.samples.size()) {
    throw ValidationError("audio shapes differ: " + std::to_string(wa.samples.size()) + " vs " +
                          std::to_string(wb.samples.size()) + " samples");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", analysis::max_abs_diff(wa.samples, wb.samples));
  out << label << "  max_abs_diff " << buf << '\n';
}

bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void compare_file(const fs::path& pa, const fs::path& pb, double range, const std::string& label,
                  std::ostream& out) {
  if (has_suffix(pa.string(), ".wav")) {
    compare_wavs(pa, pb, label, out);
  } else {
    compare_traces(pa, pb, range, label, out);
  }
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (!(a.range > 0)) throw ValidationError("--range must be > 0");
  if (fs::is_directory(a.a) != fs::is_directory(a.b)) {
    throw ValidationError("compare needs two files or two directories");
  }
  if (!fs::is_directory(a.a)) {
    compare_file(a.a, a.b, a.range, fs::path(a.a).filename().string(), out);
    return kExitOk;
  }
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a.a)) {
    const auto rel = fs::relative(e.path(), a.a).generic_string();
    if (e.is_regular_file() && (has_suffix(rel, ".trace.csv") || has_suffix(rel, ".wav"))) names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ValidationError("no traces or audio under '" + a.a + "'");
  for (const auto& rel : names) {
    const auto other = fs::path(a.b) / rel;
    if (!fs::exists(other)) throw ValidationError("'" + rel + "' has no counterpart under '" + a.b + "'");
    compare_file(fs::path(a.a) / rel, other, a.range, rel, out);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"divakit: feedforward/feedback speech motor control engine"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "RNG seed (default 1)");
  app.add_flag("--deterministic", g.deterministic, "pin every random channel to its constant");
  app.add_option("--config", g.config, "key = value engine configuration file");

  auto* targets_cmd = app.add_subcommand("targets", "list or show targets");
  targets_cmd->require_subcommand(1);
  auto* list_cmd = targets_cmd->add_subcommand("list", "list the built-in targets");
  std::string show_ref;
  auto* show_cmd = targets_cmd->add_subcommand("show", "print a target in canonical form");
  show_cmd->add_option("target", show_ref, "built-in name or target file")->required();

  ProduceArgs pa;
  auto* produce_cmd = app.add_subcommand("produce", "produce a target and learn its program");
  produce_cmd->add_option("target", pa.target, "built-in name or target file")->required();
  produce_cmd->add_option("--iterations", pa.iterations, "learning iterations (default 20)");
  produce_cmd->add_flag("--reset", pa.reset, "start from the neutral reset program");
  produce_cmd->add_option("--out", pa.out_dir, "output directory (default out)");
  pa.repetitions_opt =
      produce_cmd->add_option("--repetitions", pa.repetitions, "independent runs; also writes rmse_by_iteration.csv");
  produce_cmd->add_flag("--no-audio", pa.no_audio, "skip audio rendering");

  MakeTargetArgs ma;
  auto* make_cmd = app.add_subcommand("make-target", "build a target from formants or a recording");
  auto* f_opt = make_cmd->add_option("--formants", ma.formants, "\"f0,f1,f2,f3\" in Hz");
  auto* w_opt = make_cmd->add_option("--from-wav", ma.from_wav, "16-bit PCM recording");
  f_opt->excludes(w_opt);
  make_cmd->add_option("--tolerance", ma.tolerance, "relative window half-width (default 0.05)");
  make_cmd->add_option("--duration", ma.duration, "target duration in ms");
  make_cmd->add_option("--out", ma.out, "output .target path")->required();
  make_cmd->add_option("--name", ma.name, "target name (default: output file stem)");

  MimicArgs mi;
  auto* mimic_cmd = app.add_subcommand("mimic", "learn to imitate a sustained recording");
  mimic_cmd->add_option("--wav", mi.wav, "recording to imitate")->required();
  mimic_cmd->add_option("--iterations", mi.iterations, "learning iterations before the saved production (default 4)");
  mimic_cmd->add_option("--tolerance", mi.tolerance, "relative window half-width (default 0.1)");
  mimic_cmd->add_option("--out", mi.out_dir, "output directory (default .)");

  CompareArgs ca;
  auto* compare_cmd = app.add_subcommand("compare", "normalized RMSE between traces, or audio difference");
  compare_cmd->add_option("a", ca.a, "trace, wav or directory")->required();
  compare_cmd->add_option("b", ca.b, "trace, wav or directory")->required();
  compare_cmd->add_option("--range", ca.range, "maximum possible amplitude (default 6.0)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (list_cmd->parsed()) return cmd_targets_list(out);
    if (show_cmd->parsed()) return cmd_targets_show(show_ref, out);
    if (produce_cmd->parsed()) return cmd_produce(pa, g, args, out, err);
    if (make_cmd->parsed()) return cmd_make_target(ma, g, args, out);
    if (mimic_cmd->parsed()) return cmd_mimic(mi, g, args, out);
    if (compare_cmd->parsed()) return cmd_compare(ca, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace divakit::cli
