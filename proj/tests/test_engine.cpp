#include "doctest.h"
#include "oracles.hpp"

#include "divakit/engine.hpp"

#include <algorithm>
#include <filesystem>

using namespace divakit;
using engine::EngineConfig;

namespace {

EngineConfig quiet_config() {
  EngineConfig cfg;
  cfg.render_audio = false;
  cfg.deterministic = true;
  return cfg;
}

targets::SpeechTarget vowel(const char* name) { return *targets::find_builtin(name); }

}  // namespace

TEST_CASE("series lengths and audio length") {
  EngineConfig cfg;
  cfg.deterministic = true;
  const auto t = vowel("i");
  const auto tr = engine::simulate(t, control::reset_program(t, 5.0), cfg);
  CHECK(tr.frames() == 80);
  CHECK(tr.feedforward.rows() == 80);
  CHECK(tr.aud_error.rows() == 80);
  CHECK(tr.t_ms(79) == 395.0);
  CHECK(std::abs(static_cast<double>(tr.audio.size()) - 0.4 * cfg.fs) <= 0.005 * cfg.fs);
}

TEST_CASE("zero gains with identity taps run open loop") {
  auto cfg = quiet_config();
  cfg.control.g_aud = 0;
  cfg.control.g_som = 0;
  cfg.control.smoothing_taps = {1.0};
  const auto t = vowel("happy");
  const auto program = *control::pretrained_program(t);
  const auto tr = engine::simulate(t, program, cfg);
  CHECK(tr.motor == program.frames);
  CHECK(tr.corrective.isZero(0));
}

TEST_CASE("smoothing adds no lag to a constant program") {
  auto cfg = quiet_config();
  const auto t = vowel("e");
  auto program = control::reset_program(t, 5.0);
  const auto tr = engine::simulate(t, program, cfg);
  for (Eigen::Index n = 0; n < tr.frames(); ++n) {
    CHECK((tr.feedforward.row(n) - program.frames.row(n)).norm() < 1e-12);
  }
}

TEST_CASE("feedback arrives exactly one delay later") {
  for (int d : {1, 4, 15}) {
    auto cfg = quiet_config();
    cfg.aud_delay = d;
    cfg.som_delay = std::max(1, d - 2);
    const auto t = vowel("ae");
    const auto tr = engine::simulate(t, control::reset_program(t, 5.0), cfg);
    for (Eigen::Index n = 0; n + d < tr.frames(); ++n) {
      const Eigen::VectorXd consumed = tr.aud_error.row(n + d).transpose();
      const Eigen::VectorXd expect = control::region_error(tr.auditory.row(n).transpose(), t,
                                                           targets::kAuditoryDims, tr.t_ms(n));
      REQUIRE(consumed == expect);
      const int ds = cfg.som_delay;
      if (n + ds < tr.frames()) {
        const Eigen::VectorXd s_consumed = tr.som_error.row(n + ds).transpose();
        const Eigen::VectorXd s_expect = control::region_error(tr.somato.row(n).transpose(), t,
                                                               targets::kSomatoDims, tr.t_ms(n));
        REQUIRE(s_consumed == s_expect);
      }
    }
  }
}

TEST_CASE("delay lines start from the prediction of the first command") {
  auto cfg = quiet_config();
  const auto t = vowel("i");
  const auto p = control::reset_program(t, 5.0);
  const auto tr = engine::simulate(t, p, cfg);
  const auto first = tract::synth_sample(tract::ArticulatoryState(p.frames.row(0).transpose()),
                                         tract::default_basis());
  const Eigen::VectorXd expect =
      control::region_error(first.auditory.vector(), t, targets::kAuditoryDims, 0.0);
  for (Eigen::Index n = 0; n < cfg.aud_delay; ++n) CHECK(tr.aud_error.row(n).transpose() == expect);
}

TEST_CASE("deterministic runs are bitwise identical, stochastic audio follows the seed") {
  EngineConfig cfg;
  cfg.deterministic = true;
  const auto t = vowel("happy");
  const auto p = *control::pretrained_program(t);
  const auto a = engine::simulate(t, p, cfg);
  const auto b = engine::simulate(t, p, cfg);
  CHECK(a.motor == b.motor);
  CHECK(a.auditory == b.auditory);
  CHECK(a.audio == b.audio);

  cfg.deterministic = false;
  const auto s1 = engine::simulate(t, p, cfg);
  const auto s2 = engine::simulate(t, p, cfg);
  cfg.seed = 2;
  const auto s3 = engine::simulate(t, p, cfg);
  CHECK(s1.audio == s2.audio);
  CHECK(s1.audio != s3.audio);
}

TEST_CASE("zero iterations return the start program only") {
  const auto t = vowel("u");
  const auto prod = engine::produce_and_learn(t, 0, quiet_config());
  CHECK(prod.programs.size() == 1);
  CHECK(prod.traces.empty());
  CHECK_THROWS_AS(engine::produce_and_learn(t, -1, quiet_config()), ValidationError);
}

TEST_CASE("learning from reset removes most of the correction") {
  const auto t = vowel("e");
  const auto prod = engine::produce_and_learn(t, 20, quiet_config());
  REQUIRE(prod.traces.size() == 20);
  REQUIRE(prod.programs.size() == 21);
  const double first = engine::mean_corrective_norm(prod.traces.front());
  const double last = engine::mean_corrective_norm(prod.traces.back());
  CHECK(first > 0);
  CHECK(last <= 0.2 * first);
  CHECK(engine::auditory_inside_fraction(prod.traces[2], t) >= 0.9);
}

TEST_CASE("median correction does not grow over the first five iterations") {
  std::vector<std::vector<double>> norms(5);
  for (const char* name : {"i", "u", "e", "ae"}) {
    const auto prod = engine::produce_and_learn(vowel(name), 5, quiet_config());
    for (int i = 0; i < 5; ++i) norms[i].push_back(engine::mean_corrective_norm(prod.traces[i]));
  }
  for (int i = 1; i < 5; ++i) CHECK(testing::median(norms[i]) <= testing::median(norms[i - 1]));
}

TEST_CASE("a program with error-free production is a fixed point") {
  const auto t = vowel("u");
  const auto cfg = quiet_config();
  const auto warm = engine::produce_and_learn(t, 8, cfg);
  const auto& converged = warm.programs.back();
  const auto tr = engine::simulate(t, converged, cfg);
  REQUIRE(tr.aud_error.isZero(0));
  REQUIRE(tr.som_error.isZero(0));
  REQUIRE(tr.learning.isZero(0));
  const auto more = engine::produce_and_learn(t, 3, cfg, converged);
  for (const auto& p : more.programs) CHECK(p.frames == converged.frames);
  for (const auto& x : more.traces) CHECK(x.motor == tr.motor);
}

TEST_CASE("trace CSV round-trips every recorded series") {
  EngineConfig cfg;
  cfg.deterministic = true;
  const auto t = vowel("happy");
  const auto tr = engine::simulate(t, *control::pretrained_program(t), cfg);
  const auto path = std::filesystem::temp_directory_path() / "divakit_engine_roundtrip.trace.csv";
  engine::write_trace_csv(tr, path);
  const auto back = engine::read_trace_csv(path);
  CHECK(back.t_ms == tr.t_ms);
  CHECK(back.motor == tr.motor);
  CHECK(back.feedforward == tr.feedforward);
  CHECK(back.corrective == tr.corrective);
  CHECK(back.auditory == tr.auditory);
  CHECK(back.somato == tr.somato);
  CHECK(back.aud_error == tr.aud_error);
  CHECK(back.som_error == tr.som_error);
  std::filesystem::remove(path);
}

TEST_CASE("config hash tracks every engine setting") {
  EngineConfig a, b;
  CHECK(engine::config_hash(a) == engine::config_hash(b));
  b.control.g_aud = 0.9;
  CHECK(engine::config_hash(a) != engine::config_hash(b));
  b = a;
  b.deterministic = true;
  CHECK(engine::config_hash(a) != engine::config_hash(b));
}

TEST_CASE("bad configurations and mismatched programs are rejected") {
  const auto t = vowel("i");
  EngineConfig cfg;
  cfg.frame_ms = 3;
  CHECK_THROWS_AS(engine::simulate(t, control::reset_program(t, 3.0), cfg), ValidationError);
  cfg = {};
  cfg.aud_delay = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  const auto other = control::reset_program(vowel("happy"), 5.0);
  CHECK_THROWS_AS(engine::simulate(t, other, cfg), ValidationError);
}
