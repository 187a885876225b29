#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "advoice/error.hpp"
#include "advoice/experiment.hpp"

using namespace advoice;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "advoice_experiment_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One small corpus and one trained system pair shared across the cases below;
// building them dominates the cost of every individual check.
struct Fixture {
  corpus::Corpus c;
  eval::Preset preset;
  eval::SystemSet systems;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    corpus::BuildConfig bc;
    bc.n_speakers = 10;
    bc.utts_per_speaker = 6;
    bc.duration_s = 1.0;
    bc.seed = 77;
    x.c = corpus::build_corpus(bc, temp_dir("mini_corpus"));
    x.preset = eval::make_preset("whitebox-grid", 77);
    x.systems.shadow = eval::train_system(x.c.shadow, x.c.root, x.preset.shadow_cfg);
    x.systems.target = eval::train_system(x.c.target, x.c.root, x.preset.target_cfg);
    eval::enroll_all(x.systems.shadow, x.c);
    eval::enroll_all(x.systems.target, x.c);
    return x;
  }();
  return f;
}

models::Verdict judge(const eval::System& s, const signal::Waveform& w, const std::string& id) {
  return models::decide(s.asv, s.cm, s.store, id, w);
}

}  // namespace

TEST_CASE("enrollment map picks each speaker's first bonafide") {
  const auto& f = fixture();
  const auto m = eval::enrollment_map(f.c);
  CHECK(m.size() == 10);
  for (const auto& [spk, entry] : m) {
    CHECK(entry.speaker_id == spk);
    CHECK(entry.label == corpus::Label::kBonafide);
    CHECK(entry.utterance_id == spk + "-b0");
  }
}

TEST_CASE("a speaker's own enrollment audio counts as an accepted attack") {
  const auto& f = fixture();
  // The embedding of the enrollment utterance matches the stored voiceprint
  // exactly, so the ASV must accept; pick a speaker whose (genuine) take the
  // CM also passes, then the joint verdict is an accept by construction.
  const auto m = eval::enrollment_map(f.c);
  bool tested = false;
  for (const auto& [spk, entry] : m) {
    const auto w = corpus::load_entry(f.c.root, entry);
    const auto v = judge(f.systems.shadow, w, spk);
    CHECK(v.asv_accept);  // self-match holds for every speaker
    if (!v.cm_accept) continue;
    const double rate = eval::attack_success_rate({{w, spk}}, f.systems.shadow);
    CHECK(rate == 1.0);
    tested = true;
    break;
  }
  CHECK(tested);
}

TEST_CASE("attack success rate matches a manual verdict count on a batch of 4") {
  const auto& f = fixture();
  std::vector<eval::AdversarialTrial> batch;
  const auto trials = eval::make_trials(f.c, 4, 9);
  for (const auto& t : trials) batch.push_back({t.spoof, t.claimed_speaker});
  REQUIRE(batch.size() == 4);

  int manual = 0;
  for (const auto& b : batch) {
    manual += judge(f.systems.target, b.audio, b.claimed_speaker).joint_accept();
  }
  CHECK(eval::attack_success_rate(batch, f.systems.target) ==
        doctest::Approx(manual / 4.0).epsilon(1e-12));
}

TEST_CASE("an all-rejected batch scores zero") {
  const auto& f = fixture();
  // Collect utterances the joint system demonstrably rejects, then confirm
  // the metric reports exactly zero on that batch.
  std::vector<eval::AdversarialTrial> rejected;
  for (const auto& t : eval::make_trials(f.c, 40, 3)) {
    if (!judge(f.systems.target, t.spoof, t.claimed_speaker).joint_accept()) {
      rejected.push_back({t.spoof, t.claimed_speaker});
    }
    if (rejected.size() == 4) break;
  }
  REQUIRE(rejected.size() == 4);
  CHECK(eval::attack_success_rate(rejected, f.systems.target) == 0.0);
}

TEST_CASE("attack success rate rejects empty batches and unknown speakers") {
  const auto& f = fixture();
  CHECK_THROWS_AS(eval::attack_success_rate({}, f.systems.shadow), ConfigError);
  const auto trials = eval::make_trials(f.c, 1, 1);
  CHECK_THROWS_AS(eval::attack_success_rate({{trials[0].spoof, "nobody"}}, f.systems.shadow),
                  ConfigError);
}

TEST_CASE("joint acceptance never exceeds either single-system acceptance") {
  const auto& f = fixture();
  int asv = 0, cm = 0, joint = 0;
  const auto trials = eval::make_trials(f.c, 30, 5);
  for (const auto& t : trials) {
    const auto v = judge(f.systems.target, t.spoof, t.claimed_speaker);
    asv += v.asv_accept;
    cm += v.cm_accept;
    joint += v.joint_accept();
  }
  CHECK(joint <= asv);
  CHECK(joint <= cm);
}

TEST_CASE("make_trials is deterministic, capped, and references exclude enrollment") {
  const auto& f = fixture();
  const auto a = eval::make_trials(f.c, 7, 42);
  const auto b = eval::make_trials(f.c, 7, 42);
  REQUIRE(a.size() == 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].utterance_id == b[i].utterance_id);
    CHECK(a[i].reference.samples == b[i].reference.samples);
  }
  // 10 speakers x 6 utterances -> 60 spoof entries in total.
  CHECK(eval::make_trials(f.c, 1000, 42).size() == 60);

  // Every reference must be one of the claimed speaker's bonafide takes other
  // than the enrollment utterance.
  std::map<std::string, std::vector<corpus::ManifestEntry>> candidates;
  for (const auto* m : {&f.c.shadow, &f.c.target, &f.c.eval}) {
    for (const auto& e : m->entries) {
      if (e.label == corpus::Label::kBonafide && e.utterance_id != e.speaker_id + "-b0") {
        candidates[e.speaker_id].push_back(e);
      }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    bool found = false;
    for (const auto& e : candidates.at(a[i].claimed_speaker)) {
      if (corpus::load_entry(f.c.root, e).samples == a[i].reference.samples) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("experiment spec validation rejects malformed grids") {
  eval::ExperimentSpec s;
  s.shadow_id = "elsewhere";
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.epsilons = {};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.epsilons = {0.001, 0.003};  // no baseline column
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.epsilons = {0.0, -0.001};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.sample_count = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.step_fraction = 1.5;  // alpha would exceed epsilon
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.codec_aware = true;  // channel missing
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("an epsilon grid of {0} reports the plain baseline without attacking") {
  const auto& f = fixture();
  eval::ExperimentSpec s;
  s.shadow_id = s.target_id = "target";
  s.method = attacks::Method::kAdvJoint;
  s.epsilons = {0.0};
  s.sample_count = 12;
  s.seed = 11;
  s.attack.iterations = 0;  // invalid for any attack: proves none is invoked
  const auto r = eval::run_experiment(s, f.c, f.systems);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.rows[0].rates.size() == 1);

  std::vector<eval::AdversarialTrial> batch;
  for (const auto& t : eval::make_trials(f.c, 12, 11)) {
    batch.push_back({t.spoof, t.claimed_speaker});
  }
  CHECK(r.rows[0].rates[0] ==
        doctest::Approx(eval::attack_success_rate(batch, f.systems.target)).epsilon(1e-12));
}

TEST_CASE("white-box countermeasure attack flips the shadow CM on a small batch") {
  const auto& f = fixture();
  eval::ExperimentSpec s;
  s.shadow_id = s.target_id = "shadow";
  s.method = attacks::Method::kAdvCm;
  s.epsilons = {0.0, 0.003};
  s.sample_count = 10;
  s.seed = 21;
  s.attack.iterations = 40;
  s.attack.early_stop = true;
  const auto r = eval::run_experiment(s, f.c, f.systems);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].rates[1] >= 0.9);
  CHECK(r.rows[0].rates[1] >= r.rows[0].rates[0]);
}

TEST_CASE("run_experiment is reproducible and report files ignore runtime") {
  const auto& f = fixture();
  eval::ExperimentSpec s;
  s.shadow_id = s.target_id = "shadow";
  s.method = attacks::Method::kAdvCm;
  s.epsilons = {0.0, 0.003};
  s.sample_count = 6;
  s.seed = 33;
  s.attack.iterations = 25;
  s.attack.early_stop = true;
  auto r1 = eval::run_experiment(s, f.c, f.systems);
  auto r2 = eval::run_experiment(s, f.c, f.systems);
  REQUIRE(r1.rows.size() == r2.rows.size());
  CHECK(r1.rows[0].rates == r2.rows[0].rates);  // bit-exact under a fixed seed

  const auto dir = temp_dir("repro_reports");
  r1.runtime_s = 1.0;
  r2.runtime_s = 2.0;  // wall-clock noise must never reach the files
  eval::emit_report(r1, dir / "a.csv", dir / "a.json");
  eval::emit_report(r2, dir / "b.csv", dir / "b.json");
  CHECK(read_bytes(dir / "a.csv") == read_bytes(dir / "b.csv"));
  CHECK(read_bytes(dir / "a.json") == read_bytes(dir / "b.json"));
}

TEST_CASE("judging through the telephony channel stays deterministic") {
  const auto& f = fixture();
  eval::ExperimentSpec s;
  s.shadow_id = "shadow";
  s.target_id = "target";
  s.method = attacks::Method::kAdvCm;
  s.epsilons = {0.0, 0.003};
  s.sample_count = 5;
  s.seed = 13;
  s.attack.iterations = 20;
  channel::ChannelConfig ch;
  ch.loss_rate = 0.05;
  ch.redundancy = true;
  s.channel = ch;
  const auto r1 = eval::run_experiment(s, f.c, f.systems);
  const auto r2 = eval::run_experiment(s, f.c, f.systems);
  CHECK(r1.rows[0].rates == r2.rows[0].rates);
  for (double v : r1.rows[0].rates) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  SUBCASE("codec-aware crafting runs against the same channel") {
    eval::ExperimentSpec aware = s;
    aware.codec_aware = true;
    aware.sample_count = 3;
    const auto r = eval::run_experiment(aware, f.c, f.systems);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].label.find("codec-aware") != std::string::npos);
  }
}

TEST_CASE("declared black-box runs with shadow==target raise a warning flag") {
  const auto& f = fixture();
  eval::ExperimentSpec s;
  s.shadow_id = s.target_id = "shadow";
  s.black_box = true;
  s.epsilons = {0.0};
  s.sample_count = 3;
  const auto r = eval::run_experiment(s, f.c, f.systems);
  REQUIRE(!r.warnings.empty());
  CHECK(r.warnings[0].find("black-box") != std::string::npos);

  eval::ExperimentSpec ok = s;
  ok.target_id = "target";
  CHECK(eval::run_experiment(ok, f.c, f.systems).warnings.empty());
}

TEST_CASE("run_grid concatenates rows and rejects mismatched epsilon grids") {
  const auto& f = fixture();
  eval::ExperimentSpec a;
  a.shadow_id = a.target_id = "target";
  a.method = attacks::Method::kAdvJoint;
  a.epsilons = {0.0};
  a.sample_count = 4;
  eval::ExperimentSpec b = a;
  b.method = attacks::Method::kAdvCm;
  const auto r = eval::run_grid({a, b}, f.c, f.systems);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].label != r.rows[1].label);
  CHECK(r.specs.size() == 2);

  b.epsilons = {0.0, 0.001};
  CHECK_THROWS_AS(eval::run_grid({a, b}, f.c, f.systems), ConfigError);
}

TEST_CASE("report validation enforces the grid invariants") {
  eval::EvalReport r;
  r.epsilons = {0.001};  // baseline column missing
  r.rows.push_back({"row", {0.5}});
  CHECK_THROWS_AS(r.validate(), ConfigError);

  r.epsilons = {0.0, 0.001};
  r.rows[0].rates = {0.5};  // not rectangular
  CHECK_THROWS_AS(r.validate(), ConfigError);

  r.rows[0].rates = {0.5, 1.5};  // rate outside [0, 1]
  CHECK_THROWS_AS(r.validate(), ConfigError);

  r.rows[0].rates = {0.5, 1.0};
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("emitted reports re-emit byte-identically and round-trip through CSV") {
  eval::EvalReport r;
  r.epsilons = {0.0, 0.001, 0.003};
  r.rows.push_back({"advjoint shadow->target", {1.0 / 3.0, 0.125, 1.0}});
  r.rows.push_back({"advcm shadow->target", {0.0, 2.0 / 3.0, 0.9999999999999999}});
  eval::ExperimentSpec s;
  s.epsilons = r.epsilons;
  r.specs.push_back(s);

  const auto dir = temp_dir("roundtrip");
  eval::emit_report(r, dir / "grid.csv", dir / "grid.json");
  eval::emit_report(r, dir / "again.csv", dir / "again.json");
  CHECK(read_bytes(dir / "grid.csv") == read_bytes(dir / "again.csv"));
  CHECK(read_bytes(dir / "grid.json") == read_bytes(dir / "again.json"));

  const auto parsed = eval::parse_report_csv(dir / "grid.csv");
  CHECK(parsed.epsilons == r.epsilons);  // exact: shortest-form serialization
  REQUIRE(parsed.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(parsed.rows[i].label == r.rows[i].label);
    CHECK(parsed.rows[i].rates == r.rows[i].rates);
  }
}

TEST_CASE("CSV parsing reports malformed files with their location") {
  const auto dir = temp_dir("bad_csv");
  const auto write = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    out.close();
    return dir / name;
  };
  CHECK_THROWS_AS(eval::parse_report_csv(dir / "missing.csv"), IoError);
  CHECK_THROWS_AS(eval::parse_report_csv(write("h.csv", "nonsense\n")), FormatError);
  CHECK_THROWS_AS(
      eval::parse_report_csv(write("short.csv", "config,eps=0,eps=0.003\nrow,0.5\n")),
      FormatError);
  CHECK_THROWS_AS(
      eval::parse_report_csv(write("alpha.csv", "config,eps=0,eps=0.003\nrow,0.5,abc\n")),
      FormatError);
  try {
    eval::parse_report_csv(write("loc.csv", "config,eps=0\nrow,xyz\n"));
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("loc.csv") != std::string::npos);
    CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
  }
}

TEST_CASE("presets cover the paper-style grids with paired telephony rows") {
  const auto names = eval::preset_names();
  REQUIRE(names.size() == 5);
  CHECK_THROWS_AS(eval::make_preset("no-such-grid", 1), ConfigError);
  try {
    eval::make_preset("no-such-grid", 1);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("whitebox-grid") != std::string::npos);
  }

  const auto wb = eval::make_preset("whitebox-grid", 9);
  REQUIRE(wb.rows.size() == 3);
  for (const auto& row : wb.rows) {
    CHECK(row.shadow_id == row.target_id);
    CHECK(row.attack.early_stop);
    CHECK(row.step_fraction > 0.0);
  }

  const auto bb = eval::make_preset("blackbox-grid", 9);
  REQUIRE(bb.rows.size() == 3);
  for (const auto& row : bb.rows) {
    CHECK(row.black_box);
    CHECK(row.shadow_id != row.target_id);
  }

  const auto tel = eval::make_preset("telephony-grid", 9);
  REQUIRE(tel.rows.size() == 2);
  CHECK(!tel.rows[0].codec_aware);
  CHECK(tel.rows[1].codec_aware);
  REQUIRE(tel.rows[0].channel.has_value());
  CHECK(tel.rows[0].channel->loss_rate == doctest::Approx(0.02));
  CHECK(tel.rows[0].channel->redundancy);
  // Identical seeds keep the naive and codec-aware rows sample-paired.
  CHECK(tel.rows[0].seed == tel.rows[1].seed);

  CHECK(eval::make_preset("appendixB-grid", 9).corpus_cfg.target_family ==
        corpus::ArtefactFamily::kB);

  const auto cs = eval::make_preset("cmspec-grid", 9);
  REQUIRE(cs.rows.size() == 1);
  CHECK(cs.rows[0].method == attacks::Method::kCmSpec);
  CHECK(cs.rows[0].epsilons == std::vector<double>{0.0, 0.5, 1.0, 2.0, 4.0});

  // The same root seed must reproduce the same preset wiring.
  const auto wb2 = eval::make_preset("whitebox-grid", 9);
  CHECK(wb2.rows[0].seed == wb.rows[0].seed);
  CHECK(eval::make_preset("whitebox-grid", 10).rows[0].seed != wb.rows[0].seed);
}
