// Copyright (c) 2026 The diacal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "diacal/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "diacal/calibration.h"
#include "diacal/der.h"
#include "diacal/error.h"
#include "diacal/harness.h"
#include "diacal/selection.h"
#include "diacal/synth.h"
#include "json.hpp"

namespace diacal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::vector<std::string> data;  // dataset roots holding posteriors/ and rttm/
  std::string posteriors;         // overrides <data>/posteriors
  std::string rttm;               // overrides <data>/rttm
  int speakers = 3;
  int max_simultaneous = 2;
  int bins = 10;
  std::string bin_kind = "uniform";
  double region_length = 7.5;
  double stride = 2.5;
  std::vector<double> budgets;
  std::string strategy = "worst-confidence";
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string selection;    // JSONL from `select`
  std::string checkpoints;  // one sub-directory of .pst files per checkpoint
  std::string base;
  int trials = 20;
  std::string config;
};

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = std::make_shared<spdlog::logger>(
        "diacal", std::make_shared<spdlog::sinks::stderr_sink_st>());
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("DIACAL_LOG");
    l->set_level(spdlog::level::warn);
    if (env != nullptr && *env != '\0') {
      const auto level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; only accept real names.
      if (level != spdlog::level::off || std::string(env) == "off") {
        l->set_level(level);
      } else {
        l->warn("DIACAL_LOG: unknown level '{}', using warn", env);
      }
    }
    return l;
  }();
  return log;
}

// ---- configuration --------------------------------------------------------

// Options are registered per subcommand and keyed by their config-file name so
// the JSON config can fill whatever was not given on the command line.
class OptionTable {
 public:
  explicit OptionTable(CLI::App* app, RunConfig* cfg) : app_(app), cfg_(cfg) {}

  OptionTable& data() {
    add("data", app_->add_option("--data", cfg_->data,
                                 "dataset root with posteriors/ and rttm/ (repeatable)"));
    add("posteriors", app_->add_option("--posteriors", cfg_->posteriors,
                                       "directory of .pst files"));
    add("rttm", app_->add_option("--rttm", cfg_->rttm, "directory of .rttm files"));
    return mapping();
  }
  OptionTable& mapping() {
    add("speakers", app_->add_option("--speakers", cfg_->speakers,
                                     "powerset speakers per window"));
    add("max_simultaneous", app_->add_option("--max-simultaneous", cfg_->max_simultaneous,
                                             "powerset simultaneous speakers"));
    return *this;
  }
  OptionTable& bins() {
    add("bins", app_->add_option("--bins", cfg_->bins, "number of confidence bins"));
    add("bin_kind", app_->add_option("--bin-kind", cfg_->bin_kind, "uniform or adaptive")
                        ->check(CLI::IsMember({"uniform", "adaptive"})));
    return *this;
  }
  OptionTable& regions() {
    add("region_length", app_->add_option("--region-length", cfg_->region_length,
                                          "candidate region length (s)"));
    add("stride", app_->add_option("--stride", cfg_->stride,
                                   "seconds between candidate starts"));
    add("strategy", app_->add_option("--strategy", cfg_->strategy,
                                     "random or worst-confidence")
                        ->check(CLI::IsMember({"random", "worst-confidence",
                                               "worst_confidence"})));
    return *this;
  }
  OptionTable& budget() {
    add("budget", app_->add_option("--budget", cfg_->budgets,
                                   "annotation budget(s) in seconds")
                      ->delimiter(','));
    return *this;
  }
  OptionTable& selection() {
    add("selection", app_->add_option("--selection", cfg_->selection,
                                      "selection JSONL to reuse instead of selecting"));
    return *this;
  }
  OptionTable& checkpoints() {
    add("checkpoints", app_->add_option("--checkpoints", cfg_->checkpoints,
                                        "directory with one sub-directory per checkpoint"));
    add("base", app_->add_option("--base", cfg_->base,
                                 "checkpoint whose confidence drives selection"));
    add("trials", app_->add_option("--trials", cfg_->trials, "random-selection trials"));
    return *this;
  }
  OptionTable& common() {
    add("seed", app_->add_option("--seed", cfg_->seed, "random seed"));
    add("out", app_->add_option("--out", cfg_->out, "output directory"));
    app_->add_option("--config", cfg_->config, "JSON config; flags override it");
    return *this;
  }

  // Fills options that were not given on the command line from the config
  // file. Relative paths are taken relative to the config file.
  void apply_config() {
    if (cfg_->config.empty()) return;
    std::ifstream in(cfg_->config);
    if (!in) throw Error("cannot open config " + cfg_->config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(cfg_->config + ": " + e.what());
    }
    if (!j.is_object()) throw Error(cfg_->config + ": expected a JSON object");
    const fs::path dir = fs::path(cfg_->config).parent_path();
    const auto path = [&](const json& v) {
      const fs::path p = v.get<std::string>();
      return (p.is_relative() ? dir / p : p).string();
    };
    for (const auto& [key, value] : j.items()) {
      auto it = options_.find(key);
      if (it == options_.end()) {
        throw Error(fmt::format("{}: unknown key '{}' for this command", cfg_->config, key));
      }
      if (it->second->count() > 0) continue;  // flag wins
      try {
        if (key == "data") {
          cfg_->data.clear();
          if (value.is_array()) {
            for (const auto& v : value) cfg_->data.push_back(path(v));
          } else {
            cfg_->data.push_back(path(value));
          }
        } else if (key == "posteriors") {
          cfg_->posteriors = path(value);
        } else if (key == "rttm") {
          cfg_->rttm = path(value);
        } else if (key == "selection") {
          cfg_->selection = path(value);
        } else if (key == "checkpoints") {
          cfg_->checkpoints = path(value);
        } else if (key == "out") {
          cfg_->out = path(value);
        } else if (key == "speakers") {
          cfg_->speakers = value.get<int>();
        } else if (key == "max_simultaneous") {
          cfg_->max_simultaneous = value.get<int>();
        } else if (key == "bins") {
          cfg_->bins = value.get<int>();
        } else if (key == "bin_kind") {
          cfg_->bin_kind = value.get<std::string>();
        } else if (key == "region_length") {
          cfg_->region_length = value.get<double>();
        } else if (key == "stride") {
          cfg_->stride = value.get<double>();
        } else if (key == "strategy") {
          cfg_->strategy = value.get<std::string>();
        } else if (key == "budget") {
          cfg_->budgets = value.is_array() ? value.get<std::vector<double>>()
                                           : std::vector<double>{value.get<double>()};
        } else if (key == "seed") {
          cfg_->seed = value.get<std::uint64_t>();
        } else if (key == "base") {
          cfg_->base = value.get<std::string>();
        } else if (key == "trials") {
          cfg_->trials = value.get<int>();
        }
      } catch (const json::exception& e) {
        throw Error(fmt::format("{}: bad value for '{}': {}", cfg_->config, key, e.what()));
      }
    }
    if (cfg_->bin_kind != "uniform" && cfg_->bin_kind != "adaptive") {
      throw Error("bin_kind must be 'uniform' or 'adaptive'");
    }
  }

 private:
  void add(const std::string& key, CLI::Option* opt) { options_[key] = opt; }

  CLI::App* app_;
  RunConfig* cfg_;
  std::map<std::string, CLI::Option*> options_;
};

// ---- inputs ---------------------------------------------------------------

struct Dataset {
  std::string name;
  std::vector<PosteriorTrack> tracks;  // sorted by file id
  AnnotationSet reference;
};

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Collects every problem before failing so one run lists all missing inputs.
class InputCheck {
 public:
  void note(std::string problem) { problems_.push_back(std::move(problem)); }
  void raise(const std::string& what) const {
    if (problems_.empty()) return;
    std::string msg = what + ":";
    for (const std::string& p : problems_) msg += "\n  " + p;
    throw Error(msg);
  }

 private:
  std::vector<std::string> problems_;
};

std::vector<PosteriorTrack> load_tracks(const fs::path& dir, int num_classes,
                                        InputCheck& check) {
  std::vector<PosteriorTrack> tracks;
  if (!fs::is_directory(dir)) {
    check.note("missing posteriors directory " + dir.string());
    return tracks;
  }
  const auto files = files_with_extension(dir, ".pst");
  if (files.empty()) check.note("no .pst files in " + dir.string());
  std::set<std::string> ids;
  for (const fs::path& f : files) {
    try {
      PosteriorTrack t = read_posteriors_file(f.string());
      if (t.num_classes != num_classes) {
        check.note(fmt::format("{}: {} classes, expected {}", f.string(), t.num_classes,
                               num_classes));
        continue;
      }
      if (!ids.insert(t.file_id).second) {
        check.note(fmt::format("{}: duplicate file id '{}'", f.string(), t.file_id));
        continue;
      }
      logger()->debug("loaded {} ({} frames)", f.string(), t.grid.num_frames);
      tracks.push_back(std::move(t));
    } catch (const Error& e) {
      check.note(f.string() + ": " + e.what());
    }
  }
  std::sort(tracks.begin(), tracks.end(),
            [](const PosteriorTrack& a, const PosteriorTrack& b) { return a.file_id < b.file_id; });
  return tracks;
}

AnnotationSet load_reference(const fs::path& dir, InputCheck& check) {
  AnnotationSet set;
  if (!fs::is_directory(dir)) {
    check.note("missing rttm directory " + dir.string());
    return set;
  }
  const auto files = files_with_extension(dir, ".rttm");
  if (files.empty()) check.note("no .rttm files in " + dir.string());
  for (const fs::path& f : files) {
    try {
      const AnnotationSet one = read_rttm_file(f.string());
      for (const auto& [file, segs] : one.by_file()) {
        for (const Segment& s : segs) set.add(s);
      }
    } catch (const Error& e) {
      check.note(f.string() + ": " + e.what());
    }
  }
  return set;
}

PowersetMapping mapping_for(const RunConfig& cfg) {
  return build_powerset_mapping(PowersetConfig(cfg.speakers, cfg.max_simultaneous));
}

std::vector<Dataset> load_datasets(const RunConfig& cfg, bool need_posteriors,
                                   bool need_reference) {
  struct Source {
    std::string name;
    fs::path posteriors, rttm;
  };
  std::vector<Source> sources;
  if (!cfg.posteriors.empty() || !cfg.rttm.empty()) {
    if (cfg.data.size() > 1) throw Error("--posteriors/--rttm need at most one --data");
    const fs::path root = cfg.data.empty() ? fs::path() : fs::path(cfg.data[0]);
    Source s;
    s.posteriors = cfg.posteriors.empty() ? root / "posteriors" : fs::path(cfg.posteriors);
    s.rttm = cfg.rttm.empty() ? root / "rttm" : fs::path(cfg.rttm);
    s.name = cfg.data.empty() ? "dataset" : root.filename().string();
    sources.push_back(s);
  } else {
    for (const std::string& d : cfg.data) {
      const fs::path root = fs::path(d).lexically_normal();
      std::string name = root.filename().string();
      if (name.empty()) name = root.parent_path().filename().string();
      sources.push_back({name.empty() ? "dataset" : name, root / "posteriors", root / "rttm"});
    }
  }
  if (sources.empty()) throw Error("no dataset given: use --data or --posteriors/--rttm");

  const PowersetMapping mapping = mapping_for(cfg);
  std::vector<Dataset> out;
  for (const Source& s : sources) {
    InputCheck check;
    Dataset d;
    d.name = s.name;
    if (need_posteriors) d.tracks = load_tracks(s.posteriors, mapping.num_classes(), check);
    if (need_reference) d.reference = load_reference(s.rttm, check);
    if (need_posteriors && need_reference) {
      for (const PosteriorTrack& t : d.tracks) {
        if (!d.reference.contains(t.file_id)) {
          check.note(fmt::format("no reference turns for '{}' in {}", t.file_id,
                                 s.rttm.string()));
        }
      }
    }
    check.raise("dataset '" + d.name + "' is incomplete");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Checkpoint> load_checkpoints(const RunConfig& cfg) {
  if (cfg.checkpoints.empty()) throw Error("ckpt-select needs --checkpoints");
  const fs::path dir = cfg.checkpoints;
  if (!fs::is_directory(dir)) throw Error("missing checkpoints directory " + dir.string());
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  InputCheck check;
  if (subdirs.empty()) check.note("no checkpoint directories in " + dir.string());
  const int classes = mapping_for(cfg).num_classes();
  std::vector<Checkpoint> out;
  for (const fs::path& p : subdirs) {
    const fs::path tracks = fs::is_directory(p / "posteriors") ? p / "posteriors" : p;
    out.push_back({p.filename().string(), load_tracks(tracks, classes, check)});
  }
  check.raise("checkpoints are incomplete");
  return out;
}

std::vector<PosteriorTrack> all_tracks(const std::vector<Dataset>& sets) {
  std::vector<PosteriorTrack> out;
  std::set<std::string> ids;
  for (const Dataset& d : sets) {
    for (const PosteriorTrack& t : d.tracks) {
      if (!ids.insert(t.file_id).second) {
        throw Error("file id '" + t.file_id + "' appears in more than one dataset");
      }
      out.push_back(t);
    }
  }
  return out;
}

AnnotationSet all_reference(const std::vector<Dataset>& sets) {
  AnnotationSet out;
  for (const Dataset& d : sets) {
    for (const auto& [file, segs] : d.reference.by_file()) {
      for (const Segment& s : segs) out.add(s);
    }
  }
  return out;
}

// ---- outputs --------------------------------------------------------------

fs::path output_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
  logger()->info("wrote {}", path.string());
}

std::string der_text(const DERBreakdown& d) {
  const auto v = d.der();
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

// ---- calibration / reliability / der -------------------------------------

struct DatasetScores {
  std::vector<ScoredFrame> frames;
  DERBreakdown total;
  std::vector<std::pair<std::string, DERBreakdown>> per_file;
};

DatasetScores score_dataset(const Dataset& d, const PowersetMapping& mapping) {
  DatasetScores s;
  for (const PosteriorTrack& t : d.tracks) {
    const LocalDerResult r = local_der(t, mapping, d.reference);
    const auto frames = to_scored_frames(r.frames);
    s.frames.insert(s.frames.end(), frames.begin(), frames.end());
    s.total += r.total;
    s.per_file.emplace_back(t.file_id, r.total);
  }
  return s;
}

BinScheme scheme_for(const RunConfig& cfg, std::span<const ScoredFrame> frames,
                     int num_classes) {
  if (cfg.bin_kind == "adaptive") {
    std::vector<double> conf;
    conf.reserve(frames.size());
    for (const ScoredFrame& f : frames) conf.push_back(f.confidence);
    return adaptive_bin_edges(conf, cfg.bins, num_classes);
  }
  return uniform_bin_edges(num_classes, cfg.bins);
}

int cmd_calibration(const RunConfig& cfg, bool summary) {
  const PowersetMapping mapping = mapping_for(cfg);
  const auto sets = load_datasets(cfg, true, true);
  const fs::path out = output_dir(cfg);
  std::string table = "dataset,files,frames,ece,der\n";
  for (const Dataset& d : sets) {
    const DatasetScores s = score_dataset(d, mapping);
    if (s.frames.empty()) throw Error("dataset '" + d.name + "' has no scored frames");
    const BinScheme scheme = scheme_for(cfg, s.frames, mapping.num_classes());
    const auto diagram = reliability_diagram(s.frames, scheme);
    write_file(out / ("reliability_" + d.name + ".csv"),
               [&](std::ostream& o) { write_reliability_csv(diagram, o); });
    if (summary) {
      const EceResult ece = compute_ece(s.frames, scheme);
      table += fmt::format("{},{},{},{:.6f},{}\n", d.name, d.tracks.size(), s.frames.size(),
                           ece.ece, der_text(s.total));
      std::cout << fmt::format("{}: ECE {:.4f}  DER {}  ({} frames, {} bins {})\n", d.name,
                               ece.ece, der_text(s.total), s.frames.size(), cfg.bins,
                               cfg.bin_kind);
    }
  }
  if (summary) write_file(out / "summary.csv", [&](std::ostream& o) { o << table; });
  return 0;
}

int cmd_der(const RunConfig& cfg) {
  const PowersetMapping mapping = mapping_for(cfg);
  const auto sets = load_datasets(cfg, true, true);
  std::string table = "dataset,file_id,false_alarm,missed,confusion,total_speech,der\n";
  for (const Dataset& d : sets) {
    const DatasetScores s = score_dataset(d, mapping);
    for (const auto& [file, b] : s.per_file) {
      table += fmt::format("{},{},{},{},{},{},{}\n", d.name, file, b.false_alarm, b.missed,
                           b.confusion, b.total_speech, der_text(b));
    }
    const DERBreakdown& b = s.total;
    table += fmt::format("{},ALL,{},{},{},{},{}\n", d.name, b.false_alarm, b.missed,
                         b.confusion, b.total_speech, der_text(b));
    std::cout << fmt::format("{}: DER {} (FA {} / miss {} / conf {} over {} speech)\n", d.name,
                             der_text(b), b.false_alarm, b.missed, b.confusion,
                             b.total_speech);
  }
  write_file(output_dir(cfg) / "der.csv", [&](std::ostream& o) { o << table; });
  return 0;
}

// ---- selection and curves -------------------------------------------------

SelectionStrategy strategy_for(const RunConfig& cfg) {
  SelectionStrategy s;
  s.kind = parse_strategy(cfg.strategy);
  s.seed = cfg.seed;
  s.region_length = cfg.region_length;
  s.stride = cfg.stride;
  return s;
}

double domain_seconds(std::span<const PosteriorTrack> tracks) {
  double total = 0.0;
  for (const PosteriorTrack& t : tracks) total += t.grid.duration();
  return total;
}

double single_budget(const RunConfig& cfg, std::span<const PosteriorTrack> tracks,
                     bool default_to_domain) {
  if (cfg.budgets.empty()) {
    if (default_to_domain) return domain_seconds(tracks);
    throw Error("--budget is required");
  }
  if (cfg.budgets.size() != 1) throw Error("this command takes exactly one --budget");
  return cfg.budgets[0];
}

Selection select_or_load(const RunConfig& cfg, std::span<const PosteriorTrack> tracks,
                         bool default_to_domain) {
  if (!cfg.selection.empty()) {
    std::ifstream in(cfg.selection);
    if (!in) throw Error("cannot open selection " + cfg.selection);
    std::map<std::string, double> rates;
    for (const PosteriorTrack& t : tracks) rates[t.file_id] = t.grid.frame_rate;
    const double fr = tracks.empty() ? kDefaultFrameRate : tracks.front().grid.frame_rate;
    Selection sel;
    for (ScoredRegion& r : read_selection_jsonl(in, fr)) {
      auto it = rates.find(r.region.file_id);
      if (it != rates.end()) r.frames = to_frames(r.region, it->second);
      sel.total_seconds += r.region.duration();
      sel.regions.push_back(std::move(r));
    }
    return sel;
  }
  const double budget = single_budget(cfg, tracks, default_to_domain);
  Selection sel = select_regions(tracks, strategy_for(cfg), budget);
  if (sel.shortfall) {
    logger()->warn("candidates ran out at {:.3f} s of a {:.3f} s budget", sel.total_seconds,
                   budget);
  }
  return sel;
}

int cmd_select(const RunConfig& cfg) {
  const auto sets = load_datasets(cfg, true, false);
  const auto tracks = all_tracks(sets);
  const Selection sel = select_or_load(cfg, tracks, false);
  write_file(output_dir(cfg) / "selection.jsonl",
             [&](std::ostream& o) { write_selection_jsonl(sel, o); });
  std::cout << fmt::format("selected {} regions, {:.3f} s{}\n", sel.regions.size(),
                           sel.total_seconds, sel.shortfall ? " (budget not met)" : "");
  return 0;
}

int cmd_curves(const RunConfig& cfg) {
  const PowersetMapping mapping = mapping_for(cfg);
  const auto sets = load_datasets(cfg, true, true);
  const auto tracks = all_tracks(sets);
  const AnnotationSet reference = all_reference(sets);
  const Selection sel = select_or_load(cfg, tracks, true);
  const BudgetCurves curves = budget_curves(sel.regions, reference, tracks, mapping);
  const fs::path out = output_dir(cfg);
  if (cfg.selection.empty()) {
    write_file(out / "selection.jsonl", [&](std::ostream& o) { write_selection_jsonl(sel, o); });
  }
  write_file(out / "curve.csv", [&](std::ostream& o) { write_curve_csv(curves.points, o); });
  write_file(out / "curve_whole.csv", [&](std::ostream& o) {
    write_curve_csv(std::span<const BudgetCurvePoint>(&curves.whole_set, 1), o);
  });
  std::cout << fmt::format("{} points; whole-set DER {}\n", curves.points.size(),
                           der_text(curves.whole_set.der));
  return 0;
}

int cmd_oracle(const RunConfig& cfg) {
  const auto sets = load_datasets(cfg, cfg.selection.empty(), true);
  const AnnotationSet reference = all_reference(sets);
  const auto tracks = all_tracks(sets);
  const Selection sel = select_or_load(cfg, tracks, false);
  std::vector<Region> regions;
  for (const ScoredRegion& r : sel.regions) regions.push_back(r.region);
  const OracleLabelResult labels = oracle_label(regions, reference);
  const fs::path out = output_dir(cfg);
  const TrainingManifest m = emit_training_manifest(labels, out);
  logger()->info("wrote {}", (out / "manifest.json").string());
  std::cout << fmt::format("annotated {} regions, {:.3f} s, {} turns\n", m.regions.size(),
                           m.total_duration, labels.annotations.num_segments());
  return 0;
}

int cmd_ckpt(const RunConfig& cfg) {
  const PowersetMapping mapping = mapping_for(cfg);
  const auto sets = load_datasets(cfg, false, true);
  const AnnotationSet reference = all_reference(sets);
  const auto checkpoints = load_checkpoints(cfg);
  if (cfg.budgets.empty()) throw Error("ckpt-select needs at least one --budget");
  const CheckpointEvaluator evaluator(checkpoints, reference, mapping);

  ValidationConfig vc;
  vc.budgets = cfg.budgets;
  vc.n_trials = cfg.trials;
  vc.base_checkpoint = cfg.base.empty() ? evaluator.ids().front() : cfg.base;
  vc.region_length = cfg.region_length;
  vc.stride = cfg.stride;
  vc.seed = cfg.seed;
  const ValidationEvalReport report = evaluate_minimal_validation(checkpoints, evaluator, vc);

  const fs::path out = output_dir(cfg);
  write_file(out / "validation.csv", [&](std::ostream& o) { write_validation_csv(report, o); });
  write_file(out / "validation_summary.csv",
             [&](std::ostream& o) { write_validation_summary_csv(report, o); });
  std::cout << fmt::format("best checkpoint {} (DER {})\n", report.best,
                           der_text(evaluator.full_der(evaluator.best())));
  for (const ValidationSummary& s : report.summaries) {
    std::cout << fmt::format("  {:>9.1f} s {:<16} mean rel diff {:.4f}  max {:.4f}{}\n",
                             s.budget, to_string(s.strategy), s.mean_rel_diff, s.max_rel_diff,
                             s.shortfall ? "  (short)" : "");
  }
  return 0;
}

// ---- synth ----------------------------------------------------------------

ConfidenceRange range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("confidence range must be [low, high]");
  ConfidenceRange r{j[0].get<double>(), j[1].get<double>()};
  if (!(r.low >= 0.0 && r.low <= r.high && r.high <= 1.0)) {
    throw Error("confidence range must satisfy 0 <= low <= high <= 1");
  }
  return r;
}

// Per-file profile: global fields, explicit error regions for this file and
// randomly placed ones.
CalibrationProfile profile_from(const json& j, const std::string& file_id,
                                double duration, std::uint64_t seed) {
  CalibrationProfile p;
  p.beta_alpha = j.value("beta_alpha", p.beta_alpha);
  p.beta_beta = j.value("beta_beta", p.beta_beta);
  p.gamma = j.value("gamma", p.gamma);
  if (!(p.beta_alpha > 0.0 && p.beta_beta > 0.0 && p.gamma > 0.0)) {
    throw Error("profile: beta_alpha, beta_beta and gamma must be positive");
  }
  if (j.contains("overlap_confidence")) p.overlap_confidence = range_from(j["overlap_confidence"]);
  const auto region_from = [](const json& r, double start, double end) {
    ErrorRegion e;
    e.start = start;
    e.end = end;
    if (r.contains("degraded_accuracy")) e.degraded_accuracy = r["degraded_accuracy"].get<double>();
    if (r.contains("confidence")) e.confidence = range_from(r["confidence"]);
    return e;
  };
  for (const json& r : j.value("error_regions", json::array())) {
    if (r.contains("file_id") && r["file_id"].get<std::string>() != file_id) continue;
    p.error_regions.push_back(region_from(r, r.at("start").get<double>(), r.at("end").get<double>()));
  }
  if (j.contains("random_error_regions")) {
    const json& r = j["random_error_regions"];
    const int count = r.value("count", 0);
    const double length = r.value("length", 10.0);
    if (count > 0 && length < duration) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> start(0.0, duration - length);
      for (int i = 0; i < count; ++i) {
        const double s = start(rng);
        p.error_regions.push_back(region_from(r, s, s + length));
      }
    }
  }
  return p;
}

int cmd_synth(const RunConfig& cfg, bool seed_given) {
  if (cfg.config.empty()) throw Error("synth needs a scenario: --config scenario.json");
  std::ifstream in(cfg.config);
  if (!in) throw Error("cannot open scenario " + cfg.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(cfg.config + ": " + e.what());
  }

  try {
    const std::uint64_t seed = seed_given ? cfg.seed : j.value("seed", std::uint64_t{0});
    const int speakers = j.value("speakers", 3);
    const int simultaneous = j.value("max_simultaneous", 2);
    const PowersetMapping mapping =
        build_powerset_mapping(PowersetConfig(speakers, simultaneous));
    const int n_files = j.value("files", 1);
    const double duration = j.value("duration", 300.0);
    const std::string prefix = j.value("file_prefix", std::string("synth"));
    if (n_files < 1) throw Error("scenario: files must be >= 1");

    ConversationParams conv;
    conv.duration = duration;
    conv.frame_rate = j.value("frame_rate", kDefaultFrameRate);
    const json jc = j.value("conversation", json::object());
    conv.n_speakers = jc.value("n_speakers", speakers);
    conv.turn_on_rate = jc.value("turn_on_rate", conv.turn_on_rate);
    conv.turn_off_rate = jc.value("turn_off_rate", conv.turn_off_rate);
    conv.overlap_bias = jc.value("overlap_bias", conv.overlap_bias);
    conv.max_simultaneous = jc.value("max_simultaneous", simultaneous);

    const json jw = j.value("window", json::object());
    SynthWindow window;
    window.length = jw.value("length", window.length);
    window.stride = jw.value("stride", window.stride);

    const json base_profile = j.value("profile", json::object());
    struct CkptSpec {
      std::string id;
      json profile;
    };
    std::vector<CkptSpec> ckpts;
    for (const json& c : j.value("checkpoints", json::array())) {
      json merged = base_profile;
      merged.update(c.value("profile", json::object()));
      ckpts.push_back({c.at("id").get<std::string>(), merged});
    }

    const fs::path out = output_dir(cfg);
    fs::create_directories(out / "rttm");
    fs::create_directories(out / "posteriors");
    for (const CkptSpec& c : ckpts) fs::create_directories(out / "checkpoints" / c.id);

    const FrameGrid grid{conv.frame_rate, seconds_to_frames(duration, conv.frame_rate)};
    for (int i = 0; i < n_files; ++i) {
      ConversationParams p = conv;
      p.file_id = fmt::format("{}{:03d}", prefix, i);
      p.seed = derive_seed(derive_seed(seed, 0), i);
      const AnnotationSet ref = gen_reference(p);
      write_file(out / "rttm" / (p.file_id + ".rttm"),
                 [&](std::ostream& o) { write_rttm(ref, o); });
      if (!ref.contains(p.file_id)) {
        logger()->warn("{} has no speech; scoring it will fail", p.file_id);
      }
      // Error regions are placed once per file and shared by all checkpoints
      // so they describe the data, not the model.
      const std::uint64_t region_seed = derive_seed(derive_seed(seed, 1), i);
      const PosteriorTrack base =
          gen_posteriors(ref, p.file_id, mapping,
                         profile_from(base_profile, p.file_id, duration, region_seed), grid,
                         window, derive_seed(derive_seed(seed, 2), i));
      write_posteriors_file(base, (out / "posteriors" / (p.file_id + ".pst")).string());
      for (std::size_t c = 0; c < ckpts.size(); ++c) {
        const PosteriorTrack t =
            gen_posteriors(ref, p.file_id, mapping,
                           profile_from(ckpts[c].profile, p.file_id, duration, region_seed),
                           grid, window, derive_seed(derive_seed(seed, 3 + c), i));
        write_posteriors_file(
            t, (out / "checkpoints" / ckpts[c].id / (p.file_id + ".pst")).string());
      }
    }
    std::cout << fmt::format("wrote {} files ({} checkpoints) to {}\n", n_files, ckpts.size(),
                             out.string());
  } catch (const json::exception& e) {
    throw Error(cfg.config + ": " + e.what());
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Calibration, local DER and annotation-budget tools for diarization"};
  app.require_subcommand(1);
  RunConfig cfg;

  struct Command {
    CLI::App* app;
    OptionTable options;
  };
  std::vector<Command> commands;
  const auto add = [&](const char* name, const char* help) -> OptionTable& {
    CLI::App* sub = app.add_subcommand(name, help);
    commands.push_back({sub, OptionTable(sub, &cfg)});
    return commands.back().options;
  };
  commands.reserve(8);
  add("calibration", "ECE, DER summary and reliability CSV per dataset")
      .data().bins().common();
  add("reliability", "reliability diagram CSV per dataset").data().bins().common();
  add("der", "local DER per file").data().common();
  add("select", "select annotation regions under a budget")
      .data().regions().budget().selection().common();
  add("curves", "cumulative DER and composition along a selection")
      .data().regions().budget().selection().common();
  add("oracle-label", "reveal reference turns inside selected regions")
      .data().regions().budget().selection().common();
  add("ckpt-select", "checkpoint selection on minimal validation sets")
      .data().regions().budget().checkpoints().common();
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset from a scenario");
  CLI::Option* synth_seed = synth->add_option("--seed", cfg.seed, "overrides the scenario seed");
  synth->add_option("--out", cfg.out, "output directory");
  synth->add_option("--config", cfg.config, "scenario JSON")->required();

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg, synth_seed->count() > 0);
    for (Command& c : commands) {
      if (!c.app->parsed()) continue;
      c.options.apply_config();
      const std::string name = c.app->get_name();
      logger()->debug("running {}", name);
      if (name == "calibration") return cmd_calibration(cfg, true);
      if (name == "reliability") return cmd_calibration(cfg, false);
      if (name == "der") return cmd_der(cfg);
      if (name == "select") return cmd_select(cfg);
      if (name == "curves") return cmd_curves(cfg);
      if (name == "oracle-label") return cmd_oracle(cfg);
      if (name == "ckpt-select") return cmd_ckpt(cfg);
    }
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace diacal
