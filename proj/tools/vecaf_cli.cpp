// vecaf: synthetic data, selection, full runs and cross-seed reports.
//
//   vecaf synth  --out DIR [spec flags]
//   vecaf select --pool F --labels F [--losses F | --checkpoint F] --out-indices F ...
//   vecaf run    --data DIR --out DIR [--strategy S]... [--seed N]...
//   vecaf report SUMMARY... --out F
//
// Any subcommand accepts --config FILE (INI, one [section] per subcommand,
// keys are the long flag names). Flags on the command line win.
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include "vecaf/cea.hpp"
#include "vecaf/io.hpp"
#include "vecaf/orchestrator.hpp"
#include "vecaf/probe.hpp"
#include "vecaf/report.hpp"
#include "vecaf/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace fs = std::filesystem;
using namespace vecaf;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string number(double v) { return report::format_number(v); }

// FNV-1a over a file's bytes; identifies the data a summary was computed on.
std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct OdsFlags {
  double lambda = OdsConfig{}.lambda;
  double lr = OdsConfig{}.learning_rate;
  int iterations = OdsConfig{}.max_iterations;
  int ensemble = OdsConfig{}.ensemble_size;
  double ridge = OdsConfig{}.ridge;

  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "Diversity weight")->capture_default_str();
    app->add_option("--ods-lr", lr, "Adam step size for centroids")->capture_default_str();
    app->add_option("--ods-iterations", iterations, "Iteration cap per ensemble member")
        ->capture_default_str();
    app->add_option("--ensemble", ensemble, "Ensemble size")->capture_default_str();
    app->add_option("--ridge", ridge, "Variance ridge in the debias correction")
        ->capture_default_str();
  }
  OdsConfig config(std::uint64_t seed) const {
    OdsConfig c;
    c.lambda = lambda;
    c.learning_rate = lr;
    c.max_iterations = iterations;
    c.ensemble_size = ensemble;
    c.ridge = ridge;
    c.seed = seed;
    return c;
  }
};

struct CeaFlags {
  double eta = cea::CeaConfig{}.eta;
  double prompt_weight = 0.0;
  bool steer = false;

  void add(CLI::App* app) {
    app->add_option("--eta", eta, "CEA step size at the average attention score")
        ->capture_default_str();
    app->add_option("--prompt-weight", prompt_weight, "Blend of the prompt into every caption")
        ->capture_default_str();
    app->add_flag("--steer", steer, "Run CEA over the whole pool before selection");
  }
  cea::CeaConfig config() const {
    cea::CeaConfig c;
    c.eta = eta;
    c.prompt_weight = prompt_weight;
    return c;
  }
};

// ---- synth -----------------------------------------------------------------

struct SynthFlags {
  synth::SynthSpec spec;
  double shift_magnitude = 0.0;
  double shift_fraction = 0.0;
  std::uint64_t shift_seed = 0;
  std::string out;
};

void cmd_synth(const SynthFlags& f) {
  synth::SynthSpec spec = f.spec;
  if (f.shift_fraction > 0.0 || f.shift_magnitude > 0.0) {
    if (!(f.shift_magnitude > 0.0))
      throw ConfigError("synth: --shift-fraction needs a positive --shift-magnitude");
    spec.domain_shift =
        synth::DomainShift{synth::random_direction(spec.dim, f.shift_seed) * f.shift_magnitude,
                           f.shift_fraction};
  }
  const auto ds = synth::synth_dataset(spec);

  const fs::path out(f.out);
  fs::create_directories(out);
  io::write_matrix(ds.train.vectors(), out / "train.vcf");
  io::write_labels(ds.train.labels(), out / "train.vcl");
  io::write_matrix(ds.eval.vectors(), out / "eval.vcf");
  io::write_labels(ds.eval.labels(), out / "eval.vcl");
  io::write_matrix(ds.captions.vectors(), out / "captions.vcf");

  std::ostringstream meta;
  meta << "split,index,label,shifted\n";
  for (Index i = 0; i < ds.train.count(); ++i)
    meta << "train," << i << ',' << ds.train.labels()[i] << ',' << (ds.meta.shifted[i] ? 1 : 0)
         << '\n';
  for (Index i = 0; i < ds.eval.count(); ++i)
    meta << "eval," << i << ',' << ds.eval.labels()[i] << ','
         << (ds.meta.eval_shifted[i] ? 1 : 0) << '\n';
  report::write_text(meta.str(), out / "metadata.csv");

  int files = 6;
  if (const auto& p = ds.captions.prompt()) {
    io::write_matrix(Matrix(p->transpose()), out / "prompt.vcf");
    ++files;
  }
  if (ds.meta.prior_losses) {
    io::write_losses(*ds.meta.prior_losses, out / "prior_losses.vcf");
    ++files;
  }
  std::cout << "wrote " << files << " files to " << out.string() << " (" << ds.train.count()
            << " train, " << ds.eval.count() << " eval, d=" << spec.dim << ")\n";
}

// ---- select ----------------------------------------------------------------

struct SelectFlags {
  std::string pool;
  std::string labels;
  std::uint32_t classes = 0;
  std::string captions;
  std::string prompt;
  std::string losses;
  std::string checkpoint;
  std::string strategy = "vecaf";
  double ratio = 0.01;
  std::uint64_t seed = 0;
  OdsFlags ods;
  CeaFlags cea;
  std::string out_indices;
  std::string out_diagnostics;
};

void cmd_select(const SelectFlags& f) {
  const auto strategy = orchestrator::parse_strategy(f.strategy);
  if (!f.losses.empty() && !f.checkpoint.empty())
    throw UsageError("--losses and --checkpoint are mutually exclusive");
  const EmbeddingSet pool = io::read_embedding_set(f.pool, f.labels, f.classes);

  std::optional<LossProfile> losses;
  if (!f.losses.empty()) {
    losses = io::read_losses(f.losses);
  } else if (!f.checkpoint.empty()) {
    losses = probe::pool_losses(probe::read_checkpoint(f.checkpoint), pool);
  } else if (strategy == orchestrator::Strategy::TopkLoss) {
    throw ConfigError("topk_loss requires a losses source (--losses or --checkpoint)");
  } else if (strategy == orchestrator::Strategy::Vecaf) {
    // Same as the first loop of a run: an untrained probe.
    losses = probe::pool_losses(probe::ProbeModel::zeros(pool.class_count(), pool.dim()), pool);
  }
  if (losses && losses->count() != pool.count())
    throw ValidationError("losses cover " + std::to_string(losses->count()) + " samples, pool has " +
                          std::to_string(pool.count()));

  std::optional<CaptionEmbeddings> captions;
  if (!f.captions.empty()) captions = io::read_captions(f.captions, f.prompt);
  if (f.cea.steer && !captions) throw ConfigError("--steer requires --captions");

  orchestrator::RunConfig config;
  config.strategy = strategy;
  config.selection_ratio = f.ratio;
  config.seed = f.seed;
  config.ods = f.ods.config(f.seed);
  config.cea = f.cea.config();
  config.prompt_steering = f.cea.steer;
  config.validate();
  if (f.cea.steer) config.cea.validate(captions->prompt().has_value());

  const Index budget = config.budget(pool.count());
  Rng rng(f.seed);
  orchestrator::SelectionInputs in{&pool, captions ? &*captions : nullptr,
                                   losses ? &*losses : nullptr};
  const auto out = orchestrator::select_indices(in, config, budget, rng);

  std::ostringstream idx;
  for (Index i : out.indices) idx << i << '\n';
  report::write_text(idx.str(), f.out_indices);

  if (!f.out_diagnostics.empty()) {
    std::ostringstream d;
    d << "kind,member,iteration,value\n";
    for (std::size_t m = 0; m < out.traces.size(); ++m)
      for (std::size_t it = 0; it < out.traces[m].objective.size(); ++it)
        d << "objective," << m + 1 << ',' << it << ',' << number(out.traces[m].objective[it])
          << '\n';
    if (out.model) {
      const auto ps = ods::selection_probability(pool, *out.model);
      double selected_mass = 0.0;
      for (Index i : out.indices) selected_mass += ps[i];
      d << "p_s_min,,," << number(*std::min_element(ps.begin(), ps.end())) << '\n';
      d << "p_s_max,,," << number(*std::max_element(ps.begin(), ps.end())) << '\n';
      d << "p_s_selected_mass,,," << number(selected_mass) << '\n';
      d << "mean_pairwise_cosine,,," << number(ods::mean_pairwise_cosine(*out.model)) << '\n';
    }
    report::write_text(d.str(), f.out_diagnostics);
  }
  std::cout << "selected " << out.indices.size() << " of " << pool.count() << " ("
            << f.strategy << ")\n";
}

// ---- run -------------------------------------------------------------------

struct RunFlags {
  std::string data;
  std::string train;
  std::string train_labels;
  std::string eval;
  std::string eval_labels;
  std::string captions;
  std::string prompt;
  std::string prior_losses;
  std::vector<std::string> strategies{"vecaf"};
  std::vector<std::uint64_t> seeds{0};
  int loops = 3;
  double ratio = 0.01;
  Index total_batches = 300;
  Index eval_every = 10;
  double target = -1.0;
  Index batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  bool no_cea = false;
  OdsFlags ods;
  CeaFlags cea;
  bool projection = false;
  std::string out;
};

fs::path pick(const std::string& explicit_path, const std::string& dir, const char* name) {
  if (!explicit_path.empty()) return explicit_path;
  if (dir.empty()) throw UsageError(std::string("need --data or an explicit path for ") + name);
  return fs::path(dir) / name;
}

void cmd_run(const RunFlags& f, const std::string& resolved_config) {
  const fs::path train_path = pick(f.train, f.data, "train.vcf");
  const EmbeddingSet pool =
      io::read_embedding_set(train_path, pick(f.train_labels, f.data, "train.vcl"));
  const EmbeddingSet eval = io::read_embedding_set(
      pick(f.eval, f.data, "eval.vcf"), pick(f.eval_labels, f.data, "eval.vcl"), pool.class_count());

  fs::path prompt_path = f.prompt;
  if (prompt_path.empty() && !f.data.empty() && fs::exists(fs::path(f.data) / "prompt.vcf"))
    prompt_path = fs::path(f.data) / "prompt.vcf";
  const CaptionEmbeddings captions =
      io::read_captions(pick(f.captions, f.data, "captions.vcf"), prompt_path);

  std::optional<LossProfile> prior;
  if (!f.prior_losses.empty()) prior = io::read_losses(f.prior_losses);

  std::vector<orchestrator::Strategy> strategies;
  for (const auto& s : f.strategies) strategies.push_back(orchestrator::parse_strategy(s));

  orchestrator::RunConfig base;
  base.loops = f.loops;
  base.selection_ratio = f.ratio;
  base.total_batches = f.total_batches;
  base.eval_every = f.eval_every;
  if (f.target >= 0.0) base.target_accuracy = f.target;
  base.train.batch_size = f.batch_size;
  base.train.learning_rate = f.lr;
  base.train.momentum = f.momentum;
  base.cea = f.cea.config();
  base.use_cea = !f.no_cea;
  base.prompt_steering = f.cea.steer;
  base.validate();

  const fs::path out(f.out);
  fs::create_directories(out);
  std::vector<orchestrator::RunReport> runs;
  for (std::uint64_t seed : f.seeds) {
    for (auto strategy : strategies) {
      orchestrator::RunConfig c = base;
      c.strategy = strategy;
      c.seed = seed;
      c.ods = f.ods.config(seed);
      c.train.seed = seed;
      auto r = orchestrator::run(pool, captions, eval, c, prior ? &*prior : nullptr);
      const std::string tag = orchestrator::to_string(strategy) + "_s" + std::to_string(seed);
      probe::write_checkpoint(r.probe, out / ("probe_" + tag + ".vcp"));
      std::cout << tag << ": final_acc " << number(r.final_accuracy) << ", b2a "
                << report::format_b2a(r) << '\n';
      runs.push_back(std::move(r));
    }
  }

  report::Provenance prov;
  prov["data"] = file_digest(train_path);
  prov["loops"] = std::to_string(f.loops);
  prov["ratio"] = number(f.ratio);
  prov["total_batches"] = std::to_string(f.total_batches);
  prov["eval_every"] = std::to_string(f.eval_every);
  prov["target_acc"] = f.target >= 0.0 ? number(f.target) : "n/a";
  prov["batch_size"] = std::to_string(f.batch_size);
  prov["lr"] = number(f.lr);
  prov["momentum"] = number(f.momentum);
  prov["lambda"] = number(f.ods.lambda);
  prov["ods_lr"] = number(f.ods.lr);
  prov["ods_iterations"] = std::to_string(f.ods.iterations);
  prov["ensemble"] = std::to_string(f.ods.ensemble);
  prov["ridge"] = number(f.ods.ridge);
  prov["eta"] = number(f.cea.eta);
  prov["prompt_weight"] = number(f.cea.prompt_weight);
  prov["cea"] = f.no_cea ? "off" : "on";
  prov["steer"] = f.cea.steer ? "on" : "off";
  prov["prior_losses"] = f.prior_losses.empty() ? "none" : file_digest(f.prior_losses);

  report::write_text(report::eval_csv(runs), out / "eval.csv");
  report::write_text(report::summary_csv(runs, prov), out / "summary.csv");
  if (f.projection) report::write_text(report::projection_csv(pool, runs), out / "projection.csv");
  report::write_text(resolved_config, out / "resolved.ini");
}

// ---- report ----------------------------------------------------------------

void cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  if (inputs.empty()) throw UsageError("report: no summary files given");
  std::vector<report::SummaryFile> files;
  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    files.push_back(report::parse_summary(text.str(), path));
  }
  const std::string table = report::aggregate(files);
  report::write_text(table, out);
  std::cout << table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VeCAF data selection and benchmarking"};
  app.set_config("--config", "", "INI file; one [section] per subcommand");
  app.require_subcommand(1);
  app.fallthrough();

  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic clustered dataset");
  synth_cmd->add_option("--classes", sf.spec.class_count)->capture_default_str();
  synth_cmd->add_option("--per-class", sf.spec.samples_per_class)->capture_default_str();
  synth_cmd->add_option("--eval-per-class", sf.spec.eval_per_class)->capture_default_str();
  synth_cmd->add_option("--dim", sf.spec.dim)->capture_default_str();
  synth_cmd->add_option("--spread", sf.spec.cluster_spread, "Per-coordinate sample noise")
      ->capture_default_str();
  synth_cmd->add_option("--caption-noise", sf.spec.caption_noise)->capture_default_str();
  synth_cmd->add_option("--min-separation", sf.spec.min_separation_deg,
                        "Minimum angle between class centers (degrees)")
      ->capture_default_str();
  synth_cmd->add_option("--boost-classes", sf.spec.loss_boost_classes,
                        "Classes whose prior losses are scaled up");
  synth_cmd->add_option("--boost-factor", sf.spec.loss_boost_factor)->capture_default_str();
  synth_cmd->add_option("--shift-magnitude", sf.shift_magnitude)->capture_default_str();
  synth_cmd->add_option("--shift-fraction", sf.shift_fraction)->capture_default_str();
  synth_cmd->add_option("--shift-seed", sf.shift_seed)->capture_default_str();
  synth_cmd->add_option("--seed", sf.spec.seed)->capture_default_str();
  synth_cmd->add_option("--out", sf.out, "Output directory")->required();

  SelectFlags sel;
  auto* select_cmd = app.add_subcommand("select", "Select one batch of samples from a pool");
  select_cmd->add_option("--pool", sel.pool, "Pool embeddings (VCF1)")->required();
  select_cmd->add_option("--labels", sel.labels, "Pool labels (VCL1)")->required();
  select_cmd->add_option("--classes", sel.classes, "Class count (default: inferred)");
  select_cmd->add_option("--captions", sel.captions, "Caption embeddings (VCF1)");
  select_cmd->add_option("--prompt", sel.prompt, "Single-row prompt embedding (VCF1)");
  select_cmd->add_option("--losses", sel.losses, "Per-sample losses (n x 1 VCF1)");
  select_cmd->add_option("--checkpoint", sel.checkpoint, "Probe checkpoint to compute losses");
  select_cmd->add_option("--strategy", sel.strategy)->capture_default_str();
  select_cmd->add_option("--ratio", sel.ratio)->capture_default_str();
  select_cmd->add_option("--seed", sel.seed)->capture_default_str();
  sel.ods.add(select_cmd);
  sel.cea.add(select_cmd);
  select_cmd->add_option("--out-indices", sel.out_indices)->required();
  select_cmd->add_option("--out-diagnostics", sel.out_diagnostics);

  RunFlags rf;
  auto* run_cmd = app.add_subcommand("run", "Run the select/augment/finetune loop");
  run_cmd->add_option("--data", rf.data, "Directory written by `synth`");
  run_cmd->add_option("--train", rf.train);
  run_cmd->add_option("--train-labels", rf.train_labels);
  run_cmd->add_option("--eval", rf.eval);
  run_cmd->add_option("--eval-labels", rf.eval_labels);
  run_cmd->add_option("--captions", rf.captions);
  run_cmd->add_option("--prompt", rf.prompt);
  run_cmd->add_option("--prior-losses", rf.prior_losses, "Losses used in place of loop 1's");
  run_cmd->add_option("--strategy", rf.strategies, "vecaf, random, topk_loss, diversity_only")
      ->capture_default_str();
  run_cmd->add_option("--seed", rf.seeds)->capture_default_str();
  run_cmd->add_option("--loops", rf.loops)->capture_default_str();
  run_cmd->add_option("--ratio", rf.ratio, "Selected fraction per loop")->capture_default_str();
  run_cmd->add_option("--total-batches", rf.total_batches)->capture_default_str();
  run_cmd->add_option("--eval-every", rf.eval_every)->capture_default_str();
  run_cmd->add_option("--target-acc", rf.target, "Target accuracy for B2A (negative: off)")
      ->capture_default_str();
  run_cmd->add_option("--batch-size", rf.batch_size)->capture_default_str();
  run_cmd->add_option("--lr", rf.lr)->capture_default_str();
  run_cmd->add_option("--momentum", rf.momentum)->capture_default_str();
  run_cmd->add_flag("--no-cea", rf.no_cea, "Skip augmentation of the selected samples");
  rf.ods.add(run_cmd);
  rf.cea.add(run_cmd);
  run_cmd->add_flag("--projection", rf.projection, "Also write projection.csv");
  run_cmd->add_option("--out", rf.out, "Output directory")->required();

  std::vector<std::string> summaries;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Aggregate summary CSVs across seeds");
  report_cmd->add_option("summaries", summaries, "summary.csv files")->required();
  report_cmd->add_option("--out", report_out, "Aggregate CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) cmd_synth(sf);
    if (*select_cmd) cmd_select(sel);
    if (*run_cmd) cmd_run(rf, "[run]\n" + run_cmd->config_to_str(true, false));
    if (*report_cmd) cmd_report(summaries, report_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
