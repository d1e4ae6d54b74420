#include "bbsel/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bbsel/io.hpp"
#include "bbsel/pipeline.hpp"
#include "bbsel/rng.hpp"

namespace bbsel::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::Format: return kExitFormat;
    case ErrorKind::InvalidArgument: return kExitInvalid;
  }
  return kExitInternal;
}

namespace {

constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagShuffle = 2;

struct Options {
  // data
  std::string classes = "1,3,4";
  int dim = 2;
  int instances_per_class = 250;
  std::size_t samples = 0;  // 0: 2025 at D = 2, else the largest square <= 1000 * D
  std::string mode;         // empty: grid for D = 2, random otherwise
  // labeling and solving
  long budget = 0;  // 0: 10000 * D
  int runs = 5;
  double epsilon = 1e-8;
  // network and training
  std::string arch = "b";
  std::string width_scale = "1";
  int epochs = 150;
  int batch = 60;
  double lr = 1e-4;
  int precision = 8;
  // inputs
  std::string manifest;
  std::string model;
  std::string split = "test";
  int problem_class = 1;
  std::uint64_t instance = 1;
  // common
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = ".";
};

std::size_t default_samples(int dim) {
  if (dim == 2) return 2025;
  const auto s = static_cast<std::size_t>(std::floor(std::sqrt(1000.0 * dim)));
  return s * s;
}

std::vector<int> parse_classes(const std::string& text) {
  std::vector<int> out;
  if (text == "all") {
    for (const auto& c : suite_list()) out.push_back(c.id);
    return out;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      const auto dash = item.find('-');
      if (dash != std::string::npos && dash > 0) {
        const int lo = std::stoi(item.substr(0, dash));
        const int hi = std::stoi(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(item);
        for (int c = lo; c <= hi; ++c) out.push_back(c);
      } else {
        std::size_t pos = 0;
        out.push_back(std::stoi(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "--classes: cannot parse '" + item + "' (use e.g. 1,3,4 or 1-6 or all)");
    }
  }
  if (out.empty()) fail(ErrorKind::Config, "--classes is empty");
  return out;
}

// Also records the resolved defaults in o for the config dump.
ClassDatasetConfig data_config(Options& o) {
  if (o.dim < 1) fail(ErrorKind::Config, "--dim must be at least 1");
  if (o.samples == 0) o.samples = default_samples(o.dim);
  if (o.budget == 0) o.budget = 10000L * o.dim;
  ClassDatasetConfig c;
  c.classes = parse_classes(o.classes);
  c.dim = o.dim;
  c.instances_per_class = o.instances_per_class;
  c.samples = o.samples;
  c.seed = o.seed;
  c.workers = o.workers;
  if (!o.mode.empty()) {
    try {
      c.mode = parse_sample_mode(o.mode);
    } catch (const Error& e) {
      fail(ErrorKind::Config, std::string("--mode: ") + e.what());
    }
  }
  o.mode = to_string(c.mode.value_or(default_sample_mode(o.dim)));
  return c;
}

Split split_option(const Options& o) {
  try {
    return parse_split(o.split);
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("--split: ") + e.what());
  }
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset load_manifest_option(const Options& o) {
  if (o.manifest.empty()) fail(ErrorKind::Config, "--manifest is required");
  return load_dataset(o.manifest);
}

Network load_model_option(const Options& o) {
  if (o.model.empty()) fail(ErrorKind::Config, "--model is required");
  return load_checkpoint(o.model);
}

void check_model_input(const Network& net, const Dataset& d) {
  const int side = exact_square_root(d.manifest.sampling.count);
  if (net.input_shape().height != side || net.input_shape().width != side)
    fail(ErrorKind::Config, "model expects " + std::to_string(net.input_shape().height) + "x" +
                                std::to_string(net.input_shape().width) + " images but the dataset has " +
                                std::to_string(side) + "x" + std::to_string(side));
}

void cmd_gen_samples(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const SampleSpec spec = data_config(o).sample_spec();
  const SampleMatrix m = spec.materialize();
  std::string text = "count,dim,mode,seed,lower,upper,hash\n";
  text += std::to_string(m.count) + "," + std::to_string(m.dim) + "," + to_string(m.mode) + "," +
          std::to_string(m.seed) + "," + csv_double(m.bounds.lower) + "," + csv_double(m.bounds.upper) + "," +
          hex64(m.hash()) + "\n";
  art.write("samples_meta.csv", text);
  std::string rows;
  for (int j = 0; j < m.dim; ++j) rows += (j ? ",x" : "x") + std::to_string(j);
  rows += "\n";
  for (std::size_t i = 0; i < m.count; ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) rows += (j ? "," : "") + csv_double(r[j]);
    rows += "\n";
  }
  art.write("samples.csv", rows);
  out << m.count << " samples in " << m.dim << " dimensions (" << to_string(m.mode) << "), hash " << hex64(m.hash())
      << "\n";
}

void cmd_gen_dataset(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const Dataset d = generate_class_dataset(data_config(o));
  save_dataset(d, art);
  out << d.manifest.entries.size() << " images: " << d.manifest.indices(Split::Train).size() << " train, "
      << d.manifest.indices(Split::Val).size() << " val, " << d.manifest.indices(Split::Test).size() << " test\n";
}

void cmd_label(Options& o, io::ArtifactSet& art, std::ostream& out) {
  AlgorithmDatasetConfig c;
  c.data = data_config(o);
  c.labeling.budget = o.budget;
  c.labeling.runs = o.runs;
  c.labeling.epsilon = o.epsilon;
  c.labeling.seed = o.seed;
  c.labeling.workers = o.workers;
  const auto r = generate_algorithm_dataset(c);
  save_dataset(r.dataset, art);
  art.write("label_report.csv", r.report.to_csv());
  std::string summary = "split,kept,eliminated\n";
  for (Split s : {Split::Train, Split::Val, Split::Test})
    summary += to_string(s) + "," + std::to_string(r.dataset.manifest.indices(s).size()) + "," +
               std::to_string(r.report.eliminated[static_cast<std::size_t>(s)]) + "\n";
  art.write("label_summary.csv", summary);
  out << summary;
}

void cmd_train(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const Dataset d = load_manifest_option(o);
  ArchitectureConfig arch;
  WidthScale scale;
  try {
    scale = WidthScale::parse(o.width_scale);
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("--width-scale: ") + e.what());
  }
  const std::uint64_t init_seed = derive_seed(o.seed, {kTagInit});
  if (o.arch == "a")
    arch = ArchitectureConfig::variant_a(2, scale, init_seed);
  else if (o.arch == "b")
    arch = ArchitectureConfig::variant_b(2, scale, init_seed);
  else
    fail(ErrorKind::Config, "--arch must be a or b");
  if (o.precision != 4 && o.precision != 8) fail(ErrorKind::Config, "--precision must be 4 or 8");

  TrainConfig t;
  t.epochs = o.epochs;
  t.batch_size = o.batch;
  t.learning_rate = o.lr;
  t.seed = derive_seed(o.seed, {kTagShuffle});
  t.workers = o.workers;
  const auto result = train_on_dataset(d, arch, t, [&](const EpochRecord& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "epoch %d loss %.6f val_acc %.4f\n", r.epoch, r.train_loss, r.val_accuracy);
    out << buf << std::flush;
  });
  art.write("model.lsnn", encode_checkpoint(result.best, static_cast<ParamPrecision>(o.precision)));
  art.write("history.csv", history_csv(result.history));
  out << "best epoch " << result.best_epoch << "\n";
}

void cmd_eval(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const Dataset d = load_manifest_option(o);
  const Network net = load_model_option(o);
  check_model_input(net, d);
  const auto table = evaluate_accuracy(net, d, split_option(o), o.workers);
  art.write("accuracy.csv", table.to_csv());
  art.write("accuracy.txt", table.to_text());
  out << table.to_text();
}

void cmd_solve(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const Dataset d = load_manifest_option(o);
  const Network net = load_model_option(o);
  check_model_input(net, d);
  const auto& spec = d.manifest.sampling;
  const auto inst = make_instance(o.problem_class, spec.dim, o.instance, spec.bounds);
  if (o.budget == 0) o.budget = 10000L * spec.dim;
  const long total = o.budget;
  const auto r = select_and_solve(inst, total, network_predictor(net), spec.materialize(), o.seed);
  std::string text = "class_id,dim,instance_seed,chosen,sampling_evals,solving_evals,best_error,sampling_best_error\n";
  text += std::to_string(o.problem_class) + "," + std::to_string(spec.dim) + "," + std::to_string(o.instance) + "," +
          std::string(algorithm_name(r.chosen)) + "," + std::to_string(r.sampling_evals) + "," +
          std::to_string(r.solving_evals) + "," + csv_double(r.best_error) + "," + csv_double(r.sampling_best_error) +
          "\n";
  art.write("portfolio.csv", text);
  std::string traj = "evals,best_error\n";
  for (const auto& p : r.run.trajectory) traj += std::to_string(p.evals) + "," + csv_double(p.best_error) + "\n";
  art.write("trajectory.csv", traj);
  out << text;
}

void cmd_bench(Options& o, io::ArtifactSet& art, std::ostream& out) {
  const Dataset d = load_manifest_option(o);
  if (d.manifest.label_kind != LabelKind::BestAlgorithm)
    fail(ErrorKind::Config, "bench needs a best-algorithm manifest (from the label command)");
  const Network net = load_model_option(o);
  check_model_input(net, d);
  if (o.budget == 0) o.budget = 10000L * d.manifest.sampling.dim;
  BenchConfig c;
  c.total_budget = o.budget;
  c.runs = o.runs;
  c.seed = o.seed;
  c.workers = o.workers;
  c.split = split_option(o);
  const auto r = run_benchmark(d, network_predictor(net), c);
  art.write("bench_records.csv", r.records_csv());
  art.write("ranks.csv", r.table.ranks_csv());
  art.write("mean_errors.csv", r.table.errors_csv());
  art.write("ranks.txt", r.table.to_text());
  out << r.table.to_text();
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

// INI dump of the options registered on sub, with the values actually used.
std::string resolved_config(const CLI::App& sub, const Options& o) {
  const std::map<std::string, std::string> values = {
      {"classes", quoted(o.classes)},
      {"dim", std::to_string(o.dim)},
      {"instances-per-class", std::to_string(o.instances_per_class)},
      {"samples", std::to_string(o.samples)},
      {"mode", quoted(o.mode)},
      {"budget", std::to_string(o.budget)},
      {"runs", std::to_string(o.runs)},
      {"epsilon", csv_double(o.epsilon)},
      {"arch", quoted(o.arch)},
      {"width-scale", quoted(o.width_scale)},
      {"epochs", std::to_string(o.epochs)},
      {"batch", std::to_string(o.batch)},
      {"lr", csv_double(o.lr)},
      {"precision", std::to_string(o.precision)},
      {"manifest", quoted(o.manifest)},
      {"model", quoted(o.model)},
      {"split", quoted(o.split)},
      {"class", std::to_string(o.problem_class)},
      {"instance", std::to_string(o.instance)},
      {"seed", std::to_string(o.seed)},
      {"workers", std::to_string(o.workers)},
      {"out", quoted(o.out)},
  };
  std::string text = "# " + sub.get_name() + "\n";
  for (const CLI::Option* opt : sub.get_options()) {
    const auto it = values.find(opt->get_lnames().empty() ? "" : opt->get_lnames().front());
    if (it != values.end()) text += it->first + "=" + it->second + "\n";
  }
  return text;
}

// Splices "key=value" lines of the --config file in front of the explicit
// flags; with the take-last policy the flags then win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::FileError&) {
    fail(ErrorKind::Io, "cannot read config file '" + path + "'");
  }
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--" || item.inputs.empty()) continue;
    injected.push_back("--" + item.name);
    for (const auto& v : item.inputs) injected.push_back(v);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  std::string config_path;
  CLI::App app{"Landscape-image algorithm selection for black-box optimization"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "Read options from an INI file; flags override it");
    s->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    s->add_option("--workers", o.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--out", o.out, "Output directory")->capture_default_str();
  };
  auto add_data = [&](CLI::App* s) {
    s->add_option("--classes", o.classes, "Problem classes: list, range, or 'all'")->capture_default_str();
    s->add_option("--dim", o.dim, "Problem dimension")->capture_default_str();
    s->add_option("--instances-per-class", o.instances_per_class)->capture_default_str();
    s->add_option("--samples", o.samples, "Sample count N (perfect square); 0 picks a default")->capture_default_str();
    s->add_option("--mode", o.mode, "grid or random (default: grid for D=2)");
  };
  auto add_manifest = [&](CLI::App* s) { s->add_option("--manifest", o.manifest, "Dataset manifest")->required(); };
  auto add_model = [&](CLI::App* s) { s->add_option("--model", o.model, "Model checkpoint")->required(); };

  auto* gen_samples = app.add_subcommand("gen-samples", "Write the shared sample matrix");
  add_data(gen_samples);
  add_common(gen_samples);

  auto* gen_dataset = app.add_subcommand("gen-dataset", "Generate a problem-class image dataset");
  add_data(gen_dataset);
  add_common(gen_dataset);

  auto* label = app.add_subcommand("label", "Generate a best-algorithm dataset");
  add_data(label);
  label->add_option("--budget", o.budget, "Evaluations per run; 0 means 10000*D")->capture_default_str();
  label->add_option("--runs", o.runs, "Runs per algorithm")->capture_default_str();
  label->add_option("--epsilon", o.epsilon, "Global-optimum error threshold")->capture_default_str();
  add_common(label);

  auto* train_cmd = app.add_subcommand("train", "Train a classifier on a manifest");
  add_manifest(train_cmd);
  train_cmd->add_option("--arch", o.arch, "a (100x100) or b (45x45)")->capture_default_str();
  train_cmd->add_option("--width-scale", o.width_scale, "Channel shrink factor, e.g. 1/8")->capture_default_str();
  train_cmd->add_option("--epochs", o.epochs)->capture_default_str();
  train_cmd->add_option("--batch", o.batch)->capture_default_str();
  train_cmd->add_option("--lr", o.lr)->capture_default_str();
  train_cmd->add_option("--precision", o.precision, "Bytes per stored parameter (4 or 8)")->capture_default_str();
  add_common(train_cmd);

  auto* eval = app.add_subcommand("eval", "Accuracy of a model on a manifest split");
  add_manifest(eval);
  add_model(eval);
  eval->add_option("--split", o.split)->capture_default_str();
  add_common(eval);

  auto* solve = app.add_subcommand("solve", "Sample, select, and solve one instance");
  add_manifest(solve);
  add_model(solve);
  solve->add_option("--class", o.problem_class, "Problem class id")->capture_default_str();
  solve->add_option("--instance", o.instance, "Instance seed")->capture_default_str();
  solve->add_option("--budget", o.budget, "Total evaluations; 0 means 10000*D")->capture_default_str();
  add_common(solve);

  auto* bench = app.add_subcommand("bench", "Rank the selector against each single algorithm");
  add_manifest(bench);
  add_model(bench);
  bench->add_option("--split", o.split)->capture_default_str();
  bench->add_option("--budget", o.budget, "Total evaluations; 0 means 10000*D")->capture_default_str();
  bench->add_option("--runs", o.runs, "Runs per method and instance")->capture_default_str();
  add_common(bench);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(std::move(args));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    io::ArtifactSet art(o.out);
    const std::string name = sub->get_name();
    if (name == "gen-samples")
      cmd_gen_samples(o, art, out);
    else if (name == "gen-dataset")
      cmd_gen_dataset(o, art, out);
    else if (name == "label")
      cmd_label(o, art, out);
    else if (name == "train")
      cmd_train(o, art, out);
    else if (name == "eval")
      cmd_eval(o, art, out);
    else if (name == "solve")
      cmd_solve(o, art, out);
    else
      cmd_bench(o, art, out);
    art.write(name + ".config.ini", resolved_config(*sub, o));
    art.commit();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace bbsel::cli
