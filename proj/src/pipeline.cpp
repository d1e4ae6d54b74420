#include "bbsel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "bbsel/common.hpp"
#include "bbsel/rng.hpp"

namespace bbsel {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagSamples = 0x53414d50;
constexpr std::uint64_t kTagSplit = 0x53504c54;
constexpr std::uint64_t kTagLabel = 0x4c41424c;
constexpr std::uint64_t kTagBench = 0x42454e43;
constexpr std::uint64_t kTagPortfolio = 100;

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string g17(double v) { return fmt("%.17g", v); }

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

long long to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "manifest: bad " + what + " '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, const std::string& what, int base = 10) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos, base);
    if (pos != s.size() || (!s.empty() && s[0] == '-')) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "manifest: bad " + what + " '" + s + "'");
  }
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "manifest: bad " + what + " '" + s + "'");
  }
}

std::string label_name(LabelKind kind, int label) {
  if (kind == LabelKind::BestAlgorithm) return std::string(algorithm_name(algorithm_from_code(label)));
  return function_class(label).name;
}

std::string image_name(const InstanceDescriptor& d) {
  return fmt("images/c%02d_d%d_i%04llu.lsim", d.class_id, d.dim, static_cast<unsigned long long>(d.seed));
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  fail(ErrorKind::InvalidArgument, "unknown split");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  fail(ErrorKind::InvalidArgument, "unknown split '" + std::string(text) + "' (expected train, val, or test)");
}

std::string to_string(LabelKind k) { return k == LabelKind::ProblemClass ? "problem-class" : "best-algorithm"; }

LabelKind parse_label_kind(std::string_view text) {
  if (text == "problem-class") return LabelKind::ProblemClass;
  if (text == "best-algorithm") return LabelKind::BestAlgorithm;
  fail(ErrorKind::InvalidArgument, "unknown label kind '" + std::string(text) + "'");
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == s) out.push_back(i);
  return out;
}

std::string format_manifest(const DatasetManifest& m) {
  std::string out = "# landscape image dataset\n";
  out += "version 1\n";
  out += "labels " + to_string(m.label_kind) + "\n";
  const auto& s = m.sampling;
  out += fmt("samples %zu %d %s %llu ", s.count, s.dim, to_string(s.mode).c_str(),
             static_cast<unsigned long long>(s.seed)) +
         g17(s.bounds.lower) + " " + g17(s.bounds.upper) + "\n";
  out += "sample_hash " + hex64(m.sample_hash) + "\n";
  out += fmt("entries %zu\n", m.entries.size());
  const std::string hash = hex64(m.sample_hash);
  for (const auto& e : m.entries) {
    if (e.image_path.empty() || e.image_path.find_first_of(" \t\n") != std::string::npos)
      fail(ErrorKind::InvalidArgument, "manifest image paths must be non-empty and contain no whitespace");
    out += fmt("%d %d %llu ", e.instance.class_id, e.instance.dim, static_cast<unsigned long long>(e.instance.seed)) +
           e.image_path + fmt(" %d ", e.label) + to_string(e.split) + " " + hash + "\n";
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto words = split_words(line);
    if (!words.empty()) lines.push_back(std::move(words));
  }
  auto header = [&](std::size_t i, const char* key, std::size_t n) -> const std::vector<std::string>& {
    if (i >= lines.size() || lines[i][0] != key || lines[i].size() != n + 1)
      fail(ErrorKind::Format, std::string("manifest: expected '") + key + "' line");
    return lines[i];
  };

  DatasetManifest m;
  if (header(0, "version", 1)[1] != "1") fail(ErrorKind::Format, "manifest: unsupported version " + lines[0][1]);
  try {
    m.label_kind = parse_label_kind(header(1, "labels", 1)[1]);
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
  const auto& s = header(2, "samples", 6);
  m.sampling.count = static_cast<std::size_t>(to_u64(s[1], "sample count"));
  m.sampling.dim = static_cast<int>(to_int(s[2], "dimension"));
  try {
    m.sampling.mode = parse_sample_mode(s[3]);
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
  m.sampling.seed = to_u64(s[4], "sample seed");
  m.sampling.bounds = {to_double(s[5], "lower bound"), to_double(s[6], "upper bound")};
  m.sample_hash = to_u64(header(3, "sample_hash", 1)[1], "sample hash", 16);
  const auto count = static_cast<std::size_t>(to_u64(header(4, "entries", 1)[1], "entry count"));
  if (lines.size() != 5 + count)
    fail(ErrorKind::Format, fmt("manifest: header announces %zu entries, found %zu", count, lines.size() - 5));

  for (std::size_t i = 5; i < lines.size(); ++i) {
    const auto& w = lines[i];
    if (w.size() != 7) fail(ErrorKind::Format, fmt("manifest: entry %zu has %zu fields, expected 7", i - 5, w.size()));
    ManifestEntry e;
    e.instance.class_id = static_cast<int>(to_int(w[0], "class id"));
    e.instance.dim = static_cast<int>(to_int(w[1], "dimension"));
    e.instance.seed = to_u64(w[2], "instance seed");
    e.image_path = w[3];
    e.label = static_cast<int>(to_int(w[4], "label"));
    try {
      e.split = parse_split(w[5]);
    } catch (const Error& err) {
      fail(ErrorKind::Format, std::string("manifest: ") + err.what());
    }
    if (to_u64(w[6], "entry sample hash", 16) != m.sample_hash)
      fail(ErrorKind::Format, "manifest: entry " + std::to_string(i - 5) + " was imaged from a different sample matrix");
    if (e.instance.dim != m.sampling.dim)
      fail(ErrorKind::Format, "manifest: entry dimension differs from the sample matrix");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_dataset(const Dataset& dataset, io::ArtifactSet& out, const std::string& manifest_name) {
  require(dataset.images.size() == dataset.manifest.entries.size(), "dataset images and entries differ in count");
  for (std::size_t i = 0; i < dataset.images.size(); ++i)
    out.write(dataset.manifest.entries[i].image_path, encode_image(dataset.images[i]));
  out.write(manifest_name, format_manifest(dataset.manifest));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.manifest = parse_manifest(io::read_file(manifest_path));
  const auto& m = d.manifest;
  if (m.sampling.materialize().hash() != m.sample_hash)
    fail(ErrorKind::Format, "manifest: sample_hash does not match the recorded sampling parameters");
  const int side = exact_square_root(m.sampling.count);
  const auto dir = manifest_path.parent_path();
  d.images.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    auto image = read_image(dir / e.image_path);
    if (image.side != side)
      fail(ErrorKind::Format, e.image_path + ": image side " + std::to_string(image.side) +
                                  " does not match the sample count");
    d.images.push_back(std::move(image));
  }
  return d;
}

std::vector<Split> stratified_split(const std::vector<int>& groups, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  std::vector<Split> out(groups.size(), Split::Test);
  for (auto& [group, idx] : members) {
    Rng rng(derive_seed(seed, {kTagSplit, static_cast<std::uint64_t>(static_cast<std::int64_t>(group))}));
    rng.shuffle(idx.begin(), idx.end());
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::floor(0.7 * n + 0.5));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::floor(0.1 * n + 0.5)));
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[idx[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
  }
  return out;
}

SampleSpec ClassDatasetConfig::sample_spec() const {
  return {samples, dim, mode.value_or(default_sample_mode(dim)), derive_seed(seed, {kTagSamples}), bounds};
}

Dataset generate_class_dataset(const ClassDatasetConfig& config) {
  require(!config.classes.empty(), "at least one problem class is required");
  require(config.instances_per_class >= 1, "instances_per_class must be at least 1");
  require(config.dim >= 1, "dimension must be at least 1");
  if (exact_square_root(config.samples) == 0)
    fail(ErrorKind::InvalidArgument, "sample count " + std::to_string(config.samples) + " is not a perfect square");
  for (std::size_t i = 0; i < config.classes.size(); ++i) {
    function_class(config.classes[i]);
    for (std::size_t j = 0; j < i; ++j)
      if (config.classes[i] == config.classes[j])
        fail(ErrorKind::InvalidArgument, "class " + std::to_string(config.classes[i]) + " listed twice");
  }

  Dataset d;
  d.manifest.label_kind = LabelKind::ProblemClass;
  d.manifest.sampling = config.sample_spec();
  const SampleMatrix samples = d.manifest.sampling.materialize();
  d.manifest.sample_hash = samples.hash();

  std::vector<int> groups;
  for (int c : config.classes)
    for (int k = 1; k <= config.instances_per_class; ++k) {
      ManifestEntry e;
      e.instance = {c, config.dim, static_cast<std::uint64_t>(k)};
      e.image_path = image_name(e.instance);
      e.label = c;
      d.manifest.entries.push_back(std::move(e));
      groups.push_back(c);
    }
  const auto splits = stratified_split(groups, config.seed);
  for (std::size_t i = 0; i < splits.size(); ++i) d.manifest.entries[i].split = splits[i];

  d.images.resize(d.manifest.entries.size());
  parallel_for(d.images.size(), config.workers, [&](std::size_t i) {
    const auto inst = make_instance(d.manifest.entries[i].instance, config.bounds);
    d.images[i] = make_landscape_image(inst, samples);
  });
  return d;
}

LabelDecision decide_label(const std::array<double, 3>& mean_errors, double epsilon) {
  int below = 0;
  for (double m : mean_errors)
    if (m <= epsilon) ++below;
  if (below >= 2) return {std::nullopt, true};
  const auto best = std::min_element(mean_errors.begin(), mean_errors.end());
  if (std::count(mean_errors.begin(), mean_errors.end(), *best) > 1) return {std::nullopt, true};
  return {algorithm_from_code(static_cast<int>(best - mean_errors.begin())), false};
}

std::uint64_t labeling_run_seed(std::uint64_t base, const InstanceDescriptor& d, AlgorithmId id, int run) {
  return derive_seed(base, {kTagLabel, static_cast<std::uint64_t>(d.class_id), static_cast<std::uint64_t>(d.dim),
                            d.seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(run)});
}

namespace {

void finish_row(LabelRow& row, double epsilon) {
  for (std::size_t a = 0; a < 3; ++a) {
    const auto& e = row.run_errors[a];
    row.mean_error[a] = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  }
  row.decision = decide_label(row.mean_error, epsilon);
}

}  // namespace

LabelRow label_by_best_algorithm(const ProblemInstance& instance, const LabelingConfig& config) {
  require(config.runs >= 1, "labeling needs at least one run per algorithm");
  LabelRow row;
  row.instance = instance.descriptor();
  const auto runs = static_cast<std::size_t>(config.runs);
  for (auto& e : row.run_errors) e.resize(runs);
  const long budget = config.budget_for(instance.dim());
  parallel_for(3 * runs, config.workers, [&](std::size_t t) {
    const AlgorithmId id = kAlgorithms[t / runs];
    const int run = static_cast<int>(t % runs);
    BudgetedProblem problem(instance, budget);
    const auto r = run_algorithm(id, problem, labeling_run_seed(config.seed, row.instance, id, run));
    row.run_errors[t / runs][t % runs] = r.best_error;
  });
  finish_row(row, config.epsilon);
  return row;
}

std::string LabelReport::to_csv() const {
  std::string out = "class_id,dim,instance_seed,split,mean_error_ABC,mean_error_CMAES,mean_error_LSHADE,winner,undetermined\n";
  for (const auto& r : rows) {
    out += fmt("%d,%d,%llu,", r.instance.class_id, r.instance.dim, static_cast<unsigned long long>(r.instance.seed)) +
           to_string(r.split);
    for (double m : r.mean_error) out += "," + g17(m);
    out += "," + (r.decision.winner ? std::string(algorithm_name(*r.decision.winner)) : std::string("none"));
    out += r.decision.undetermined ? ",1\n" : ",0\n";
  }
  return out;
}

AlgorithmDataset generate_algorithm_dataset(const AlgorithmDatasetConfig& config) {
  const auto& lc = config.labeling;
  require(lc.runs >= 1, "labeling needs at least one run per algorithm");
  Dataset full = generate_class_dataset(config.data);

  const std::size_t n = full.manifest.entries.size();
  const auto runs = static_cast<std::size_t>(lc.runs);
  const std::size_t per_instance = 3 * runs;
  std::vector<LabelRow> rows(n);
  std::vector<ProblemInstance> instances;
  instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].instance = full.manifest.entries[i].instance;
    rows[i].split = full.manifest.entries[i].split;
    for (auto& e : rows[i].run_errors) e.resize(runs);
    instances.push_back(make_instance(rows[i].instance, config.data.bounds));
  }
  const unsigned workers = std::max(config.data.workers, lc.workers);
  parallel_for(n * per_instance, workers, [&](std::size_t t) {
    const std::size_t i = t / per_instance;
    const std::size_t a = (t % per_instance) / runs;
    const int run = static_cast<int>(t % runs);
    BudgetedProblem problem(instances[i], lc.budget_for(config.data.dim));
    const auto r = run_algorithm(kAlgorithms[a], problem, labeling_run_seed(lc.seed, rows[i].instance, kAlgorithms[a], run));
    rows[i].run_errors[a][static_cast<std::size_t>(run)] = r.best_error;
  });

  AlgorithmDataset out;
  out.dataset.manifest = full.manifest;
  out.dataset.manifest.label_kind = LabelKind::BestAlgorithm;
  out.dataset.manifest.entries.clear();
  for (std::size_t i = 0; i < n; ++i) {
    finish_row(rows[i], lc.epsilon);
    if (rows[i].decision.undetermined) {
      ++out.report.eliminated[static_cast<std::size_t>(rows[i].split)];
      continue;
    }
    ManifestEntry e = full.manifest.entries[i];
    e.label = static_cast<int>(*rows[i].decision.winner);
    out.dataset.manifest.entries.push_back(std::move(e));
    out.dataset.images.push_back(std::move(full.images[i]));
  }
  out.report.rows = std::move(rows);
  for (Split s : {Split::Train, Split::Val, Split::Test})
    if (out.dataset.manifest.indices(s).empty() && !full.manifest.indices(s).empty())
      fail(ErrorKind::Config, "split '" + to_string(s) + "' is empty after removing undetermined instances");
  return out;
}

std::vector<int> label_space(const Dataset& dataset) {
  if (dataset.manifest.label_kind == LabelKind::BestAlgorithm) {
    std::vector<int> codes;
    for (AlgorithmId id : kAlgorithms) codes.push_back(static_cast<int>(id));
    return codes;
  }
  std::vector<int> labels;
  for (const auto& e : dataset.manifest.entries) labels.push_back(e.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

std::vector<Example> make_examples(const Dataset& dataset, Split split, const Network& net) {
  std::vector<Example> out;
  for (std::size_t i : dataset.manifest.indices(split)) {
    const auto& image = dataset.images[i];
    if (image.side != net.input_shape().height || image.side != net.input_shape().width)
      fail(ErrorKind::Config, "image side " + std::to_string(image.side) + " does not match the network input " +
                                  std::to_string(net.input_shape().height));
    out.push_back({to_tensor(image), net.index_of_label(dataset.manifest.entries[i].label)});
  }
  return out;
}

TrainResult train_on_dataset(const Dataset& dataset, const ArchitectureConfig& arch, const TrainConfig& config,
                             const std::function<void(const EpochRecord&)>& on_epoch) {
  const int side = exact_square_root(dataset.manifest.sampling.count);
  if (side != arch.input_side)
    fail(ErrorKind::Config, "architecture input side " + std::to_string(arch.input_side) +
                                " does not match the dataset image side " + std::to_string(side));
  ArchitectureConfig cfg = arch;
  const auto labels = label_space(dataset);
  cfg.num_classes = static_cast<int>(labels.size());
  Network net = Network::build(cfg);
  net.set_labels(labels);
  const auto train_set = make_examples(dataset, Split::Train, net);
  const auto val_set = make_examples(dataset, Split::Val, net);
  return train(std::move(net), train_set, val_set, config, on_epoch);
}

AccuracyTable evaluate_accuracy(const ImagePredictor& predict, const Dataset& dataset, Split split, unsigned workers) {
  const auto idx = dataset.manifest.indices(split);
  if (idx.empty()) fail(ErrorKind::InvalidArgument, "split '" + to_string(split) + "' is empty");
  std::vector<int> predicted(idx.size());
  parallel_for(idx.size(), workers, [&](std::size_t k) { predicted[k] = predict(dataset.images[idx[k]]); });

  AccuracyTable t;
  t.label_kind = dataset.manifest.label_kind;
  std::map<int, AccuracyRow> rows;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int truth = dataset.manifest.entries[idx[k]].label;
    auto& r = rows[truth];
    r.label = truth;
    ++r.total;
    ++t.total;
    if (predicted[k] == truth) {
      ++r.correct;
      ++t.correct;
    }
  }
  for (auto& [label, r] : rows) t.per_class.push_back(r);
  return t;
}

AccuracyTable evaluate_accuracy(const Network& net, const Dataset& dataset, Split split, unsigned workers) {
  return evaluate_accuracy([&net](const LandscapeImage& image) { return predict_label(net, image); }, dataset, split,
                           workers);
}

std::string AccuracyTable::to_csv() const {
  std::string out = "label,name,correct,total,accuracy\n";
  for (const auto& r : per_class)
    out += fmt("%d,%s,%d,%d,", r.label, label_name(label_kind, r.label).c_str(), r.correct, r.total) +
           g17(r.accuracy()) + "\n";
  out += fmt("all,Average,%d,%d,", correct, total) + g17(overall()) + "\n";
  return out;
}

std::string AccuracyTable::to_text() const {
  std::string out = fmt("%-6s %-20s %9s\n", "Label", "Name", "Accuracy");
  for (const auto& r : per_class)
    out += fmt("%-6d %-20s %8.2f%%\n", r.label, label_name(label_kind, r.label).c_str(), 100.0 * r.accuracy());
  out += fmt("%-6s %-20s %8.2f%%\n", "", "Average", 100.0 * overall());
  return out;
}

AlgorithmPredictor network_predictor(const Network& net) {
  return [&net](const LandscapeImage& image) { return algorithm_from_code(predict_label(net, image)); };
}

PortfolioResult select_and_solve(const ProblemInstance& instance, long total_budget, const AlgorithmPredictor& predict,
                                 const SampleMatrix& samples, std::uint64_t seed) {
  const auto n = static_cast<long>(samples.count);
  if (n >= total_budget)
    fail(ErrorKind::InvalidArgument, "sample count " + std::to_string(n) + " must be below the total budget " +
                                         std::to_string(total_budget));
  require(samples.dim == instance.dim(), "sample matrix dimension differs from the instance dimension");

  PortfolioResult out;
  BudgetedProblem sampling(instance, n);
  const auto fv = fitness_vector(instance.dim(), [&](std::span<const double> x) { return *sampling.evaluate(x); },
                                 samples);
  out.sampling_evals = sampling.used();
  out.sampling_best_error = sampling.best_error();
  out.image = to_image(normalize(fv.values));
  out.chosen = predict(out.image);

  BudgetedProblem solving(instance, total_budget - n);
  out.run = run_algorithm(out.chosen, solving, seed);
  out.solving_evals = solving.used();
  out.best_error = out.run.best_error;
  return out;
}

RankTable rank_table(const std::vector<std::string>& methods, const std::vector<MethodScore>& scores) {
  require(!methods.empty(), "rank table needs at least one method");
  std::map<int, std::vector<std::pair<double, int>>> sums;  // class -> per method (sum, count)
  for (const auto& s : scores) {
    const auto it = std::find(methods.begin(), methods.end(), s.method);
    if (it == methods.end()) fail(ErrorKind::InvalidArgument, "score for unknown method '" + s.method + "'");
    auto& v = sums[s.class_id];
    v.resize(methods.size(), {0.0, 0});
    auto& cell = v[static_cast<std::size_t>(it - methods.begin())];
    cell.first += s.error;
    ++cell.second;
  }
  require(!sums.empty(), "rank table needs at least one score");

  RankTable t;
  t.methods = methods;
  t.average_rank.assign(methods.size(), 0.0);
  for (const auto& [cls, cells] : sums) {
    RankTable::Row row;
    row.class_id = cls;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (cells[m].second == 0)
        fail(ErrorKind::InvalidArgument, "class " + std::to_string(cls) + " has no result for method '" + methods[m] + "'");
      row.mean_error.push_back(cells[m].first / cells[m].second);
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      int rank = 1;
      for (double other : row.mean_error)
        if (other < row.mean_error[m]) ++rank;
      row.rank.push_back(rank);
      t.average_rank[m] += rank;
    }
    t.rows.push_back(std::move(row));
  }
  for (double& r : t.average_rank) r /= static_cast<double>(t.rows.size());
  return t;
}

std::string RankTable::ranks_csv() const {
  std::string out = "class_id";
  for (const auto& m : methods) out += "," + m;
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.class_id);
    for (int k : r.rank) out += "," + std::to_string(k);
    out += "\n";
  }
  out += "average";
  for (double a : average_rank) out += fmt(",%.3f", a);
  return out + "\n";
}

std::string RankTable::errors_csv() const {
  std::string out = "class_id";
  for (const auto& m : methods) out += "," + m;
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.class_id);
    for (double e : r.mean_error) out += fmt(",%.2E", e);
    out += "\n";
  }
  return out;
}

std::string RankTable::to_text() const {
  std::string out = fmt("%-20s", "Function");
  for (const auto& m : methods) out += fmt(" %12s", m.c_str());
  out += "\n";
  for (const auto& r : rows) {
    out += fmt("%-20s", fmt("f%d %s", r.class_id, function_class(r.class_id).name.c_str()).c_str());
    for (std::size_t m = 0; m < methods.size(); ++m) out += fmt(" %4d %.1E", r.rank[m], r.mean_error[m]);
    out += "\n";
  }
  out += fmt("%-20s", "Average rank");
  for (double a : average_rank) out += fmt(" %12.3f", a);
  return out + "\n";
}

std::string BenchResult::records_csv() const {
  std::string out = "class_id,instance_seed,method,run,chosen,best_error,sampling_evals,solving_evals\n";
  for (const auto& r : records)
    out += fmt("%d,%llu,%s,%d,%s,", r.instance.class_id, static_cast<unsigned long long>(r.instance.seed),
               r.method.c_str(), r.run, r.chosen ? std::string(algorithm_name(*r.chosen)).c_str() : "-") +
           g17(r.best_error) + fmt(",%ld,%ld\n", r.sampling_evals, r.solving_evals);
  return out;
}

BenchResult run_benchmark(const Dataset& dataset, const AlgorithmPredictor& predict, const BenchConfig& config) {
  require(config.runs >= 1, "benchmark needs at least one run per method");
  const auto& m = dataset.manifest;
  const auto idx = m.indices(config.split);
  if (idx.empty()) fail(ErrorKind::InvalidArgument, "split '" + to_string(config.split) + "' is empty");
  const SampleMatrix samples = m.sampling.materialize();
  if (samples.hash() != m.sample_hash) fail(ErrorKind::Format, "manifest sample hash does not match its sampling parameters");
  const long total = config.total_budget > 0 ? config.total_budget : 10000L * m.sampling.dim;

  std::vector<ProblemInstance> instances;
  for (std::size_t i : idx) instances.push_back(make_instance(m.entries[i].instance, m.sampling.bounds));

  const std::size_t methods = kBenchMethods.size();
  const auto runs = static_cast<std::size_t>(config.runs);
  BenchResult out;
  out.records.resize(idx.size() * methods * runs);
  parallel_for(out.records.size(), config.workers, [&](std::size_t t) {
    const std::size_t i = t / (methods * runs);
    const std::size_t method = (t / runs) % methods;
    const int run = static_cast<int>(t % runs);
    const auto& inst = instances[i];
    const auto& d = inst.descriptor();
    const std::uint64_t tag = method == 0 ? kTagPortfolio : static_cast<std::uint64_t>(method - 1);
    const std::uint64_t seed = derive_seed(config.seed, {kTagBench, static_cast<std::uint64_t>(d.class_id),
                                                         static_cast<std::uint64_t>(d.dim), d.seed, tag,
                                                         static_cast<std::uint64_t>(run)});
    BenchRecord& rec = out.records[t];
    rec.instance = d;
    rec.method = kBenchMethods[method];
    rec.run = run;
    if (method == 0) {
      const auto p = select_and_solve(inst, total, predict, samples, seed);
      rec.best_error = p.best_error;
      rec.sampling_evals = p.sampling_evals;
      rec.solving_evals = p.solving_evals;
      rec.chosen = p.chosen;
    } else {
      BudgetedProblem problem(inst, total);
      const auto r = run_algorithm(kAlgorithms[method - 1], problem, seed);
      rec.best_error = r.best_error;
      rec.solving_evals = r.evals_used;
    }
  });

  std::vector<MethodScore> scores;
  for (const auto& r : out.records) scores.push_back({r.instance.class_id, r.method, r.best_error});
  out.table = rank_table(kBenchMethods, scores);
  return out;
}

}  // namespace bbsel
