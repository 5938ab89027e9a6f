#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "awe/awe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace awe;

#ifndef AWE_VERSION
#define AWE_VERSION "unknown"
#endif

namespace {

constexpr const char* kDataEnv = "AWE_DATA_DIR";

struct Common {
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

// A dataset argument is a path, or a name looked up under $AWE_DATA_DIR.
fs::path resolve_dataset(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  if (const char* root = std::getenv(kDataEnv)) {
    const fs::path candidate = fs::path(root) / arg;
    if (fs::exists(candidate)) return candidate;
  }
  throw ValidationError("dataset not found: " + arg + " (not a path, and not under $" + kDataEnv + ")");
}

CollectionFormat parse_format(const std::string& name, const fs::path& dir) {
  if (name == "benchmark") return CollectionFormat::Benchmark;
  if (name == "edgelist") return CollectionFormat::EdgeListDir;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename().string().ends_with("_A.txt")) return CollectionFormat::Benchmark;
  return CollectionFormat::EdgeListDir;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_manifest(const fs::path& file, const std::string& subcommand, const std::vector<std::string>& args,
                    json params, json inputs, json outputs) {
  json m = {{"subcommand", subcommand},
            {"command_line", args},
            {"parameters", std::move(params)},
            {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)},
            {"tool_version", AWE_VERSION}};
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << m.dump(2) << '\n';
}

std::vector<double> log_x(const std::vector<std::size_t>& xs) {
  std::vector<double> out;
  for (auto x : xs) out.push_back(std::log10(static_cast<double>(x)));
  return out;
}

}  // namespace

int run(std::vector<std::string> args);

namespace {

// ---- enumerate ----

struct EnumerateArgs {
  int length = 3;
  std::string out;
};

void cmd_enumerate(const EnumerateArgs& a, const std::vector<std::string>& argv) {
  const WalkVocabulary vocab(a.length);
  if (a.out.empty()) {
    vocab.dump(std::cout);
    return;
  }
  const fs::path file(a.out);
  if (file.has_parent_path()) prepare_out_dir(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  vocab.dump(out);
  out.close();
  write_manifest(fs::path(file).concat(".manifest.json"), "enumerate", argv,
                 {{"l", a.length}, {"vocabulary_size", vocab.size()}}, json::object(), {file.string()});
}

// ---- embed-fb ----

struct EmbedFbArgs {
  std::string dataset, format = "auto", out = "out", mode = "sampled";
  int length = 10;
  double epsilon = 0.1, delta = 0.05;
  double budget = kDefaultExactBudget;
};

void cmd_embed_fb(const EmbedFbArgs& a, const Common& c, const CLI::App& sub, const std::vector<std::string>& argv) {
  if (a.mode == "exact" && (sub.count("--eps") || sub.count("--delta")))
    throw ValidationError("--eps and --delta apply to sampled mode only");
  const fs::path data = resolve_dataset(a.dataset);
  const WalkVocabulary vocab(a.length);
  SamplingPlan plan;
  if (a.mode == "sampled") plan = make_plan(a.epsilon, a.delta, vocab.size());

  const auto collection = load_collection(data, parse_format(a.format, data));
  std::vector<RandomWalkGraph> rwgs;
  rwgs.reserve(collection.size());
  for (const auto& g : collection.graphs) rwgs.emplace_back(g);
  if (a.mode == "exact")
    for (std::size_t g = 0; g < rwgs.size(); ++g)
      if (exact_walk_estimate(rwgs[g], a.length) > a.budget)
        throw ComputeError("graph " + std::to_string(g) + ": exact embedding at l=" + std::to_string(a.length) +
                           " exceeds the enumeration budget; use --mode sampled");

  EmbeddingTable table{a.length, a.mode, std::vector<std::vector<double>>(rwgs.size())};
  parallel_for(rwgs.size(), c.threads, [&](std::size_t g) {
    table.rows[g] = a.mode == "exact" ? exact_embedding(rwgs[g], vocab, a.budget).values
                                      : sampled_embedding(rwgs[g], vocab, plan, c.seed, g).values;
  });

  prepare_out_dir(a.out);
  const std::string stem = "fb_" + a.mode + "_l" + std::to_string(a.length);
  const fs::path out(a.out);
  const auto csv = out / (stem + ".csv"), js = out / (stem + ".json"), labels = out / "labels.txt";
  write_embeddings_csv(table, csv);
  write_embeddings_json(table, js);
  json outputs = {csv.string(), js.string()};
  if (collection.has_labels) {
    write_labels(collection.labels, labels);
    outputs.push_back(labels.string());
  }
  json params = {{"l", a.length}, {"mode", a.mode}, {"vocabulary_size", vocab.size()}, {"seed", c.seed},
                 {"threads", c.threads}, {"graphs", collection.size()}};
  if (a.mode == "sampled") {
    params["eps"] = a.epsilon;
    params["delta"] = a.delta;
    params["m"] = plan.samples;
    std::cout << "sampling " << plan.samples << " walks per graph\n";
  } else {
    params["budget"] = a.budget;
  }
  write_manifest(out / (stem + ".manifest.json"), "embed-fb", argv, params, {data.string()}, outputs);
}

// ---- embed-dd ----

struct EmbedDdArgs {
  std::string dataset, format = "auto", out = "out", sampler = "uniform";
  int length = 10;
  std::size_t walks_per_node = 100;
  TrainConfig train;
};

void cmd_embed_dd(EmbedDdArgs a, const Common& c, const CLI::App& sub, const std::vector<std::string>& argv) {
  if (a.train.full_softmax && (sub.count("--candidates") || sub.count("--sampler")))
    throw ValidationError("--candidates and --sampler apply to sampled softmax only");
  a.train.sampler = a.sampler == "log-uniform" ? CandidateSampler::LogUniform : CandidateSampler::Uniform;
  a.train.seed = c.seed;
  const fs::path data = resolve_dataset(a.dataset);
  const WalkVocabulary vocab(a.length);
  a.train.validate(vocab.size());
  if (a.walks_per_node < 2 * static_cast<std::size_t>(a.train.window) + 1)
    throw ValidationError("--walks must be at least 2 * window + 1 (" + std::to_string(2 * a.train.window + 1) + ")");

  const auto collection = load_collection(data, parse_format(a.format, data));
  std::vector<Corpus> corpora(collection.size());
  parallel_for(collection.size(), c.threads, [&](std::size_t g) {
    corpora[g] = build_corpus(RandomWalkGraph(collection.graphs[g]), vocab, a.walks_per_node, c.seed, g);
  });
  TrainReport report;
  const auto params = train(corpora, vocab, a.train, &report);

  EmbeddingTable table{a.length, "data-driven", {}};
  for (std::size_t g = 0; g < params.graph_count; ++g) {
    const auto row = params.graph_row(g);
    table.rows.emplace_back(row.begin(), row.end());
  }
  prepare_out_dir(a.out);
  const std::string stem = "dd_l" + std::to_string(a.length);
  const fs::path out(a.out);
  const auto csv = out / (stem + ".csv"), js = out / (stem + ".json"), ckpt = out / (stem + ".ckpt");
  write_embeddings_csv(table, csv);
  write_embeddings_json(table, js);
  save_checkpoint(params, ckpt);
  json outputs = {csv.string(), js.string(), ckpt.string()};
  if (collection.has_labels) {
    write_labels(collection.labels, out / "labels.txt");
    outputs.push_back((out / "labels.txt").string());
  }
  const auto& t = a.train;
  json params_json = {{"l", a.length},
                      {"vocabulary_size", vocab.size()},
                      {"walks_per_node", a.walks_per_node},
                      {"window", t.window},
                      {"batch", t.batch_size},
                      {"epochs", t.epochs},
                      {"iterations", t.iterations},
                      {"d_a", t.walk_dim},
                      {"d_g", t.graph_dim},
                      {"learning_rate", t.learning_rate},
                      {"final_learning_rate", t.final_learning_rate},
                      {"softmax", t.full_softmax ? "full" : "sampled"},
                      {"seed", c.seed},
                      {"threads", c.threads},
                      {"graphs", collection.size()},
                      {"epoch_losses", report.epoch_losses}};
  if (!t.full_softmax) {
    params_json["candidates"] = t.candidates;
    params_json["sampler"] = a.sampler;
  }
  write_manifest(out / (stem + ".manifest.json"), "embed-dd", argv, params_json, {data.string()}, outputs);
}

// ---- classify ----

struct ClassifyArgs {
  std::vector<std::string> embeddings, kernels;
  std::string labels, out = "out";
  std::vector<double> c_grid;
  int folds = 10, repeats = 10;
};

void cmd_classify(const ClassifyArgs& a, const Common& c, const std::vector<std::string>& argv) {
  EvalConfig cfg;
  cfg.folds = a.folds;
  cfg.repeats = a.repeats;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  if (!a.c_grid.empty()) cfg.c_grid = a.c_grid;
  if (!a.kernels.empty()) {
    cfg.kernels.clear();
    for (const auto& k : a.kernels) cfg.kernels.push_back(KernelSpec::parse(k));
  }
  for (double C : cfg.c_grid)
    if (!(C > 0.0)) throw ValidationError("C values must be positive");
  if (!fs::exists(a.labels)) throw ValidationError("labels file not found: " + a.labels);
  for (const auto& e : a.embeddings)
    if (!fs::exists(e)) throw ValidationError("embeddings file not found: " + e);

  const auto raw = read_labels(a.labels);
  const auto labels = detail::remap_labels(std::vector<long long>(raw.begin(), raw.end()));
  std::vector<EmbeddingVariant> variants;
  for (const auto& e : a.embeddings) {
    const auto table = read_embeddings(e);
    if (table.rows.size() != labels.size())
      throw ValidationError(e + " has " + std::to_string(table.rows.size()) + " graphs, labels file has " +
                            std::to_string(labels.size()));
    variants.push_back(make_variant(fs::path(e).stem().string(), table.rows, c.threads));
  }
  const auto report = cross_validate(labels, variants, cfg);

  prepare_out_dir(a.out);
  const fs::path file = fs::path(a.out) / "report.json";
  auto doc = to_json(report, cfg);
  doc.erase("seconds");  // kept in the manifest so the report is reproducible
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << doc.dump(2) << '\n';
  out.close();
  std::cout << "accuracy " << report.mean << " +- " << report.std << " over " << report.folds.size() << " folds\n";
  json inputs = a.embeddings;
  inputs.push_back(a.labels);
  auto params = doc["config"];
  params["threads"] = c.threads;
  params["seconds"] = report.seconds;
  write_manifest(fs::path(a.out) / "report.manifest.json", "classify", argv, params, inputs, {file.string()});
}

// ---- gram ----

struct GramArgs {
  std::string embeddings, kernel = "inner", out = "out";
};

void cmd_gram(const GramArgs& a, const Common& c, const std::vector<std::string>& argv) {
  const auto spec = KernelSpec::parse(a.kernel);
  if (!fs::exists(a.embeddings)) throw ValidationError("embeddings file not found: " + a.embeddings);
  const auto table = read_embeddings(a.embeddings);
  const auto g = gram(table.rows, spec, table.mode + " l=" + std::to_string(table.length), true, c.threads);
  prepare_out_dir(a.out);
  const fs::path file = fs::path(a.out) / (fs::path(a.embeddings).stem().string() + "_gram.csv");
  export_gram(g, file);
  write_manifest(fs::path(file).replace_extension(".manifest.json"), "gram", argv, {{"kernel", spec.to_string()}},
                 {a.embeddings}, {file.string(), fs::path(file).replace_extension(".json").string()});
}

// ---- scalability ----

struct ScalabilityArgs {
  ScalabilitySettings settings;
  std::string out = "out";
};

void cmd_scalability(ScalabilityArgs a, const Common& c, const std::vector<std::string>& argv) {
  auto& s = a.settings;
  s.seed = c.seed;
  s.train.seed = c.seed;
  for (auto n : s.sizes)
    if (n < 1) throw ValidationError("graph sizes must be positive");
  for (double mu : s.mus)
    if (!(mu >= 0.0)) throw ValidationError("mean degrees must be non-negative");
  const WalkVocabulary vocab(s.walk_length);
  s.train.validate(vocab.size());
  const auto rows = scalability_run(s);

  prepare_out_dir(a.out);
  const fs::path out(a.out);
  const auto csv = out / "scalability.csv", plot = out / "scalability_plot.json";
  std::ofstream table(csv);
  if (!table) throw ValidationError("cannot write " + csv.string());
  table << "n,mu,mean_seconds,std_seconds\n";
  for (const auto& r : rows)
    table << r.n << ',' << format_double(r.mu) << ',' << format_double(r.mean_seconds) << ','
          << format_double(r.std_seconds) << '\n';
  table.close();

  json series = json::array();
  for (double mu : s.mus) {
    std::vector<std::size_t> xs;
    std::vector<double> ys, err;
    for (const auto& r : rows)
      if (r.mu == mu) {
        xs.push_back(r.n);
        ys.push_back(r.mean_seconds);
        err.push_back(r.std_seconds);
      }
    series.push_back({{"mu", mu}, {"x", xs}, {"log10_x", log_x(xs)}, {"y", ys}, {"y_std", err}});
  }
  json doc = {{"x_label", "number of nodes"}, {"x_scale", "log"}, {"y_label", "seconds"}, {"series", series}};
  std::ofstream p(plot);
  if (!p) throw ValidationError("cannot write " + plot.string());
  p << doc.dump(2) << '\n';
  p.close();

  json params = {{"sizes", s.sizes}, {"mu", s.mus}, {"repetitions", s.repetitions}, {"l", s.walk_length},
                 {"walks_per_node", s.walks_per_node}, {"epochs", s.train.epochs},
                 {"iterations", s.train.iterations}, {"batch", s.train.batch_size}, {"d_a", s.train.walk_dim},
                 {"d_g", s.train.graph_dim}, {"seed", c.seed}};
  write_manifest(out / "scalability.manifest.json", "scalability", argv, params, json::array(),
                 {csv.string(), plot.string()});
}

void cmd_replay(const std::string& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ValidationError("cannot read manifest " + manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(manifest + ": " + e.what());
  }
  if (!m.contains("command_line")) throw ValidationError(manifest + " has no command line");
  const int code = run(m["command_line"].get<std::vector<std::string>>());
  if (code != 0) std::exit(code);
}

}  // namespace

// `args` excludes the program name.
int run(std::vector<std::string> args) {
  CLI::App app{"Anonymous walk embeddings of graphs and kernel SVM classification"};
  app.set_version_flag("--version", AWE_VERSION);
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--threads", common.threads, "worker threads (1 is bit-reproducible)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "random seed");
  };
  auto add_dataset = [](CLI::App* sub, std::string& dataset, std::string& format) {
    sub->add_option("--dataset", dataset, "dataset directory, or name under $AWE_DATA_DIR")->required();
    sub->add_option("--format", format, "collection format")
        ->check(CLI::IsMember({"auto", "benchmark", "edgelist"}));
  };

  EnumerateArgs en;
  auto* s_en = app.add_subcommand("enumerate", "list all anonymous walks of one length");
  s_en->add_option("--l", en.length, "walk length in edges")->required()->check(CLI::Range(1, 16));
  s_en->add_option("--out", en.out, "output file (stdout if omitted)");

  EmbedFbArgs fb;
  auto* s_fb = app.add_subcommand("embed-fb", "feature-based embeddings: anonymous walk distributions");
  add_dataset(s_fb, fb.dataset, fb.format);
  s_fb->add_option("--l", fb.length, "walk length in edges")->check(CLI::Range(1, 16));
  s_fb->add_option("--mode", fb.mode)->check(CLI::IsMember({"exact", "sampled"}));
  s_fb->add_option("--eps", fb.epsilon, "L1 error bound")->check(CLI::PositiveNumber);
  s_fb->add_option("--delta", fb.delta, "failure probability")->check(CLI::Range(0.0, 1.0));
  s_fb->add_option("--budget", fb.budget, "walk enumeration budget for exact mode")->check(CLI::PositiveNumber);
  s_fb->add_option("--out", fb.out, "output directory");
  add_common(s_fb);

  EmbedDdArgs dd;
  auto* s_dd = app.add_subcommand("embed-dd", "data-driven embeddings trained on walk co-occurrence");
  add_dataset(s_dd, dd.dataset, dd.format);
  s_dd->add_option("--l", dd.length, "walk length in edges")->check(CLI::Range(1, 16));
  s_dd->add_option("--walks", dd.walks_per_node, "walks sampled per node")->check(CLI::PositiveNumber);
  s_dd->add_option("--window", dd.train.window, "context half-width")->check(CLI::PositiveNumber);
  s_dd->add_option("--batch", dd.train.batch_size)->check(CLI::PositiveNumber);
  s_dd->add_option("--epochs", dd.train.epochs)->check(CLI::NonNegativeNumber);
  s_dd->add_option("--iterations", dd.train.iterations, "batch steps per epoch")->check(CLI::NonNegativeNumber);
  s_dd->add_option("--walk-dim", dd.train.walk_dim)->check(CLI::PositiveNumber);
  s_dd->add_option("--graph-dim", dd.train.graph_dim)->check(CLI::PositiveNumber);
  s_dd->add_option("--lr", dd.train.learning_rate, "initial learning rate")->check(CLI::PositiveNumber);
  s_dd->add_option("--final-lr", dd.train.final_learning_rate)->check(CLI::PositiveNumber);
  s_dd->add_option("--candidates", dd.train.candidates, "sampled softmax candidates")->check(CLI::PositiveNumber);
  s_dd->add_option("--sampler", dd.sampler)->check(CLI::IsMember({"uniform", "log-uniform"}));
  s_dd->add_flag("--full-softmax", dd.train.full_softmax);
  s_dd->add_option("--out", dd.out, "output directory");
  add_common(s_dd);

  ClassifyArgs cl;
  auto* s_cl = app.add_subcommand("classify", "cross-validated kernel SVM accuracy");
  s_cl->add_option("--embeddings", cl.embeddings, "embedding files; each is one candidate on the grid")
      ->required()
      ->expected(1, -1);
  s_cl->add_option("--labels", cl.labels, "one class id per line")->required();
  s_cl->add_option("--kernel", cl.kernels, "inner, poly[:c:degree] or rbf:sigma; repeatable")->expected(1, -1);
  s_cl->add_option("--C", cl.c_grid, "SVM C grid")->expected(1, -1);
  s_cl->add_option("--folds", cl.folds)->check(CLI::Range(3, 1000));
  s_cl->add_option("--repeats", cl.repeats)->check(CLI::PositiveNumber);
  s_cl->add_option("--out", cl.out, "output directory");
  add_common(s_cl);

  GramArgs gr;
  auto* s_gr = app.add_subcommand("gram", "export a Gram matrix");
  s_gr->add_option("--embeddings", gr.embeddings)->required();
  s_gr->add_option("--kernel", gr.kernel);
  s_gr->add_option("--out", gr.out, "output directory");
  add_common(s_gr);

  ScalabilityArgs sc;
  auto* s_sc = app.add_subcommand("scalability", "time data-driven embedding on random graphs");
  s_sc->add_option("--sizes", sc.settings.sizes)->expected(1, -1);
  s_sc->add_option("--mu", sc.settings.mus, "mean degrees")->expected(1, -1);
  s_sc->add_option("--reps", sc.settings.repetitions)->check(CLI::PositiveNumber);
  s_sc->add_option("--l", sc.settings.walk_length)->check(CLI::Range(1, 16));
  s_sc->add_option("--walks", sc.settings.walks_per_node)->check(CLI::PositiveNumber);
  s_sc->add_option("--iterations", sc.settings.train.iterations)->check(CLI::NonNegativeNumber);
  s_sc->add_option("--dims", sc.settings.train.walk_dim, "d_a = d_g")->check(CLI::PositiveNumber);
  s_sc->add_option("--out", sc.out, "output directory");
  add_common(s_sc);

  std::string manifest;
  auto* s_re = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  s_re->add_option("manifest", manifest)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s_en) cmd_enumerate(en, args);
    else if (*s_fb) cmd_embed_fb(fb, common, *s_fb, args);
    else if (*s_dd) cmd_embed_dd(dd, common, *s_dd, args);
    else if (*s_cl) cmd_classify(cl, common, args);
    else if (*s_gr) cmd_gram(gr, common, args);
    else if (*s_sc) {
      sc.settings.train.graph_dim = sc.settings.train.walk_dim;
      cmd_scalability(sc, common, args);
    } else if (*s_re) cmd_replay(manifest);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}
