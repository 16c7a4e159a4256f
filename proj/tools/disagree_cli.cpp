/*
 * Copyright 2026 The disagree Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: train, explain, compare, heatmap, dichotomy and
// run (all of the above in one go).
//
// Failures print one line to stderr, "error: <category>: <message>", and
// exit nonzero (2 for usage errors, 1 otherwise).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "disagree/disagree.hpp"

namespace fs = std::filesystem;
using namespace disagree;

namespace {

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::vector<std::size_t> k_values;
  std::optional<std::size_t> limit;
  std::optional<int> threads;
};

void AddOverrides(CLI::App* cmd, CommonOverrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (beats DISAGREE_SEED)");
  cmd->add_option("--methods", o.methods, "Explainer ids")->delimiter(',');
  cmd->add_option("--k", o.k_values, "Top-k values")->delimiter(',');
  cmd->add_option("--limit", o.limit, "Explain at most this many instances");
  cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

// Precedence: flag, then DISAGREE_SEED, then the config file.
void ApplyOverrides(ExperimentConfig& cfg, const CommonOverrides& o) {
  ApplySeedOverride(cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& id : o.methods) cfg.methods.push_back(MethodFromId(id));
  }
  if (!o.k_values.empty()) cfg.k_values = o.k_values;
  if (o.limit) cfg.max_instances = *o.limit;
  if (o.threads) cfg.threads = *o.threads;
  cfg.Validate();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

void WriteJson(const fs::path& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

nlohmann::json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void MakeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string());
}

void WriteAttributions(const fs::path& dir, const std::vector<Method>& methods,
                       const std::vector<std::vector<Attribution>>& attrs,
                       std::size_t d) {
  MakeDirs(dir);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<Attribution> rows;
    for (const auto& inst : attrs) rows.push_back(inst[m]);
    WriteAttributionCsv((dir / (std::string(MethodId(methods[m])) + ".csv")).string(),
                        rows, d);
  }
}

void WriteComparison(const fs::path& dir,
                     const std::vector<PairwiseMatrix>& matrices) {
  MakeDirs(dir);
  std::ostringstream report;
  WriteReportCsv(report, BuildReportRows(matrices));
  WriteText(dir / "report.csv", report.str());
  WriteJson(dir / "matrices.json", MatricesToJson(matrices));
}

void WriteHeatmaps(const fs::path& dir,
                   const std::vector<PairwiseMatrix>& matrices) {
  MakeDirs(dir);
  for (const auto& m : matrices) {
    WriteText(dir / HeatmapFileName(m), RenderHeatmapSvg(m));
  }
}

std::string DichotomyCsv(const std::vector<PairSummary>& pairs) {
  std::ostringstream out;
  out << "method_a,method_b,mean_rank_correlation,stderr,both_gradient,strong\n";
  for (const auto& p : pairs) {
    out << p.method_a << ',' << p.method_b << ',' << FormatReal(p.mean) << ','
        << FormatReal(p.std_error) << ',' << p.both_gradient << ',' << p.strong
        << '\n';
  }
  return out.str();
}

int CmdTrain(const std::string& config_path, const CommonOverrides& o,
             const fs::path& out_path) {
  ExperimentConfig cfg = LoadExperimentConfig(config_path);
  ApplyOverrides(cfg, o);
  const PreparedData data = PrepareData(cfg);
  const ModelBundle bundle = TrainModel(cfg, data);
  if (out_path.has_parent_path()) MakeDirs(out_path.parent_path());
  WriteJson(out_path, ModelToJson(bundle));
  RunManifest manifest;
  manifest.config = ExperimentConfigToJson(cfg);
  manifest.config_hash = ConfigHash(cfg);
  manifest.model_kind = ModelKindName(bundle.model);
  manifest.n_rows = data.n_total;
  manifest.n_train = data.train.n();
  manifest.n_test = data.test.n();
  manifest.train_accuracy = Accuracy(bundle.model, data.train);
  manifest.test_accuracy = Accuracy(bundle.model, data.test);
  fs::path manifest_path = out_path;
  manifest_path.replace_extension(".manifest.json");
  WriteJson(manifest_path, manifest.ToJson());
  std::printf("test_accuracy %.4f\n", manifest.test_accuracy);
  return 0;
}

struct ExplainArgs {
  std::string config;
  std::string model;
  std::string data;
  std::string schema;
  std::string out;
};

int CmdExplain(const ExplainArgs& args, const CommonOverrides& o) {
  const ModelBundle bundle = ModelFromJson(ReadJson(args.model));
  ExperimentConfig cfg;
  if (!args.config.empty()) cfg = LoadExperimentConfig(args.config);
  ApplyOverrides(cfg, o);

  Matrix X;
  if (!args.data.empty()) {
    const FeatureSchema schema =
        args.schema.empty() ? bundle.schema : LoadSchema(args.schema);
    X = bundle.standardizer.Apply(LoadCsv(args.data, schema).X);
  } else {
    if (args.config.empty()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "explain needs --data or --config to locate instances");
    }
    X = PrepareData(cfg).test.X;
  }
  if (static_cast<std::size_t>(X.cols()) != bundle.schema.d()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "dataset does not match the model's feature count");
  }
  const std::size_t n = std::min<std::size_t>(
      X.rows(), cfg.max_instances.value_or(X.rows()));
  const auto attrs =
      ExplainInstances(bundle.model, X.topRows(n), cfg.methods,
                       MakeExplainerConfigs(cfg, bundle), cfg.seed, cfg.threads);
  WriteAttributions(args.out, cfg.methods, attrs, bundle.schema.d());
  std::printf("explained %zu instances with %zu methods\n", n,
              cfg.methods.size());
  return 0;
}

struct CompareArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> metrics;
  std::vector<std::size_t> k_values;
  std::vector<std::size_t> features;
  std::string basis = "magnitude";
  std::string out;
};

int CmdCompare(const CompareArgs& args) {
  if (args.inputs.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "compare needs at least two attribution files");
  }
  std::vector<std::string> names;
  std::vector<AttributionTable> tables;
  for (const auto& path : args.inputs) {
    names.push_back(fs::path(path).stem().string());
    tables.push_back(ReadAttributionCsv(path));
  }
  const auto& first = tables.front();
  if (first.size() == 0) {
    throw Error(ErrorKind::kInvalidArgument, args.inputs[0] + " has no rows");
  }
  for (std::size_t t = 1; t < tables.size(); ++t) {
    if (tables[t].instance_index != first.instance_index) {
      throw Error(ErrorKind::kInvalidArgument,
                  "instance mismatch between " + args.inputs[0] + " and " +
                      args.inputs[t]);
    }
  }
  std::vector<std::vector<Vector>> values(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (const auto& t : tables) values[i].push_back(t.values[i]);
  }
  MetricPlan plan;
  if (!args.metrics.empty()) {
    plan.metrics.clear();
    for (const auto& m : args.metrics) plan.metrics.push_back(MetricFromName(m));
  }
  const std::size_t d = static_cast<std::size_t>(first.values[0].size());
  plan.k_values = args.k_values.empty() ? DefaultKGrid(d) : args.k_values;
  if (!args.features.empty()) plan.subset = FeatureSubset{args.features};
  if (args.basis != "magnitude" && args.basis != "signed") {
    throw Error(ErrorKind::kInvalidArgument,
                "--ranking-basis must be 'magnitude' or 'signed'");
  }
  plan.basis = args.basis == "magnitude" ? RankingBasis::kMagnitude
                                         : RankingBasis::kSigned;
  const Evaluation eval = EvaluateAttributions(names, values, plan);
  WriteComparison(args.out, eval.matrices);
  std::printf("compared %zu methods over %zu instances\n", names.size(),
              first.size());
  return 0;
}

int CmdHeatmap(const std::string& matrices_path, const std::string& out) {
  WriteHeatmaps(out, MatricesFromJson(ReadJson(matrices_path)));
  return 0;
}

int CmdDichotomy(const std::string& matrices_path, double threshold) {
  std::fputs(DichotomyCsv(DichotomyReport(
                              MatricesFromJson(ReadJson(matrices_path)),
                              threshold))
                 .c_str(),
             stdout);
  return 0;
}

int CmdRun(const std::string& config_path, const CommonOverrides& o,
           const fs::path& out) {
  ExperimentConfig cfg = LoadExperimentConfig(config_path);
  ApplyOverrides(cfg, o);
  const RunResult r = RunExperiment(cfg);
  MakeDirs(out);
  WriteJson(out / "model.json", ModelToJson(r.model));
  std::vector<std::vector<Attribution>> attrs;
  for (const auto& rec : r.records) attrs.push_back(rec.attributions);
  WriteAttributions(out / "attributions", cfg.methods, attrs, r.model.schema.d());
  WriteComparison(out, r.matrices);
  std::ostringstream records;
  WriteRecordsCsv(records, r.records, MethodIds(cfg.methods));
  WriteText(out / "records.csv", records.str());
  WriteHeatmaps(out / "heatmaps", r.matrices);
  if (FindMatrix(r.matrices, MetricId::kRankCorrelation, "all")) {
    WriteText(out / "dichotomy.csv", DichotomyCsv(DichotomyReport(r.matrices)));
  }
  WriteJson(out / "manifest.json", r.manifest.ToJson());
  std::printf("test_accuracy %.4f, explained %zu instances, %zu matrices\n",
              r.manifest.test_accuracy, r.manifest.n_explained,
              r.matrices.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-attribution disagreement laboratory"};
  app.require_subcommand(1);

  CommonOverrides overrides;
  std::string config, out, matrices;
  double threshold = 0.5;

  auto* train = app.add_subcommand("train", "Train a model from a config");
  train->add_option("--config", config, "Experiment config JSON")->required();
  train->add_option("--out", out, "Model JSON path")->required();
  AddOverrides(train, overrides);

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Write attribution CSVs");
  explain->add_option("--model", explain_args.model, "Model JSON")->required();
  explain->add_option("--config", explain_args.config, "Experiment config JSON");
  explain->add_option("--data", explain_args.data, "Dataset CSV to explain");
  explain->add_option("--schema", explain_args.schema, "Schema JSON for --data");
  explain->add_option("--out", explain_args.out, "Output directory")->required();
  AddOverrides(explain, overrides);

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Score attribution files");
  compare->add_option("inputs", compare_args.inputs, "Attribution CSVs")
      ->required();
  compare->add_option("--metrics", compare_args.metrics, "Metric ids")
      ->delimiter(',');
  compare->add_option("--k", compare_args.k_values, "Top-k values")
      ->delimiter(',');
  compare->add_option("--features", compare_args.features,
                      "Feature subset for subset metrics")
      ->delimiter(',');
  compare->add_option("--ranking-basis", compare_args.basis,
                      "magnitude or signed");
  compare->add_option("--out", compare_args.out, "Output directory")->required();

  auto* heatmap = app.add_subcommand("heatmap", "Render matrices as SVG");
  heatmap->add_option("--matrices", matrices, "matrices.json")->required();
  heatmap->add_option("--out", out, "Output directory")->required();

  auto* dichotomy =
      app.add_subcommand("dichotomy", "Rank method pairs by rank correlation");
  dichotomy->add_option("--matrices", matrices, "matrices.json")->required();
  dichotomy->add_option("--threshold", threshold, "Strong-agreement cutoff");

  auto* run = app.add_subcommand("run", "Train, explain, compare and plot");
  run->add_option("--config", config, "Experiment config JSON")->required();
  run->add_option("--out", out, "Output directory")->required();
  AddOverrides(run, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    for (char& c : message) {
      if (c == '\n') c = ' ';
    }
    std::fprintf(stderr, "error: usage: %s\n", message.c_str());
    return 2;
  }

  try {
    if (*train) return CmdTrain(config, overrides, out);
    if (*explain) return CmdExplain(explain_args, overrides);
    if (*compare) return CmdCompare(compare_args);
    if (*heatmap) return CmdHeatmap(matrices, out);
    if (*dichotomy) return CmdDichotomy(matrices, threshold);
    if (*run) return CmdRun(config, overrides, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n",
                 std::string(ErrorKindName(e.kind())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 1;
}
