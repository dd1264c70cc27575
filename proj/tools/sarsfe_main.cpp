// sarsfe: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sarsfe/checkpoint.hpp"
#include "sarsfe/config.hpp"
#include "sarsfe/error.hpp"
#include "sarsfe/evaluate.hpp"
#include "sarsfe/log.hpp"
#include "sarsfe/parallel.hpp"
#include "sarsfe/sar_data.hpp"
#include "sarsfe/svg.hpp"
#include "sarsfe/tensor_io.hpp"
#include "sarsfe/trainer.hpp"

namespace fs = std::filesystem;
using namespace sarsfe;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void wrote(const fs::path& path) { std::cout << "wrote " << path.string() << "\n"; }

std::vector<std::uint32_t> parse_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parameter, "bad integer list '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::Parameter, "empty integer list");
  return out;
}

DatasetManifest dataset_from(const std::string& manifest, const std::string& dir) {
  if (!manifest.empty()) {
    if (!fs::exists(manifest)) throw Error(ErrorKind::File, "manifest not found: " + manifest);
    return load_manifest(manifest);
  }
  if (!dir.empty()) return build_manifest(dir);
  throw Error(ErrorKind::Parameter, "one of --manifest or --data-dir is required");
}

void print_counts(const DatasetManifest& m) {
  for (const auto& [label, count] : m.class_counts) std::cout << "  " << label << ": " << count << "\n";
  std::cout << "  total: " << m.size() << "\n";
}

std::string curve_svg(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves, std::uint32_t k) {
  std::vector<LineSeries> series;
  for (const auto& [name, curve] : curves) {
    LineSeries s{name, {}, {}, {}};
    for (const auto& p : curve) {
      s.x.push_back(p.shots);
      s.y.push_back(100.0 * p.mean_accuracy);
      s.err.push_back(100.0 * p.std_accuracy);
    }
    series.push_back(std::move(s));
  }
  ChartOptions o;
  o.title = "Few-shot accuracy (k-NN, k = " + std::to_string(k) + ")";
  o.x_label = "labeled images per class";
  o.y_label = "accuracy (%)";
  o.log_x = true;
  return svg_line_chart(series, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised SAR feature extractor"};
  app.require_subcommand(1);
  unsigned threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (default: SARSFE_THREADS or all cores)");
  app.add_flag("--quiet", quiet, "Only print warnings and errors");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic speckled-target dataset");
  SynthSpec spec;
  std::string size = "64,64";
  std::string synth_out;
  bool force = false;
  synth->add_option("--classes", spec.classes, "Number of classes (1-8)")->capture_default_str();
  synth->add_option("--per-class", spec.per_class, "Images per class")->required();
  synth->add_option("--size", size, "Image size H,W")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_flag("--force", force, "Overwrite a non-empty output directory");

  // ingest-mstar
  auto* ingest = app.add_subcommand("ingest-mstar", "Build a manifest for an MSTAR directory tree");
  std::string ingest_dir;
  std::string ingest_out;
  ingest->add_option("--dir", ingest_dir, "MSTAR root directory")->required();
  ingest->add_option("--out", ingest_out, "Manifest path to write")->required();

  // train
  auto* train = app.add_subcommand("train", "Train student/teacher networks");
  std::string config_path;
  std::string resume;
  train->add_option("--config", config_path, "Run configuration JSON")->required();
  train->add_option("--resume", resume, "Checkpoint directory to resume from");

  // extract
  auto* extract = app.add_subcommand("extract", "Extract student features for a dataset");
  std::string ckpt;
  std::string manifest_path;
  std::string data_dir;
  std::string out_path;
  extract->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  extract->add_option("--manifest", manifest_path, "Dataset manifest");
  extract->add_option("--data-dir", data_dir, "Dataset directory (scanned)");
  extract->add_option("--out", out_path, "Feature CSV")->required();

  // eval-knn
  auto* knn = app.add_subcommand("eval-knn", "Few-shot k-NN accuracy table");
  std::string features_path;
  std::string shots = "1,2,5,10";
  std::uint32_t k = 2;
  std::uint32_t repeats = 5;
  std::uint64_t seed = 0;
  std::string metric = "cosine";
  knn->add_option("--features", features_path, "Feature CSV")->required();
  knn->add_option("--shots", shots, "Comma-separated shot counts")->capture_default_str();
  knn->add_option("--k", k, "Neighbours")->capture_default_str();
  knn->add_option("--repeats", repeats, "Random splits per shot count")->capture_default_str();
  knn->add_option("--seed", seed, "Split seed")->capture_default_str();
  knn->add_option("--metric", metric, "cosine | euclidean")->capture_default_str();
  knn->add_option("--out", out_path, "Accuracy CSV")->required();

  // eval-pca
  auto* pca = app.add_subcommand("eval-pca", "PCA baseline features");
  std::uint32_t resize = 150;
  std::uint32_t dim = 128;
  pca->add_option("--manifest", manifest_path, "Dataset manifest");
  pca->add_option("--data-dir", data_dir, "Dataset directory (scanned)");
  pca->add_option("--resize", resize, "Resize side")->capture_default_str();
  pca->add_option("--dim", dim, "Retained components")->capture_default_str();
  pca->add_option("--out", out_path, "Feature CSV")->required();

  // project
  auto* project = app.add_subcommand("project", "2D t-SNE projection of features");
  float perplexity = 30.0f;
  std::uint32_t iters = 1000;
  project->add_option("--features", features_path, "Feature CSV")->required();
  project->add_option("--perplexity", perplexity, "Perplexity")->capture_default_str();
  project->add_option("--iters", iters, "Iterations")->capture_default_str();
  project->add_option("--seed", seed, "Initialization seed")->capture_default_str();
  project->add_option("--out", out_path, "Projection CSV (an SVG is written beside it)")->required();

  // curve
  auto* curve = app.add_subcommand("curve", "Few-shot accuracy curves for one or more feature sets");
  std::vector<std::string> curve_features;
  std::vector<std::string> curve_names;
  std::string curve_shots = "1,2,5,10,20,50,100";
  curve->add_option("--features", curve_features, "Feature CSV (repeatable)")->required();
  curve->add_option("--name", curve_names, "Series name per feature set");
  curve->add_option("--shots", curve_shots, "Comma-separated shot counts")->capture_default_str();
  curve->add_option("--k", k, "Neighbours")->capture_default_str();
  curve->add_option("--repeats", repeats, "Random splits per shot count")->capture_default_str();
  curve->add_option("--seed", seed, "Split seed")->capture_default_str();
  curve->add_option("--metric", metric, "cosine | euclidean")->capture_default_str();
  curve->add_option("--out", out_path, "Output prefix: <out>.svg and one CSV per series")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (quiet) set_log_level(LogLevel::Warn);
    set_thread_count(threads > 0 ? threads : default_thread_count());

    if (synth->parsed()) {
      const auto dims = parse_list(size);
      if (dims.size() != 2) throw Error(ErrorKind::Parameter, "--size expects H,W");
      spec.rows = dims[0];
      spec.cols = dims[1];
      const DatasetManifest m = synthesize_dataset(synth_out, spec, force);
      print_counts(m);
      std::cout << "wrote " << m.size() << " images under " << synth_out << "\n";
      wrote(fs::path(synth_out) / "manifest.json");
    } else if (ingest->parsed()) {
      const DatasetManifest m = build_manifest(ingest_dir);
      save_manifest(ingest_out, m);
      print_counts(m);
      wrote(ingest_out);
    } else if (train->parsed()) {
      const RunConfig cfg = load_run_config(config_path);
      wrote(write_resolved_config(cfg));
      const DatasetManifest m = load_dataset(cfg);
      FitOptions opts;
      if (!resume.empty()) opts.resume_from = fs::path(resume);
      const FitResult r = fit(m, cfg, opts);
      wrote(r.metrics_csv);
      wrote(r.final_checkpoint);
      std::cout << "steps: " << r.steps << " (rolled back: " << r.failed_steps << ")\n";
    } else if (extract->parsed()) {
      const ModelParams<float> student = load_student(ckpt);
      const FeatureSet f = extract_all(dataset_from(manifest_path, data_dir), student);
      write_features(out_path, f);
      wrote(out_path);
    } else if (knn->parsed()) {
      const FeatureSet f = read_features(features_path);
      const auto table = few_shot_curve(f, parse_list(shots), repeats, k, seed, parse_distance_metric(metric));
      write_text(out_path, curve_to_csv(table));
      wrote(out_path);
    } else if (pca->parsed()) {
      const FeatureSet f = pca_baseline(dataset_from(manifest_path, data_dir), resize, dim);
      write_features(out_path, f);
      wrote(out_path);
    } else if (project->parsed()) {
      const FeatureSet f = read_features(features_path);
      TsneConfig tc;
      tc.perplexity = perplexity;
      tc.iters = iters;
      tc.seed = seed;
      TsneResult res;
      const auto points = project_2d(f, tc, &res);
      write_text(out_path, projection_to_csv(points));
      wrote(out_path);
      std::vector<ScatterPoint> sp;
      for (const auto& p : points) sp.push_back({p.x, p.y, p.label.value_or("")});
      ChartOptions o;
      o.title = "t-SNE of " + fs::path(features_path).filename().string();
      o.x_label = "t-SNE 1";
      o.y_label = "t-SNE 2";
      fs::path svg = fs::path(out_path).replace_extension(".svg");
      write_text(svg, svg_scatter(sp, o));
      wrote(svg);
      std::string kl = "iteration,kl\n";
      for (const auto& [it, v] : res.kl_trace) kl += std::to_string(it) + "," + std::to_string(v) + "\n";
      fs::path kl_path = fs::path(out_path).replace_extension("").string() + "_kl.csv";
      write_text(kl_path, kl);
      wrote(kl_path);
    } else if (curve->parsed()) {
      if (!curve_names.empty() && curve_names.size() != curve_features.size()) {
        throw Error(ErrorKind::Parameter, "--name must be given once per --features");
      }
      const auto shot_list = parse_list(curve_shots);
      std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
      for (std::size_t i = 0; i < curve_features.size(); ++i) {
        const std::string name = curve_names.empty() ? fs::path(curve_features[i]).stem().string() : curve_names[i];
        const FeatureSet f = read_features(curve_features[i]);
        curves.emplace_back(name, few_shot_curve(f, shot_list, repeats, k, seed, parse_distance_metric(metric)));
        const fs::path csv = curve_features.size() == 1 ? fs::path(out_path + ".csv") : fs::path(out_path + "_" + name + ".csv");
        write_text(csv, curve_to_csv(curves.back().second));
        wrote(csv);
      }
      const fs::path svg = out_path + ".svg";
      write_text(svg, curve_svg(curves, k));
      wrote(svg);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "sarsfe: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::Config:
      case ErrorKind::Parameter:
      case ErrorKind::File:
      case ErrorKind::EmptyDataset:
        return 1;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sarsfe: %s\n", e.what());
    return 2;
  }
  return 0;
}
