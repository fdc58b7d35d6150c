#include "deocc/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "deocc/errors.hpp"
#include "deocc/gradcheck.hpp"
#include "deocc/tensor_io.hpp"

namespace deocc {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor vector_tensor(const std::vector<double>& values, std::uint32_t dtype) {
  return Tensor{{values.size()}, values, dtype};
}

Tensor expect_dims(Tensor t, const std::vector<std::uint64_t>& dims, const std::string& name) {
  if (t.dims != dims) throw InvalidInput("dataset: " + name + " has unexpected dimensions");
  return t;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::size_t parse_index(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw InvalidInput("pairs: bad " + what + " '" + text + "'");
  }
}

const char* kModelTensorNames[] = {"w1", "b1", "w2", "b2", "wc", "bc"};

}  // namespace

void save_pairs(const PairSet& pairs, const fs::path& path) {
  std::string text = "a,b,same\n";
  for (const auto& p : pairs.pairs) {
    text += std::to_string(p.a) + "," + std::to_string(p.b) + "," + (p.same ? "1" : "0") + "\n";
  }
  write_text(path, text);
}

PairSet load_pairs(const fs::path& path, std::size_t sample_count) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read pairs file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "a,b,same") throw InvalidInput("pairs: missing a,b,same header");
  PairSet set;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw InvalidInput("pairs: expected 3 columns in '" + line + "'");
    const std::size_t a = parse_index(cells[0], "index");
    const std::size_t b = parse_index(cells[1], "index");
    if (a >= sample_count || b >= sample_count) throw InvalidInput("pairs: sample index out of range");
    if (cells[2] != "0" && cells[2] != "1") throw InvalidInput("pairs: same flag must be 0 or 1");
    set.pairs.push_back({a, b, cells[2] == "1"});
  }
  set.validate();
  return set;
}

void save_dataset(const SyntheticIdentityDataset& dataset, const RunConfig& config, const PairSet& pairs,
                  const fs::path& dir) {
  ensure_dir(dir);
  write_text(dir / "config.txt", to_text(config));

  std::vector<const Raster*> clean, masked, inpainted;
  std::vector<double> labels, split, mask_values;
  std::string manifest = "index,label,split,coverage\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    clean.push_back(&s.masked.original);
    masked.push_back(&s.masked.masked);
    inpainted.push_back(&s.inpainted);
    labels.push_back(s.label);
    split.push_back(s.train ? 1.0 : 0.0);
    for (auto bit : s.masked.mask.bits()) mask_values.push_back(bit);
    manifest += std::to_string(i) + "," + std::to_string(s.label) + "," + (s.train ? "train" : "eval") + "," +
                fmt(s.masked.mask.coverage()) + "\n";
  }
  write_text(dir / "manifest.csv", manifest);
  write_tensor(dir / "clean.tensor", stack_rasters(clean));
  write_tensor(dir / "masked.tensor", stack_rasters(masked));
  write_tensor(dir / "inpainted.tensor", stack_rasters(inpainted));
  const std::size_t r = dataset.config.raster_side;
  write_tensor(dir / "mask.tensor", Tensor{{dataset.samples.size(), r, r}, mask_values, kDtypeFloat32});
  write_tensor(dir / "labels.tensor", vector_tensor(labels, kDtypeFloat32));
  write_tensor(dir / "split.tensor", vector_tensor(split, kDtypeFloat32));
  write_tensor(dir / "anchors.tensor", to_tensor(dataset.anchors));
  write_tensor(dir / "render_map.tensor", to_tensor(dataset.render_map));
  write_tensor(dir / "unrender.tensor", to_tensor(dataset.unrender));
  write_tensor(dir / "gain.tensor", vector_tensor({dataset.gain}, kDtypeFloat64));
  save_pairs(pairs, dir / "pairs.csv");
}

SyntheticIdentityDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("dataset directory " + dir.string() + " does not exist");
  SyntheticIdentityDataset ds;
  ds.config = load_run_config(dir / "config.txt").dataset;
  ds.config.validate();
  const std::uint64_t n = ds.config.num_identities * ds.config.samples_per_identity;
  const std::uint64_t r = ds.config.raster_side;
  const std::uint64_t d = ds.config.embed_dim;

  const auto clean = unstack_rasters(expect_dims(read_tensor(dir / "clean.tensor"), {n, r, r}, "clean"));
  const auto masked = unstack_rasters(expect_dims(read_tensor(dir / "masked.tensor"), {n, r, r}, "masked"));
  const auto inpainted = unstack_rasters(expect_dims(read_tensor(dir / "inpainted.tensor"), {n, r, r}, "inpainted"));
  const Tensor mask = expect_dims(read_tensor(dir / "mask.tensor"), {n, r, r}, "mask");
  const Tensor labels = expect_dims(read_tensor(dir / "labels.tensor"), {n}, "labels");
  const Tensor split = expect_dims(read_tensor(dir / "split.tensor"), {n}, "split");
  ds.anchors = to_matrix(expect_dims(read_tensor(dir / "anchors.tensor"), {ds.config.num_identities, d}, "anchors"));
  ds.render_map = to_matrix(expect_dims(read_tensor(dir / "render_map.tensor"), {r * r, d}, "render_map"));
  ds.unrender = to_matrix(expect_dims(read_tensor(dir / "unrender.tensor"), {d, r * r}, "unrender"));
  ds.gain = expect_dims(read_tensor(dir / "gain.tensor"), {1}, "gain").values[0];

  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint8_t> bits(r * r);
    for (std::size_t k = 0; k < r * r; ++k) bits[k] = mask.values[i * r * r + k] != 0.0 ? 1 : 0;
    const double label = labels.values[i];
    if (label < 0 || label >= static_cast<double>(ds.config.num_identities) || label != std::floor(label)) {
      throw InvalidInput("dataset: label out of range at sample " + std::to_string(i));
    }
    ds.samples.push_back(Sample{static_cast<int>(label), split.values[i] != 0.0,
                                MaskedSample{clean[i], masked[i], BinaryMask(r, r, std::move(bits))}, inpainted[i]});
  }
  return ds;
}

void save_checkpoint(const StudentModel& model, const fs::path& dir) {
  ensure_dir(dir);
  const auto tensors = model.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    write_tensor(dir / (std::string(kModelTensorNames[k]) + ".tensor"), to_tensor(*tensors[k]));
  }
  write_tensor(dir / "input_norm.tensor", vector_tensor({model.input_mean, model.input_scale}, kDtypeFloat64));
}

StudentModel load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("checkpoint directory " + dir.string() + " does not exist");
  StudentModel model;
  const auto tensors = model.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    *tensors[k] = to_matrix(read_tensor(dir / (std::string(kModelTensorNames[k]) + ".tensor")));
  }
  const Tensor norm = read_tensor(dir / "input_norm.tensor");
  if (norm.values.size() != 2) throw InvalidInput("checkpoint: input_norm must hold mean and scale");
  model.input_mean = norm.values[0];
  model.input_scale = norm.values[1];
  const bool consistent = model.b1.rows() == 1 && model.b1.cols() == model.hidden() &&
                          model.w2.cols() == model.hidden() && model.b2.rows() == 1 &&
                          model.b2.cols() == model.embed_dim() && model.wc.cols() == model.embed_dim() &&
                          model.bc.rows() == 1 && model.bc.cols() == model.classes() && model.input_scale > 0.0;
  if (!consistent) throw InvalidInput("checkpoint: layer shapes are inconsistent");
  return model;
}

void save_centroids(const CentroidTable& centroids, const fs::path& path) {
  if (centroids.size() == 0) throw InvalidInput("centroids: empty table");
  const std::size_t d = centroids.entries().begin()->second.dim();
  Matrix m(centroids.size(), d + 2);
  std::size_t row = 0;
  for (const auto& [label, centroid] : centroids.entries()) {
    m(row, 0) = label;
    m(row, 1) = static_cast<double>(centroids.count(label));
    for (std::size_t c = 0; c < d; ++c) m(row, c + 2) = centroid[c];
    ++row;
  }
  write_tensor(path, to_tensor(m));
}

CentroidTable load_centroids(const fs::path& path) {
  const Matrix m = to_matrix(read_tensor(path));
  if (m.cols() < 3 || m.rows() == 0) throw InvalidInput("centroids: expected [K, 2 + d] with d >= 1");
  CentroidTable table;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    table.set(static_cast<int>(row[0]), Vector(std::vector<double>(row.begin() + 2, row.end())),
              static_cast<std::size_t>(row[1]));
  }
  return table;
}

std::string metrics_header() { return "epoch,ce,instance,pair,triplet,total,lr\n"; }

std::string metrics_row(const EpochRecord& e) {
  return std::to_string(e.epoch) + "," + fmt(e.ce) + "," + fmt(e.instance) + "," + fmt(e.pair) + "," +
         fmt(e.triplet) + "," + fmt(e.total) + "," + fmt(e.lr) + "\n";
}

void cmd_gen_data(const RunConfig& config, std::ostream& log) {
  config.validate();
  const SyntheticIdentityDataset ds = generate_dataset(config.dataset);
  std::vector<int> labels;
  for (const Sample& s : ds.samples) labels.push_back(s.label);
  const PairSet pairs = make_pair_set(ds.indices(false), labels, config.max_positive_pairs, config.seed + 1);
  save_dataset(ds, config, pairs, config.data_dir);
  log << "wrote " << ds.samples.size() << " samples (" << ds.train_count() << " train, " << ds.eval_count()
      << " eval) and " << pairs.pairs.size() << " pairs to " << config.data_dir.string() << "\n";
}

TrainResult cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const SyntheticIdentityDataset ds = load_dataset(config.data_dir);
  ensure_dir(config.out_dir);
  write_text(config.out_dir / "config.txt", to_text(config));

  std::optional<CentroidTable> centroids;
  if (config.train.mode == InstanceMode::kSoft) {
    if (!config.centroids_file.empty()) {
      centroids = load_centroids(config.centroids_file);
    } else {
      const TeacherView view = build_teacher_view(ds, config.train);
      const auto rows = ds.indices(true);
      Matrix features(rows.size(), view.features.cols());
      std::vector<int> labels;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto src = view.features.row(rows[k]);
        std::copy(src.begin(), src.end(), features.row(k).begin());
        labels.push_back(view.labels[rows[k]]);
      }
      centroids = compute_centroids(features, labels, ds.config.num_identities);
      save_centroids(*centroids, config.out_dir / "centroids.tensor");
    }
  }

  const fs::path metrics_path = config.out_dir / "metrics.csv";
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot open " + metrics_path.string() + " for writing");
  metrics << metrics_header() << std::flush;
  const auto on_epoch = [&](const EpochRecord& e) {
    metrics << metrics_row(e) << std::flush;
    log << "epoch " << e.epoch << " total " << fmt(e.total) << " lr " << fmt(e.lr) << "\n";
  };
  TrainResult result = train(config.train, ds, on_epoch, centroids ? &*centroids : nullptr);
  save_checkpoint(result.model, config.out_dir / "checkpoint");
  log << "checkpoint written to " << (config.out_dir / "checkpoint").string() << "\n";
  return result;
}

VerificationReport cmd_eval(const RunConfig& config, const fs::path& checkpoint_dir, const fs::path& pairs_file,
                            std::ostream& log) {
  config.validate();
  const SyntheticIdentityDataset ds = load_dataset(config.data_dir);
  const StudentModel model = load_checkpoint(checkpoint_dir);
  const TeacherView view = build_teacher_view(ds, config.train);
  if (model.inputs() != view.inputs.cols()) {
    throw InvalidInput("checkpoint expects " + std::to_string(model.inputs()) + " inputs, dataset has " +
                       std::to_string(view.inputs.cols()));
  }
  const PairSet pairs = load_pairs(pairs_file, ds.samples.size());

  VerificationReport report;
  if (config.threshold_mode == ThresholdMode::kEvaluation) {
    report = verify(model, view.inputs, pairs);
  } else {
    if (pairs.pairs.size() < 4) throw InvalidInput("eval: held-out thresholding needs at least 4 pairs");
    const std::size_t half = pairs.pairs.size() / 2;
    const Matrix embeddings = student_forward(model, view.inputs).embed;
    std::vector<double> sims;
    std::vector<bool> same;
    for (const auto& p : pairs.pairs) {
      sims.push_back(cosine_similarity(embeddings.row(p.a), embeddings.row(p.b)));
      same.push_back(p.same);
    }
    const VerificationReport fit = verify_scores({sims.begin(), sims.begin() + static_cast<long>(half)},
                                                 {same.begin(), same.begin() + static_cast<long>(half)});
    std::size_t correct = 0;
    for (std::size_t k = half; k < sims.size(); ++k) correct += (sims[k] > fit.threshold) == same[k] ? 1 : 0;
    report = fit;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(sims.size() - half);
  }

  ensure_dir(config.out_dir);
  write_text(config.out_dir / "eval.csv", "pairs,accuracy,threshold\n" + std::to_string(pairs.pairs.size()) + "," +
                                              fmt(report.accuracy) + "," + fmt(report.threshold) + "\n");
  std::string roc = "fpr,tpr\n";
  for (const auto& [fpr, tpr] : report.roc) roc += fmt(fpr) + "," + fmt(tpr) + "\n";
  write_text(config.out_dir / "roc.csv", roc);
  log << "accuracy " << fmt(report.accuracy) << " threshold " << fmt(report.threshold) << " pairs "
      << pairs.pairs.size() << "\n";
  return report;
}

bool cmd_gradcheck(std::ostream& log, std::size_t points, std::uint64_t seed) {
  constexpr double kTolerance = 1e-4;
  const auto rows = run_gradcheck(standard_gradient_cases(), points, seed, kTolerance);
  log << std::left << std::setw(20) << "op" << std::setw(8) << "points" << std::setw(16) << "worst_rel_err"
      << "result\n";
  const GradcheckRow* worst = nullptr;
  bool all_pass = true;
  for (const auto& row : rows) {
    log << std::left << std::setw(20) << row.name << std::setw(8) << row.points << std::setw(16)
        << fmt(row.worst_error) << (row.pass ? "PASS" : "FAIL") << "\n";
    all_pass = all_pass && row.pass;
    if (!worst || row.worst_error > worst->worst_error) worst = &row;
  }
  if (worst) log << "worst: " << worst->name << " " << fmt(worst->worst_error) << "\n";
  return all_pass;
}

std::vector<VariantSummary> cmd_ablate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const SyntheticIdentityDataset ds = load_dataset(config.data_dir);
  const PairSet pairs = load_pairs(config.data_dir / "pairs.csv", ds.samples.size());
  ensure_dir(config.out_dir);
  write_text(config.out_dir / "config.txt", to_text(config));

  std::vector<VariantRun> runs;
  std::string table = "seed,variant,accuracy,threshold,eval_loss\n";
  for (std::size_t k = 0; k < config.ablation_seeds; ++k) {
    TrainConfig base = config.train;
    base.seed = config.seed + k;
    base.policy.seed = base.seed;
    for (Variant v : kAllVariants) {
      VariantRun run = run_variant(ds, base, v, pairs);
      table += std::to_string(run.seed) + "," + variant_name(v) + "," + fmt(run.accuracy) + "," +
               fmt(run.threshold) + "," + fmt(run.eval_loss.total) + "\n";
      log << "seed " << run.seed << " " << variant_name(v) << " accuracy " << fmt(run.accuracy) << "\n";
      runs.push_back(std::move(run));
    }
  }
  write_text(config.out_dir / "ablation.csv", table);

  const auto summary = summarize(runs);
  std::string csv = "variant,mean_accuracy,sd_accuracy,mean_eval_loss\n";
  log << std::left << std::setw(24) << "variant" << "accuracy (mean +- sd)\n";
  for (const auto& s : summary) {
    csv += variant_name(s.variant) + "," + fmt(s.mean_accuracy) + "," + fmt(s.sd_accuracy) + "," +
           fmt(s.mean_eval_loss) + "\n";
    log << std::left << std::setw(24) << variant_name(s.variant) << fmt(s.mean_accuracy) << " +- "
        << fmt(s.sd_accuracy) << "\n";
  }
  write_text(config.out_dir / "summary.csv", csv);

  std::size_t soft_le_hard = 0;
  for (std::size_t k = 0; k < config.ablation_seeds; ++k) {
    const double hard = runs[k * kAllVariants.size() + 3].eval_loss.total;
    const double soft = runs[k * kAllVariants.size() + 4].eval_loss.total;
    if (soft <= hard + 1e-9 * std::max(1.0, std::abs(hard))) ++soft_le_hard;
  }
  log << "soft <= hard eval loss in " << soft_le_hard << "/" << config.ablation_seeds << " seeds\n";
  return summary;
}

}  // namespace deocc
