#include "deocc/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "deocc/errors.hpp"

namespace deocc {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidInput("config: '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidInput("config: '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InvalidInput("config: '" + key + "' expects true or false, got '" + value + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> print;
};

// Key order here is the echo order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&t](std::string key, Field f) { t.emplace_back(std::move(key), std::move(f)); };

    add("seed", {[](RunConfig& c, const std::string& v) { c.set_seed(parse_uint("seed", v)); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    add("num_identities",
        {[](RunConfig& c, const std::string& v) { c.dataset.num_identities = parse_uint("num_identities", v); },
         [](const RunConfig& c) { return std::to_string(c.dataset.num_identities); }});
    add("samples_per_identity",
        {[](RunConfig& c, const std::string& v) {
           c.dataset.samples_per_identity = parse_uint("samples_per_identity", v);
         },
         [](const RunConfig& c) { return std::to_string(c.dataset.samples_per_identity); }});
    add("embed_dim", {[](RunConfig& c, const std::string& v) { c.dataset.embed_dim = parse_uint("embed_dim", v); },
                      [](const RunConfig& c) { return std::to_string(c.dataset.embed_dim); }});
    add("raster_side",
        {[](RunConfig& c, const std::string& v) { c.dataset.raster_side = parse_uint("raster_side", v); },
         [](const RunConfig& c) { return std::to_string(c.dataset.raster_side); }});
    add("noise_sigma",
        {[](RunConfig& c, const std::string& v) { c.dataset.noise_sigma = parse_double("noise_sigma", v); },
         [](const RunConfig& c) { return format_double(c.dataset.noise_sigma); }});
    add("mask_category",
        {[](RunConfig& c, const std::string& v) {
           if (v == "mixed") {
             c.dataset.mask_category.reset();
           } else {
             c.dataset.mask_category = parse_mask_category(v);
           }
         },
         [](const RunConfig& c) {
           return c.dataset.mask_category ? to_string(*c.dataset.mask_category) : std::string("mixed");
         }});
    add("coverage", {[](RunConfig& c, const std::string& v) { c.dataset.coverage = parse_double("coverage", v); },
                     [](const RunConfig& c) { return format_double(c.dataset.coverage); }});
    add("augment_flip",
        {[](RunConfig& c, const std::string& v) { c.dataset.augment_flip = parse_bool("augment_flip", v); },
         [](const RunConfig& c) { return std::string(c.dataset.augment_flip ? "true" : "false"); }});
    add("augment_shift",
        {[](RunConfig& c, const std::string& v) {
           c.dataset.augment_shift = static_cast<int>(parse_uint("augment_shift", v));
         },
         [](const RunConfig& c) { return std::to_string(c.dataset.augment_shift); }});
    add("batch_size", {[](RunConfig& c, const std::string& v) { c.train.batch_size = parse_uint("batch_size", v); },
                       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }});
    add("lr0", {[](RunConfig& c, const std::string& v) { c.train.lr0 = parse_double("lr0", v); },
                [](const RunConfig& c) { return format_double(c.train.lr0); }});
    add("lr_decay", {[](RunConfig& c, const std::string& v) { c.train.lr_decay = parse_double("lr_decay", v); },
                     [](const RunConfig& c) { return format_double(c.train.lr_decay); }});
    add("lr_step_epochs",
        {[](RunConfig& c, const std::string& v) { c.train.lr_step_epochs = parse_uint("lr_step_epochs", v); },
         [](const RunConfig& c) { return std::to_string(c.train.lr_step_epochs); }});
    add("epochs", {[](RunConfig& c, const std::string& v) { c.train.epochs = parse_uint("epochs", v); },
                   [](const RunConfig& c) { return std::to_string(c.train.epochs); }});
    add("momentum", {[](RunConfig& c, const std::string& v) { c.train.momentum = parse_double("momentum", v); },
                     [](const RunConfig& c) { return format_double(c.train.momentum); }});
    add("hidden", {[](RunConfig& c, const std::string& v) { c.train.hidden = parse_uint("hidden", v); },
                   [](const RunConfig& c) { return std::to_string(c.train.hidden); }});
    add("lambda_i", {[](RunConfig& c, const std::string& v) { c.train.weights.lambda_i = parse_double("lambda_i", v); },
                     [](const RunConfig& c) { return format_double(c.train.weights.lambda_i); }});
    add("lambda_p", {[](RunConfig& c, const std::string& v) { c.train.weights.lambda_p = parse_double("lambda_p", v); },
                     [](const RunConfig& c) { return format_double(c.train.weights.lambda_p); }});
    add("lambda_t", {[](RunConfig& c, const std::string& v) { c.train.weights.lambda_t = parse_double("lambda_t", v); },
                     [](const RunConfig& c) { return format_double(c.train.weights.lambda_t); }});
    add("huber_delta",
        {[](RunConfig& c, const std::string& v) { c.train.weights.huber_delta = parse_double("huber_delta", v); },
         [](const RunConfig& c) { return format_double(c.train.weights.huber_delta); }});
    add("mode",
        {[](RunConfig& c, const std::string& v) {
           if (v == "soft") {
             c.train.mode = InstanceMode::kSoft;
           } else if (v == "hard") {
             c.train.mode = InstanceMode::kHard;
           } else {
             throw InvalidInput("config: 'mode' expects soft or hard, got '" + v + "'");
           }
         },
         [](const RunConfig& c) { return std::string(c.train.mode == InstanceMode::kSoft ? "soft" : "hard"); }});
    add("triplet_mode",
        {[](RunConfig& c, const std::string& v) { c.train.policy.triplet_mode = parse_triplet_mode(v); },
         [](const RunConfig& c) { return to_string(c.train.policy.triplet_mode); }});
    add("max_tuples",
        {[](RunConfig& c, const std::string& v) {
           const auto cap = parse_uint("max_tuples", v);
           if (cap == 0) {
             c.train.policy.max_tuples.reset();
           } else {
             c.train.policy.max_tuples = cap;
           }
         },
         [](const RunConfig& c) { return std::to_string(c.train.policy.max_tuples.value_or(0)); }});
    add("teacher_logit_scale",
        {[](RunConfig& c, const std::string& v) {
           c.train.teacher_logit_scale = parse_double("teacher_logit_scale", v);
         },
         [](const RunConfig& c) { return format_double(c.train.teacher_logit_scale); }});
    add("temperature",
        {[](RunConfig& c, const std::string& v) { c.train.temperature = parse_double("temperature", v); },
         [](const RunConfig& c) { return format_double(c.train.temperature); }});
    add("teacher_source",
        {[](RunConfig& c, const std::string& v) {
           if (v == "clean") {
             c.train.teacher_source = TeacherSource::kCleanOriginal;
           } else if (v == "same-identity") {
             c.train.teacher_source = TeacherSource::kSameIdentity;
           } else {
             throw InvalidInput("config: 'teacher_source' expects clean or same-identity, got '" + v + "'");
           }
         },
         [](const RunConfig& c) {
           return std::string(c.train.teacher_source == TeacherSource::kCleanOriginal ? "clean" : "same-identity");
         }});
    add("data_dir", {[](RunConfig& c, const std::string& v) { c.data_dir = v; },
                     [](const RunConfig& c) { return c.data_dir.string(); }});
    add("out_dir", {[](RunConfig& c, const std::string& v) { c.out_dir = v; },
                    [](const RunConfig& c) { return c.out_dir.string(); }});
    add("centroids_file", {[](RunConfig& c, const std::string& v) { c.centroids_file = v; },
                           [](const RunConfig& c) { return c.centroids_file.string(); }});
    add("ablation_seeds",
        {[](RunConfig& c, const std::string& v) { c.ablation_seeds = parse_uint("ablation_seeds", v); },
         [](const RunConfig& c) { return std::to_string(c.ablation_seeds); }});
    add("max_positive_pairs",
        {[](RunConfig& c, const std::string& v) { c.max_positive_pairs = parse_uint("max_positive_pairs", v); },
         [](const RunConfig& c) { return std::to_string(c.max_positive_pairs); }});
    add("threshold_mode",
        {[](RunConfig& c, const std::string& v) {
           if (v == "evaluation") {
             c.threshold_mode = ThresholdMode::kEvaluation;
           } else if (v == "held-out") {
             c.threshold_mode = ThresholdMode::kHeldOut;
           } else {
             throw InvalidInput("config: 'threshold_mode' expects evaluation or held-out, got '" + v + "'");
           }
         },
         [](const RunConfig& c) {
           return std::string(c.threshold_mode == ThresholdMode::kEvaluation ? "evaluation" : "held-out");
         }});
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  dataset.seed = value;
  train.seed = value;
  train.policy.seed = value;
}

void RunConfig::validate() const {
  dataset.validate();
  train.validate();
  if (ablation_seeds == 0) throw InvalidInput("config: ablation_seeds must be >= 1");
  if (max_positive_pairs == 0) throw InvalidInput("config: max_positive_pairs must be >= 1");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  config.set_seed(config.seed);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&key](const auto& f) { return f.first == key; });
    if (it == table.end()) throw InvalidInput("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw InvalidInput("config: duplicate key '" + key + "'");
    it->second.parse(config, value);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.print(config) + "\n";
  return out;
}

}  // namespace deocc
