#include "dos/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "binary_io.hpp"
#include "dos/error.hpp"

namespace dos {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::Config, "key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <class T>
T parse_num(const std::string& key, const std::string& raw, const char* expected) {
  const std::string value = trim(raw);
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, expected);
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) { return parse_num<std::size_t>(key, v, "count"); }
double to_real(const std::string& key, const std::string& v) { return parse_num<double>(key, v, "number"); }
std::uint64_t to_u64(const std::string& key, const std::string& v) {
  return parse_num<std::uint64_t>(key, v, "unsigned integer");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& value, F&& convert) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(convert(item));
  return out;
}

std::string real_str(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;
using SectionTable = std::map<std::string, std::map<std::string, Setter>>;

const SectionTable& setters() {
  static const SectionTable table = {
      {"data",
       {
           {"source",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const std::string s = trim(v);
              if (s == "toy") c.data.source = DataSource::Toy;
              else if (s == "file") c.data.source = DataSource::File;
              else bad_value(k, s, "toy|file");
            }},
           {"path", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.path = trim(v); }},
           {"data_seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.data_seed = to_u64(k, v); }},
           {"num_classes", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.num_classes = to_count(k, v); }},
           {"id_sigma", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.id_sigma = to_real(k, v); }},
           {"class_spacing", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.class_spacing = to_real(k, v); }},
           {"id_train_per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.id_train_per_class = to_count(k, v); }},
           {"id_test_per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.id_test_per_class = to_count(k, v); }},
           {"pool_clusters", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.pool_clusters = to_count(k, v); }},
           {"test_clusters", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.test_clusters = to_count(k, v); }},
           {"ood_sigma", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.ood_sigma = to_real(k, v); }},
           {"points_per_cluster", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.points_per_cluster = to_count(k, v); }},
           {"radius", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data.toy.radius = to_real(k, v); }},
       }},
      {"model",
       {
           {"hidden",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.hidden = parse_list<std::size_t>(v, [&](const std::string& s) { return to_count(k, s); });
            }},
       }},
      {"train",
       {
           {"epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.epochs = to_count(k, v); }},
           {"id_batch", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.id_batch = to_count(k, v); }},
           {"ood_batch", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.ood_batch = to_count(k, v); }},
           {"learning_rate", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.learning_rate = to_real(k, v); }},
           {"momentum", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.momentum = to_real(k, v); }},
           {"weight_decay", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.weight_decay = to_real(k, v); }},
           {"milestones",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.sgd.milestones = parse_list<std::size_t>(v, [&](const std::string& s) { return to_count(k, s); });
            }},
           {"grad_clip", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.grad_clip = to_real(k, v); }},
           {"decay_factor", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sgd.decay_factor = to_real(k, v); }},
           {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
       }},
      {"sampling",
       {
           {"strategy", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.strategy = parse_strategy(trim(v)); }},
           {"candidate_size", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.candidate_size = to_count(k, v); }},
           {"k_clusters",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const std::string s = trim(v);
              if (s == "auto") c.k_clusters.reset();
              else c.k_clusters = to_count(k, s);
            }},
           {"feature_mode",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const std::string s = trim(v);
              if (s == "normalized") c.feature_mode = FeatureMode::Normalized;
              else if (s == "raw") c.feature_mode = FeatureMode::Raw;
              else bad_value(k, s, "normalized|raw");
            }},
           {"group_clusters", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.group_clusters = to_count(k, v); }},
           {"biased_cluster",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const std::string s = trim(v);
              if (s == "largest") c.biased_cluster.reset();
              else c.biased_cluster = to_count(k, s);
            }},
           {"kmeans_max_iters", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.kmeans_max_iters = to_count(k, v); }},
           {"kmeans_tol", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.kmeans_tol = to_real(k, v); }},
       }},
      {"loss",
       {
           {"loss", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.loss = parse_loss_kind(trim(v)); }},
           {"lambda", [](ExperimentConfig& c, const std::string& k, const std::string& v) { if (v == "auto") c.lambda.reset(); else c.lambda = to_real(k, v); }},
           {"m_in", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.m_in = to_real(k, v); }},
           {"m_out", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.m_out = to_real(k, v); }},
       }},
      {"output",
       {
           {"dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); }},
       }},
  };
  return table;
}

pt::ptree read_tree(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::Config, std::string("line ") + std::to_string(e.line()) + ": " + e.message());
  }
  return tree;
}

void apply(const pt::ptree& tree, ExperimentConfig& config, std::string_view skip_section) {
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (section == skip_section) continue;
    if (body.empty()) throw Error(ErrorKind::Config, "key '" + section + "' outside any section");
    const auto sec = table.find(section);
    if (sec == table.end()) throw Error(ErrorKind::Config, "unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) throw Error(ErrorKind::Config, "unknown key '" + key + "' in [" + section + "]");
      it->second(config, key, node.data());
    }
  }
  config.validate();
}

std::string canonical_text(const ExperimentConfig& c, bool with_output) {
  const auto& t = c.data.toy;
  std::string s;
  s += "[data]\n";
  s += "source = " + std::string(c.data.source == DataSource::Toy ? "toy" : "file") + "\n";
  if (c.data.source == DataSource::File) s += "path = " + c.data.path.string() + "\n";
  s += "data_seed = " + std::to_string(c.data.data_seed) + "\n";
  s += "num_classes = " + std::to_string(t.num_classes) + "\n";
  s += "id_sigma = " + real_str(t.id_sigma) + "\n";
  s += "class_spacing = " + real_str(t.class_spacing) + "\n";
  s += "id_train_per_class = " + std::to_string(t.id_train_per_class) + "\n";
  s += "id_test_per_class = " + std::to_string(t.id_test_per_class) + "\n";
  s += "pool_clusters = " + std::to_string(t.pool_clusters) + "\n";
  s += "test_clusters = " + std::to_string(t.test_clusters) + "\n";
  s += "ood_sigma = " + real_str(t.ood_sigma) + "\n";
  s += "points_per_cluster = " + std::to_string(t.points_per_cluster) + "\n";
  s += "radius = " + real_str(t.radius) + "\n";
  s += "\n[model]\nhidden = " + join(c.hidden) + "\n";
  s += "\n[train]\n";
  s += "epochs = " + std::to_string(c.epochs) + "\n";
  s += "id_batch = " + std::to_string(c.id_batch) + "\n";
  s += "ood_batch = " + std::to_string(c.ood_batch) + "\n";
  s += "learning_rate = " + real_str(c.sgd.learning_rate) + "\n";
  s += "momentum = " + real_str(c.sgd.momentum) + "\n";
  s += "weight_decay = " + real_str(c.sgd.weight_decay) + "\n";
  s += "milestones = " + join(c.sgd.milestones) + "\n";
  s += "decay_factor = " + real_str(c.sgd.decay_factor) + "\n";
  s += "grad_clip = " + real_str(c.grad_clip) + "\n";
  s += "seed = " + std::to_string(c.seed) + "\n";
  s += "\n[sampling]\n";
  s += "strategy = " + std::string(to_string(c.strategy)) + "\n";
  s += "candidate_size = " + std::to_string(c.candidate_size) + "\n";
  s += "k_clusters = " + (c.k_clusters ? std::to_string(*c.k_clusters) : std::string("auto")) + "\n";
  s += "feature_mode = " + std::string(c.feature_mode == FeatureMode::Normalized ? "normalized" : "raw") + "\n";
  s += "group_clusters = " + std::to_string(c.group_clusters) + "\n";
  s += "biased_cluster = " + (c.biased_cluster ? std::to_string(*c.biased_cluster) : std::string("largest")) + "\n";
  s += "kmeans_max_iters = " + std::to_string(c.kmeans_max_iters) + "\n";
  s += "kmeans_tol = " + real_str(c.kmeans_tol) + "\n";
  s += "\n[loss]\n";
  s += "loss = " + std::string(to_string(c.loss)) + "\n";
  s += "lambda = " + (c.lambda ? real_str(*c.lambda) : std::string("auto")) + "\n";
  s += "m_in = " + real_str(c.m_in) + "\n";
  s += "m_out = " + real_str(c.m_out) + "\n";
  if (with_output) s += "\n[output]\ndir = " + c.output_dir.string() + "\n";
  return s;
}

}  // namespace

SgdConfig toy_sgd() {
  SgdConfig sgd;
  sgd.learning_rate = 0.01;
  return sgd;
}

double ExperimentConfig::loss_weight() const noexcept {
  if (lambda) return *lambda;
  switch (loss) {
    case LossKind::OeUniform: return 0.5;
    case LossKind::Energy: return 0.1;
    case LossKind::AbsentCategory: break;
  }
  return 1.0;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (data.source == DataSource::File && data.path.empty()) fail("[data] source = file requires path");
  if (std::any_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h == 0; })) fail("hidden sizes must be > 0");
  if (id_batch == 0) fail("id_batch must be > 0");
  if (ood_batch == 0) fail("ood_batch must be > 0");
  if (!(sgd.learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(sgd.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (clusters() == 0) fail("k_clusters must be > 0");
  if (clusters() > candidate_size) fail("k_clusters must not exceed candidate_size");
  if (strategy == Strategy::Dos && ood_batch != clusters()) {
    fail("strategy dos selects one outlier per cluster: ood_batch (" + std::to_string(ood_batch) +
         ") must equal k_clusters (" + std::to_string(clusters()) + ")");
  }
  if ((strategy == Strategy::Random || strategy == Strategy::Greedy) && ood_batch > candidate_size) {
    fail("ood_batch must not exceed candidate_size");
  }
  if (group_clusters < 2) fail("group_clusters must be >= 2");
  if (biased_cluster && *biased_cluster >= group_clusters) fail("biased_cluster must be < group_clusters");
  if (!(grad_clip >= 0.0)) fail("grad_clip must be >= 0");
  if (!(loss_weight() >= 0.0)) fail("lambda must be >= 0");
  if (!(kmeans_tol >= 0.0)) fail("kmeans_tol must be >= 0");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  apply(read_tree(text), config, "");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(detail::read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::Config, e.what());
    throw;
  }
}

std::string to_config_text(const ExperimentConfig& config) { return canonical_text(config, true); }

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(config, false)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<ExperimentConfig> GridSpec::expand() const {
  std::vector<ExperimentConfig> out;
  for (LossKind loss : losses) {
    for (Strategy strategy : strategies) {
      for (std::uint64_t seed : seeds) {
        ExperimentConfig c = base;
        c.loss = loss;
        c.strategy = strategy;
        c.seed = seed;
        c.validate();
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

GridSpec parse_grid(std::string_view text) {
  const auto tree = read_tree(text);
  GridSpec grid;
  apply(tree, grid.base, "grid");
  grid.strategies = {grid.base.strategy};
  grid.losses = {grid.base.loss};
  grid.seeds = {grid.base.seed};
  if (const auto section = tree.get_child_optional("grid")) {
    for (const auto& [key, node] : *section) {
      const std::string value = node.data();
      if (key == "strategies") {
        grid.strategies = parse_list<Strategy>(value, [](const std::string& s) { return parse_strategy(s); });
      } else if (key == "losses") {
        grid.losses = parse_list<LossKind>(value, [](const std::string& s) { return parse_loss_kind(s); });
      } else if (key == "seeds") {
        grid.seeds = parse_list<std::uint64_t>(value, [&](const std::string& s) { return to_u64(key, s); });
      } else {
        throw Error(ErrorKind::Config, "unknown key '" + key + "' in [grid]");
      }
    }
  }
  if (grid.strategies.empty() || grid.losses.empty() || grid.seeds.empty()) {
    throw Error(ErrorKind::Config, "[grid] lists must not be empty");
  }
  return grid;
}

GridSpec load_grid(const std::filesystem::path& path) {
  try {
    return parse_grid(detail::read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::Config, e.what());
    throw;
  }
}

}  // namespace dos
