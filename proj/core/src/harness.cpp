#include "dos/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "binary_io.hpp"
#include "dos/error.hpp"

namespace dos {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream ids for mix_seed; each stochastic path draws from its own generator.
constexpr std::uint64_t kInitStream = 0x696e6974;    // "init"
constexpr std::uint64_t kGroupStream = 0x67727570;   // "grup"
constexpr std::uint64_t kEpochStream = 0x65706f63;   // "epoc"
constexpr std::uint64_t kAnalyzeStream = 0x616e6c7a;  // "anlz"

// L2-normalizes rows, leaving all-zero rows at zero (dead ReLU features).
Matrix normalize_rows_lenient(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double norm = std::sqrt(dot(row, row));
    if (norm > kDegenerateNorm) {
      for (double& v : row) v /= norm;
    }
  }
  return out;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return kNaN;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

LossResult compute_loss(const ExperimentConfig& config, const Matrix& id_logits, std::span<const int> labels,
                        const Matrix& ood_logits, std::size_t k) {
  switch (config.loss) {
    case LossKind::AbsentCategory: return absent_category_loss(id_logits, labels, ood_logits, k, config.loss_weight());
    case LossKind::OeUniform: return oe_uniform_loss(id_logits, labels, ood_logits, k, config.loss_weight());
    case LossKind::Energy:
      return energy_reg_loss(id_logits, labels, ood_logits, k, config.m_in, config.m_out, config.loss_weight());
  }
  throw Error(ErrorKind::Config, "unknown loss");
}

Matrix split_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  if (idx.empty()) return Matrix(0, m.cols());
  return gather_rows(m, idx);
}

// Everything the training loop needs to pick one iteration's outliers.
struct SelectionContext {
  const ExperimentConfig& config;
  const TrainingData& data;
  const ClusterAssignment& groups;
  std::size_t num_classes;
  ScoreKind score;
};

struct Selection {
  CandidateBatch candidates;
  SelectedOutliers picked;
  bool fell_back = false;
};

Selection select_outliers(const SelectionContext& ctx, const MlpModel& model, CandidateStream& stream, Rng& rng) {
  const auto& config = ctx.config;
  const Matrix& pool = ctx.data.ood_pool;
  Selection sel;

  if (config.strategy == Strategy::Biased || config.strategy == Strategy::Uniform) {
    // Pool-level groups: scores are not consulted by these strategies.
    sel.candidates.source_indices.resize(pool.rows());
    std::iota(sel.candidates.source_indices.begin(), sel.candidates.source_indices.end(), std::size_t{0});
    sel.candidates.features = Matrix(pool.rows(), 0);
    sel.candidates.scores.assign(pool.rows(), 0.0);
    sel.picked = config.strategy == Strategy::Biased
                     ? sample_biased(sel.candidates, ctx.groups, config.ood_batch, rng, config.biased_cluster)
                     : sample_uniform_clusters(sel.candidates, ctx.groups, config.ood_batch, rng);
    return sel;
  }

  sel.candidates.source_indices = stream.next();
  if (config.strategy == Strategy::Random) {
    sel.candidates.features = Matrix(sel.candidates.size(), 0);
    sel.candidates.scores.assign(sel.candidates.size(), 0.0);
    sel.picked = sample_random(sel.candidates, config.ood_batch, rng);
    return sel;
  }

  const Matrix inputs = gather_rows(pool, sel.candidates.source_indices);
  ForwardResult fwd = forward(model, inputs);
  if (!all_finite(fwd.logits.data())) throw Error(ErrorKind::Divergence, "non-finite candidate logits");
  sel.candidates.scores = score_rows(fwd.logits, ctx.num_classes, ctx.score);
  sel.candidates.features = std::move(fwd.penultimate);
  if (config.strategy == Strategy::Greedy) {
    sel.picked = sample_greedy(sel.candidates, config.ood_batch);
    return sel;
  }

  Rng cluster_rng = rng.split();
  const KMeansOptions options{config.kmeans_max_iters, config.kmeans_tol, config.feature_mode};
  try {
    const ClusterAssignment clusters = kmeans(sel.candidates.features, config.clusters(), cluster_rng, options);
    sel.picked = sample_dos(sel.candidates, clusters);
  } catch (const Error&) {
    // Degenerate candidate features (e.g. all-zero rows): uniform over raw-space clusters instead.
    sel.fell_back = true;
    try {
      const KMeansOptions raw{config.kmeans_max_iters, config.kmeans_tol, FeatureMode::Raw};
      const ClusterAssignment clusters = kmeans(sel.candidates.features, config.clusters(), cluster_rng, raw);
      sel.picked = sample_uniform_clusters(sel.candidates, clusters, config.ood_batch, rng);
    } catch (const Error&) {
      sel.picked = sample_random(sel.candidates, config.ood_batch, rng);
    }
    sel.picked.strategy = Strategy::Dos;
  }
  return sel;
}

std::string run_label(const ExperimentConfig& c) {
  return std::string(to_string(c.strategy)) + "/" + std::string(to_string(c.loss)) + "/seed " +
         std::to_string(c.seed);
}

}  // namespace

std::size_t TrainingData::num_classes() const {
  int k = 0;
  for (int y : id_train.labels) k = std::max(k, y);
  for (int y : id_test.labels) k = std::max(k, y);
  return static_cast<std::size_t>(k);
}

TrainingData training_data_from(const ToyBenchmark& toy) {
  return {toy.id_train, toy.id_test, toy.ood_pool, toy.ood_test};
}

TrainingData training_data_from(const EmbeddingDataset& data) {
  return {data.labeled(Split::IdTrain), data.labeled(Split::IdTest), data.rows(Split::OodPool),
          data.rows(Split::OodTest)};
}

TrainingData load_training_data(const DataConfig& config) {
  if (config.source == DataSource::Toy) return training_data_from(generate_toy(config.data_seed, config.toy));
  return training_data_from(load_embeddings(config.path));
}

ScoreKind score_for_loss(LossKind loss) noexcept {
  switch (loss) {
    case LossKind::AbsentCategory: return ScoreKind::Absent;
    case LossKind::OeUniform: return ScoreKind::Msp;
    case LossKind::Energy: return ScoreKind::Energy;
  }
  return ScoreKind::Absent;
}

ClusterAssignment pool_groups(const Matrix& ood_pool, std::size_t groups, std::uint64_t seed) {
  Rng rng(mix_seed(seed, kGroupStream));
  return kmeans_normalized(ood_pool, groups, rng);
}

RunArtifacts train(const ExperimentConfig& config, const TrainingData& data, const std::optional<Checkpoint>& resume) {
  config.validate();
  const std::size_t k = data.num_classes();
  if (k == 0 || data.id_train.size() == 0) throw Error(ErrorKind::InvalidInput, "training needs labeled ID rows");
  if (data.id_test.size() == 0 || data.ood_test.rows() == 0) {
    throw Error(ErrorKind::InvalidInput, "evaluation needs ID test and OOD test rows");
  }
  if (data.ood_pool.rows() < config.candidate_size) {
    throw Error(ErrorKind::Config, "candidate_size " + std::to_string(config.candidate_size) + " exceeds pool of " +
                                       std::to_string(data.ood_pool.rows()));
  }

  std::vector<std::size_t> dims{data.id_train.features.cols()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(k + 1);

  RunArtifacts run;
  run.config = config;
  MlpModel model;
  SgdState state;
  std::size_t start_epoch = 0;
  if (resume) {
    if (resume->model.layer_dims() != dims) throw Error(ErrorKind::Config, "checkpoint shape does not match config");
    model = resume->model;
    state = resume->optimizer;
    state.config = config.sgd;
    start_epoch = static_cast<std::size_t>(resume->epoch);
  } else {
    Rng init_rng(mix_seed(config.seed, kInitStream));
    model = MlpModel::he_uniform(dims, init_rng);
    state = make_sgd_state(model, config.sgd);
  }

  const ClusterAssignment groups = pool_groups(data.ood_pool, config.group_clusters, config.seed);
  const SelectionContext ctx{config, data, groups, k, score_for_loss(config.loss)};
  std::ostringstream selection_log;
  selection_log << "epoch,iteration,pool_index,cluster_id,score,strategy\n";

  const std::size_t n_train = data.id_train.size();
  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    state.learning_rate = lr_at_epoch(config.sgd, epoch);
    Rng epoch_rng(mix_seed(config.seed, kEpochStream + epoch));
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    epoch_rng.shuffle(order);
    CandidateStream stream(data.ood_pool.rows(), config.candidate_size, config.clusters(), epoch_rng.split());
    Rng select_rng = epoch_rng.split();

    EpochLog log;
    log.epoch = epoch;
    log.learning_rate = state.learning_rate;
    std::vector<double> losses, id_losses, ood_losses, deltas, chs, uncertainties, sizes;
    const std::size_t iterations = (n_train + config.id_batch - 1) / config.id_batch;

    for (std::size_t it = 0; it < iterations; ++it) {
      const std::size_t begin = it * config.id_batch;
      const std::size_t end = std::min(n_train, begin + config.id_batch);
      const std::span<const std::size_t> batch_idx(order.data() + begin, end - begin);
      const Matrix id_x = gather_rows(data.id_train.features, batch_idx);
      std::vector<int> id_y;
      id_y.reserve(batch_idx.size());
      for (std::size_t i : batch_idx) id_y.push_back(data.id_train.labels[i]);

      Selection sel = [&] {
        try {
          return select_outliers(ctx, model, stream, select_rng);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Divergence) throw;
          throw Error(ErrorKind::Divergence, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                                 ", iteration " + std::to_string(it));
        }
      }();
      if (sel.fell_back) ++log.fallbacks;
      std::vector<std::size_t> pool_idx;
      pool_idx.reserve(sel.picked.size());
      for (std::size_t i : sel.picked.indices) pool_idx.push_back(sel.candidates.source_indices[i]);
      const Matrix ood_x = pool_idx.empty() ? Matrix(0, data.ood_pool.cols()) : gather_rows(data.ood_pool, pool_idx);

      const ForwardTrace trace = forward_trace(model, vstack(id_x, ood_x));
      if (!all_finite(trace.logits.data())) {
        throw Error(ErrorKind::Divergence, "non-finite logits at epoch " + std::to_string(epoch) + ", iteration " +
                                               std::to_string(it));
      }
      const std::size_t n_id = id_x.rows();
      const std::size_t n_all = trace.logits.rows();
      const Matrix id_logits = split_rows(trace.logits, 0, n_id);
      const Matrix ood_logits = split_rows(trace.logits, n_id, n_all);
      const LossResult loss = compute_loss(config, id_logits, id_y, ood_logits, k);
      if (!std::isfinite(loss.value.total)) {
        throw Error(ErrorKind::Divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                                               std::to_string(it));
      }

      // Selection statistics under the pre-update model.
      if (ood_x.rows() > 0) {
        const Matrix selected_features = normalize_rows_lenient(split_rows(trace.penultimate(), n_id, n_all));
        if (selected_features.rows() >= 2) deltas.push_back(diversity_delta(selected_features));
        std::vector<std::size_t> labels;
        for (std::size_t p : pool_idx) labels.push_back(groups.assignments[p]);
        try {
          chs.push_back(calinski_harabasz(selected_features, labels, FeatureMode::Raw));
        } catch (const Error&) {
          // fewer than two groups represented
        }
        const auto p_absent = absent_probabilities(ood_logits, k);
        uncertainties.push_back(mean_of(p_absent));
      }
      sizes.push_back(static_cast<double>(sel.picked.size()));

      if (it + 1 == iterations && ood_x.rows() > 0) {
        // Record each selected outlier's score under the current model.
        CandidateBatch logged = sel.candidates;
        const auto scores = score_rows(ood_logits, k, ctx.score);
        for (std::size_t j = 0; j < sel.picked.size(); ++j) logged.scores[sel.picked.indices[j]] = scores[j];
        std::ostringstream rows;
        write_selection_csv(rows, logged, sel.picked);
        std::istringstream lines(rows.str());
        for (std::string line; std::getline(lines, line);) selection_log << epoch << ',' << it << ',' << line << '\n';
      }

      Gradients grads = backward(model, trace, vstack(loss.id_grad, loss.ood_grad));
      clip_gradients(grads, config.grad_clip);
      try {
        sgd_step(model, grads, state);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Divergence) throw;
        throw Error(ErrorKind::Divergence, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                               ", iteration " + std::to_string(it));
      }
      losses.push_back(loss.value.total);
      id_losses.push_back(loss.value.id_term);
      ood_losses.push_back(loss.value.ood_term);
    }

    log.iterations = iterations;
    log.loss = mean_of(losses);
    log.id_loss = mean_of(id_losses);
    log.ood_loss = mean_of(ood_losses);
    log.diversity = mean_of(deltas);
    log.calinski_harabasz = mean_of(chs);
    log.uncertainty = mean_of(uncertainties);
    log.selected = mean_of(sizes);
    run.epochs.push_back(log);
  }

  run.report = evaluate(model, data.id_test, data.ood_test, score_for_loss(config.loss));
  run.checkpoint = Checkpoint{model, state, std::max<std::uint64_t>(config.epochs, start_epoch), config.seed,
                              config_hash(config)};
  run.selection_csv = selection_log.str();
  return run;
}

RunArtifacts train(const ExperimentConfig& config) { return train(config, load_training_data(config.data)); }

std::string epoch_log_csv(const std::vector<EpochLog>& epochs) {
  std::string out =
      "epoch,learning_rate,loss,id_loss,ood_loss,diversity,calinski_harabasz,uncertainty,selected,iterations,"
      "fallbacks\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ',' + fmt(e.learning_rate) + ',' + fmt(e.loss) + ',' + fmt(e.id_loss) + ',' +
           fmt(e.ood_loss) + ',' + fmt(e.diversity) + ',' + fmt(e.calinski_harabasz) + ',' + fmt(e.uncertainty) +
           ',' + fmt(e.selected) + ',' + std::to_string(e.iterations) + ',' + std::to_string(e.fallbacks) + '\n';
  }
  return out;
}

void write_artifacts(const RunArtifacts& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  detail::write_text_file(dir / "config.ini", to_config_text(run.config));
  export_report(run.report, dir / "report.json", ReportFormat::Json);
  export_report(run.report, dir / "report.csv", ReportFormat::Csv);
  save_checkpoint(run.checkpoint, dir / "checkpoint.bin");
  detail::write_text_file(dir / "epochs.csv", epoch_log_csv(run.epochs));
  detail::write_text_file(dir / "selections.csv", run.selection_csv);
}

ComparisonAggregate aggregate_rows(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::InvalidInput, "cannot aggregate zero rows");
  ComparisonAggregate agg;
  agg.strategy = rows.front().strategy;
  agg.loss = rows.front().loss;
  agg.runs = rows.size();
  const double n = static_cast<double>(rows.size());
  auto stat = [&](double ComparisonRow::*field, double& mean_out, double& std_out) {
    double s = 0.0;
    for (const auto& r : rows) s += r.*field;
    mean_out = s / n;
    if (rows.size() < 2) {
      std_out = kNaN;
      return;
    }
    double ss = 0.0;
    for (const auto& r : rows) ss += (r.*field - mean_out) * (r.*field - mean_out);
    std_out = std::sqrt(ss / (n - 1.0));
  };
  for (auto field : {&ComparisonRow::fpr95, &ComparisonRow::auroc, &ComparisonRow::acc, &ComparisonRow::mean_delta,
                     &ComparisonRow::mean_ch}) {
    stat(field, agg.mean.*field, agg.std.*field);
  }
  agg.mean.strategy = agg.std.strategy = agg.strategy;
  agg.mean.loss = agg.std.loss = agg.loss;
  return agg;
}

ComparisonTable aggregate(std::vector<ComparisonRow> rows) {
  ComparisonTable table;
  table.rows = std::move(rows);
  std::vector<std::pair<Strategy, LossKind>> keys;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.strategy, r.loss);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [strategy, loss] : keys) {
    std::vector<ComparisonRow> group;
    for (const auto& r : table.rows) {
      if (r.strategy == strategy && r.loss == loss) group.push_back(r);
    }
    table.aggregates.push_back(aggregate_rows(group));
  }
  return table;
}

ComparisonTable compare(const std::vector<ExperimentConfig>& configs, const TrainingData& data, std::size_t threads) {
  if (configs.empty()) throw Error(ErrorKind::Config, "compare needs at least one config");
  auto axes_stripped = [](ExperimentConfig c) {
    c.strategy = Strategy::Dos;
    c.loss = LossKind::AbsentCategory;
    c.seed = 0;
    c.output_dir.clear();
    c.k_clusters = c.clusters();
    return to_config_text(c);
  };
  const std::string reference = axes_stripped(configs.front());
  for (const auto& c : configs) {
    if (!(c.data == configs.front().data)) throw Error(ErrorKind::Config, "compare configs use different datasets");
    if (axes_stripped(c) != reference) {
      throw Error(ErrorKind::Config, "compare configs differ outside strategy, loss and seed");
    }
  }

  std::vector<ComparisonRow> rows(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const RunArtifacts run = train(configs[i], data);
        auto& row = rows[i];
        row.strategy = configs[i].strategy;
        row.loss = configs[i].loss;
        row.seed = configs[i].seed;
        row.fpr95 = run.report.fpr95;
        row.auroc = run.report.auroc;
        row.acc = run.report.id_accuracy;
        std::vector<double> deltas, chs;
        for (const auto& e : run.epochs) {
          if (!std::isnan(e.diversity)) deltas.push_back(e.diversity);
          if (!std::isnan(e.calinski_harabasz)) chs.push_back(e.calinski_harabasz);
        }
        row.mean_delta = mean_of(deltas);
        row.mean_ch = mean_of(chs);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, configs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), run_label(configs[i]) + ": " + e.what());
    }
  }
  return aggregate(std::move(rows));
}

ComparisonTable compare(const std::vector<ExperimentConfig>& configs, std::size_t threads) {
  if (configs.empty()) throw Error(ErrorKind::Config, "compare needs at least one config");
  return compare(configs, load_training_data(configs.front().data), threads);
}

std::string comparison_csv(const ComparisonTable& table) {
  std::string out =
      "kind,strategy,loss,seed,runs,fpr95,auroc,acc,mean_delta,mean_ch,fpr95_std,auroc_std,acc_std,mean_delta_std,"
      "mean_ch_std\n";
  for (const auto& r : table.rows) {
    out += "run," + std::string(to_string(r.strategy)) + ',' + std::string(to_string(r.loss)) + ',' +
           std::to_string(r.seed) + ",1," + fmt(r.fpr95) + ',' + fmt(r.auroc) + ',' + fmt(r.acc) + ',' +
           fmt(r.mean_delta) + ',' + fmt(r.mean_ch) + ",,,,,\n";
  }
  for (const auto& a : table.aggregates) {
    out += "mean," + std::string(to_string(a.strategy)) + ',' + std::string(to_string(a.loss)) + ",," +
           std::to_string(a.runs) + ',' + fmt(a.mean.fpr95) + ',' + fmt(a.mean.auroc) + ',' + fmt(a.mean.acc) + ',' +
           fmt(a.mean.mean_delta) + ',' + fmt(a.mean.mean_ch) + ',' + fmt(a.std.fpr95) + ',' + fmt(a.std.auroc) +
           ',' + fmt(a.std.acc) + ',' + fmt(a.std.mean_delta) + ',' + fmt(a.std.mean_ch) + '\n';
  }
  return out;
}

std::string comparison_json(const ComparisonTable& table) {
  using ordered_json = nlohmann::ordered_json;
  auto num = [](double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); };
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const auto& r : table.rows) {
    j["rows"].push_back({{"strategy", to_string(r.strategy)},
                         {"loss", to_string(r.loss)},
                         {"seed", r.seed},
                         {"fpr95", num(r.fpr95)},
                         {"auroc", num(r.auroc)},
                         {"acc", num(r.acc)},
                         {"mean_delta", num(r.mean_delta)},
                         {"mean_ch", num(r.mean_ch)}});
  }
  j["aggregates"] = ordered_json::array();
  for (const auto& a : table.aggregates) {
    auto block = [&](const ComparisonRow& r) {
      return ordered_json{{"fpr95", num(r.fpr95)},
                          {"auroc", num(r.auroc)},
                          {"acc", num(r.acc)},
                          {"mean_delta", num(r.mean_delta)},
                          {"mean_ch", num(r.mean_ch)}};
    };
    j["aggregates"].push_back({{"strategy", to_string(a.strategy)},
                               {"loss", to_string(a.loss)},
                               {"runs", a.runs},
                               {"mean", block(a.mean)},
                               {"std", block(a.std)}});
  }
  return j.dump(2) + "\n";
}

std::vector<ComparisonRow> parse_comparison_rows_csv(std::string_view csv) {
  std::vector<ComparisonRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::getline(in, line);  // header
  auto number = [](const std::string& s) {
    if (s.empty()) return kNaN;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::Parse, "bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.empty() || f[0] != "run") continue;
    if (f.size() < 10) throw Error(ErrorKind::Parse, "comparison row has too few fields");
    ComparisonRow r;
    r.strategy = parse_strategy(f[1]);
    r.loss = parse_loss_kind(f[2]);
    r.seed = std::stoull(f[3]);
    r.fpr95 = number(f[5]);
    r.auroc = number(f[6]);
    r.acc = number(f[7]);
    r.mean_delta = number(f[8]);
    r.mean_ch = number(f[9]);
    rows.push_back(r);
  }
  return rows;
}

double ClusterHistogram::imbalance(Strategy s) const {
  const auto& c = counts.at(s);
  const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
  if (*lo == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

ClusterHistogram cluster_histogram(const Matrix& features, std::span<const double> scores, std::size_t k,
                                   std::size_t m, std::uint64_t seed) {
  CandidateBatch batch;
  batch.features = features;
  batch.source_indices.resize(features.rows());
  std::iota(batch.source_indices.begin(), batch.source_indices.end(), std::size_t{0});
  batch.scores.assign(scores.begin(), scores.end());
  batch.validate();

  Rng rng(mix_seed(seed, kAnalyzeStream));
  const ClusterAssignment clusters = kmeans_normalized(features, k, rng);
  ClusterHistogram hist;
  hist.k = k;
  hist.m = m;
  auto tally = [&](const SelectedOutliers& sel) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i : sel.indices) ++counts[clusters.assignments[i]];
    hist.counts[sel.strategy] = std::move(counts);
  };
  const auto sizes = clusters.cluster_sizes();
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  tally(sample_random(batch, m, rng));
  tally(sample_greedy(batch, m));
  tally(sample_biased(batch, clusters, std::min(m, largest), rng));
  tally(sample_uniform_clusters(batch, clusters, m, rng));
  tally(sample_dos(batch, clusters));
  return hist;
}

ClusterHistogram cluster_histogram(const MlpModel& model, const Matrix& pool, std::size_t k, std::size_t m,
                                   ScoreKind score, std::uint64_t seed) {
  const ForwardResult fwd = forward(model, pool);
  const auto scores = score_rows(fwd.logits, model.num_classes(), score);
  return cluster_histogram(fwd.penultimate, scores, k, m, seed);
}

std::string cluster_histogram_csv(const ClusterHistogram& hist) {
  std::string out = "strategy,cluster,count\n";
  for (const auto& [strategy, counts] : hist.counts) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      out += std::string(to_string(strategy)) + ',' + std::to_string(c) + ',' + std::to_string(counts[c]) + '\n';
    }
  }
  return out;
}

std::map<Strategy, SelectionStats> selection_statistics(const MlpModel& model, const Matrix& pool,
                                                        const ExperimentConfig& config, std::uint64_t seed) {
  Rng rng(mix_seed(seed, kAnalyzeStream));
  const std::size_t k = model.num_classes();
  const ScoreKind score = score_for_loss(config.loss);
  const auto groups = candidate_batches(pool.rows(), config.candidate_size, config.clusters(), rng);
  std::map<Strategy, std::vector<double>> deltas, uncertainty;
  for (const auto& group : groups) {
    const Matrix inputs = gather_rows(pool, group);
    ForwardResult fwd = forward(model, inputs);
    CandidateBatch batch{fwd.penultimate, group, score_rows(fwd.logits, k, score)};
    const auto p_absent = absent_probabilities(fwd.logits, k);
    Rng cluster_rng = rng.split();
    const KMeansOptions options{config.kmeans_max_iters, config.kmeans_tol, config.feature_mode};
    const ClusterAssignment clusters = kmeans(batch.features, config.clusters(), cluster_rng, options);
    const SelectedOutliers dos = sample_dos(batch, clusters);
    const std::size_t m = dos.size();
    for (const SelectedOutliers& sel : {dos, sample_greedy(batch, m), sample_random(batch, m, rng)}) {
      const Matrix chosen = normalize_rows_lenient(gather_rows(batch.features, sel.indices));
      deltas[sel.strategy].push_back(diversity_delta(chosen));
      double u = 0.0;
      for (std::size_t i : sel.indices) u += p_absent[i];
      uncertainty[sel.strategy].push_back(u / static_cast<double>(sel.size()));
    }
  }
  std::map<Strategy, SelectionStats> stats;
  for (const auto& [strategy, values] : deltas) {
    stats[strategy] = SelectionStats{mean_of(values), mean_of(uncertainty[strategy]), values.size()};
  }
  return stats;
}

}  // namespace dos
