#include "dos/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "dos/error.hpp"

namespace dos {

namespace {

constexpr std::string_view kEmbeddingMagic{"DOSEMB1\0", 8};

void validate_toy(const ToyConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "toy config: " + m); };
  if (c.num_classes == 0) fail("num_classes must be >= 1");
  if (!(c.id_sigma > 0.0)) fail("id_sigma must be > 0");
  if (!(c.ood_sigma > 0.0)) fail("ood_sigma must be > 0");
  if (!(c.class_spacing > 0.0)) fail("class_spacing must be > 0");
  if (c.pool_clusters == 0 || c.test_clusters == 0) fail("need at least one pool and one test micro-cluster");
  if (c.points_per_cluster == 0) fail("points_per_cluster must be >= 1");
  if (!(c.radius > toy_id_extent(c))) {
    fail("radius " + std::to_string(c.radius) + " must exceed the ID extent " + std::to_string(toy_id_extent(c)));
  }
}

Matrix ring(std::size_t count, double radius, double phase) {
  Matrix centers(count, 2);
  for (std::size_t j = 0; j < count; ++j) {
    const double angle = phase + 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
    centers(j, 0) = radius * std::cos(angle);
    centers(j, 1) = radius * std::sin(angle);
  }
  return centers;
}

Matrix sample_clusters(const Matrix& centers, double sigma, std::size_t per_cluster, Rng& rng) {
  Matrix out(centers.rows() * per_cluster, centers.cols());
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    GaussianSpec spec{{centers.row(j).begin(), centers.row(j).end()}, sigma, per_cluster, kOutlierLabel};
    const Matrix block = sample_gaussian(spec, rng);
    std::copy(block.data().begin(), block.data().end(), out.row(j * per_cluster).begin());
  }
  return out;
}

LabeledBatch sample_classes(const Matrix& means, double sigma, std::size_t per_class, Rng& rng) {
  LabeledBatch batch{Matrix(means.rows() * per_class, means.cols()), {}};
  for (std::size_t c = 0; c < means.rows(); ++c) {
    GaussianSpec spec{{means.row(c).begin(), means.row(c).end()}, sigma, per_class, static_cast<int>(c + 1)};
    const Matrix block = sample_gaussian(spec, rng);
    std::copy(block.data().begin(), block.data().end(), batch.features.row(c * per_class).begin());
    batch.labels.insert(batch.labels.end(), per_class, spec.label);
  }
  return batch;
}

bool is_id(Split s) { return s == Split::IdTrain || s == Split::IdTest; }

Split parse_split_token(std::string_view token, std::size_t line) {
  if (token == "id-train" || token == "0") return Split::IdTrain;
  if (token == "id-test" || token == "1") return Split::IdTest;
  if (token == "ood-pool" || token == "2") return Split::OodPool;
  if (token == "ood-test" || token == "3") return Split::OodTest;
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": unknown split tag '" + std::string(token) + "'");
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    fields.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::Parse,
                "line " + std::to_string(line) + ": bad " + what + " '" + std::string(token) + "'");
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

Matrix sample_gaussian(const GaussianSpec& spec, Rng& rng) {
  if (!(spec.sigma > 0.0)) throw Error(ErrorKind::Config, "gaussian sigma must be > 0");
  Matrix out(spec.samples, spec.mean.size());
  for (std::size_t i = 0; i < spec.samples; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = spec.mean[j] + spec.sigma * rng.normal();
  }
  return out;
}

Matrix toy_class_means(const ToyConfig& config) {
  const std::size_t k = config.num_classes;
  const double side = config.class_spacing * config.id_sigma;
  if (k == 1) return Matrix(1, 2);
  const double circumradius = side / (2.0 * std::sin(std::numbers::pi / static_cast<double>(k)));
  return ring(k, circumradius, std::numbers::pi / 2.0);
}

double toy_id_extent(const ToyConfig& config) {
  const Matrix means = toy_class_means(config);
  double r = 0.0;
  for (std::size_t c = 0; c < means.rows(); ++c) r = std::max(r, std::sqrt(dot(means.row(c), means.row(c))));
  return r + 3.0 * config.id_sigma;
}

ToyBenchmark generate_toy(std::uint64_t seed, const ToyConfig& config) {
  validate_toy(config);
  Rng rng(seed);
  ToyBenchmark toy;
  toy.class_means = toy_class_means(config);
  const double phase = rng.uniform() * 2.0 * std::numbers::pi;
  toy.pool_centers = ring(config.pool_clusters, config.radius, phase);
  // Offset by half the test spacing so no test center coincides with a pool center.
  toy.test_centers =
      ring(config.test_clusters, config.radius, phase + std::numbers::pi / static_cast<double>(config.test_clusters));

  Rng id_train_rng = rng.split();
  Rng id_test_rng = rng.split();
  Rng pool_rng = rng.split();
  Rng test_rng = rng.split();
  toy.id_train = sample_classes(toy.class_means, config.id_sigma, config.id_train_per_class, id_train_rng);
  toy.id_test = sample_classes(toy.class_means, config.id_sigma, config.id_test_per_class, id_test_rng);
  toy.ood_pool = sample_clusters(toy.pool_centers, config.ood_sigma, config.points_per_cluster, pool_rng);
  toy.ood_test = sample_clusters(toy.test_centers, config.ood_sigma, config.points_per_cluster, test_rng);
  return toy;
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::IdTrain: return "id-train";
    case Split::IdTest: return "id-test";
    case Split::OodPool: return "ood-pool";
    case Split::OodTest: return "ood-test";
  }
  return "id-train";
}

std::size_t EmbeddingDataset::count(Split split) const noexcept {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

std::size_t EmbeddingDataset::num_classes() const noexcept {
  int k = 0;
  for (int y : labels) k = std::max(k, y);
  return static_cast<std::size_t>(k);
}

Matrix EmbeddingDataset::rows(Split split) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) idx.push_back(i);
  }
  if (idx.empty()) return Matrix(0, dim);
  return gather_rows(features, idx);
}

LabeledBatch EmbeddingDataset::labeled(Split split) const {
  LabeledBatch batch{rows(split), {}};
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) batch.labels.push_back(labels[i]);
  }
  return batch;
}

void EmbeddingDataset::validate() const {
  if (features.rows() != splits.size() || labels.size() != splits.size()) {
    throw Error(ErrorKind::Parse, "dataset columns disagree in length");
  }
  if (features.rows() > 0 && features.cols() != dim) throw Error(ErrorKind::Parse, "feature width != declared dim");
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (is_id(splits[i]) ? labels[i] < 1 : labels[i] != kOutlierLabel) {
      throw Error(ErrorKind::Parse, "row " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                        " invalid for split " + std::string(to_string(splits[i])));
    }
  }
}

EmbeddingDataset to_embedding_dataset(const ToyBenchmark& toy) {
  EmbeddingDataset ds;
  ds.dim = 2;
  auto append = [&](const Matrix& m, Split split, const std::vector<int>* labels) {
    ds.features = vstack(ds.features, m);
    ds.splits.insert(ds.splits.end(), m.rows(), split);
    if (labels) {
      ds.labels.insert(ds.labels.end(), labels->begin(), labels->end());
    } else {
      ds.labels.insert(ds.labels.end(), m.rows(), kOutlierLabel);
    }
  };
  append(toy.id_train.features, Split::IdTrain, &toy.id_train.labels);
  append(toy.id_test.features, Split::IdTest, &toy.id_test.labels);
  append(toy.ood_pool, Split::OodPool, nullptr);
  append(toy.ood_test, Split::OodTest, nullptr);
  if (ds.features.rows() == 0) ds.features = Matrix(0, 2);
  return ds;
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingDataset& data) {
  data.validate();
  detail::ByteWriter w;
  w.bytes(kEmbeddingMagic);
  w.u32(static_cast<std::uint32_t>(data.dim));
  w.u32(static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.u8(static_cast<std::uint8_t>(data.splits[i]));
    w.i32(data.labels[i]);
    w.f64s(data.features.row(i));
  }
  return std::move(w.buffer());
}

EmbeddingDataset decode_embeddings(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "embedding file");
  if (r.remaining() < kEmbeddingMagic.size() || r.bytes(kEmbeddingMagic.size()) != kEmbeddingMagic) {
    r.fail("bad magic, expected DOSEMB1");
  }
  EmbeddingDataset ds;
  ds.dim = r.u32();
  const std::uint32_t rows = r.u32();
  if (ds.dim == 0) r.fail("dim must be positive");
  const std::size_t row_bytes = 5 + 8 * ds.dim;
  if (r.remaining() != row_bytes * rows) {
    r.fail("header declares " + std::to_string(rows) + " rows of dim " + std::to_string(ds.dim) + " but " +
           std::to_string(r.remaining()) + " payload bytes follow");
  }
  std::vector<double> values(static_cast<std::size_t>(rows) * ds.dim);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint8_t tag = r.u8();
    if (tag > 3) r.fail("row " + std::to_string(i) + ": unknown split tag " + std::to_string(tag));
    ds.splits.push_back(static_cast<Split>(tag));
    ds.labels.push_back(r.i32());
    r.f64s(std::span<double>(values).subspan(i * ds.dim, ds.dim));
  }
  ds.features = Matrix(rows, ds.dim, std::move(values));
  ds.validate();
  return ds;
}

std::string embeddings_to_csv(const EmbeddingDataset& data) {
  data.validate();
  std::string out = "split,label";
  for (std::size_t j = 0; j < data.dim; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += to_string(data.splits[i]);
    out += ',';
    out += std::to_string(data.labels[i]);
    for (double v : data.features.row(i)) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

EmbeddingDataset parse_embeddings_csv(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      const std::size_t nl = text.find('\n', pos);
      line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() : nl + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw Error(ErrorKind::Parse, "line 1: missing header");
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "split" || header[1] != "label") {
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": header must be split,label,f0..f{d-1}");
  }
  EmbeddingDataset ds;
  ds.dim = header.size() - 2;
  for (std::size_t j = 0; j < ds.dim; ++j) {
    if (header[j + 2] != "f" + std::to_string(j)) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected column f" + std::to_string(j));
    }
  }
  std::vector<double> values;
  while (next_line(line)) {
    const auto fields = split_fields(line);
    if (fields.size() != ds.dim + 2) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": row has " +
                                        std::to_string(fields.size() - 2) + " features, expected " +
                                        std::to_string(ds.dim));
    }
    ds.splits.push_back(parse_split_token(fields[0], line_no));
    ds.labels.push_back(parse_number<int>(fields[1], line_no, "label"));
    for (std::size_t j = 0; j < ds.dim; ++j) values.push_back(parse_number<double>(fields[j + 2], line_no, "feature"));
    const std::size_t i = ds.splits.size() - 1;
    if (is_id(ds.splits[i]) ? ds.labels[i] < 1 : ds.labels[i] != kOutlierLabel) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": label " + std::to_string(ds.labels[i]) +
                                        " invalid for split " + std::string(to_string(ds.splits[i])));
    }
  }
  ds.features = Matrix(ds.splits.size(), ds.dim, std::move(values));
  ds.validate();
  return ds;
}

void save_embeddings(const EmbeddingDataset& data, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_embeddings(data));
}

void save_embeddings_csv(const EmbeddingDataset& data, const std::filesystem::path& path) {
  detail::write_text_file(path, embeddings_to_csv(data));
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() >= 6 && std::string_view(reinterpret_cast<const char*>(bytes.data()), 6) == "DOSEMB") {
    return decode_embeddings(bytes);
  }
  return parse_embeddings_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::vector<std::size_t>> candidate_batches(std::size_t pool_rows, std::size_t candidate_size,
                                                        std::size_t k, Rng& rng) {
  if (candidate_size == 0 || candidate_size < k) {
    throw Error(ErrorKind::InvalidRequest, "candidate size " + std::to_string(candidate_size) +
                                               " must be positive and at least k = " + std::to_string(k));
  }
  if (candidate_size > pool_rows) {
    throw Error(ErrorKind::InvalidRequest, "candidate size " + std::to_string(candidate_size) +
                                               " exceeds pool of " + std::to_string(pool_rows));
  }
  std::vector<std::size_t> order(pool_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t start = 0; start < pool_rows; start += candidate_size) {
    const std::size_t end = std::min(pool_rows, start + candidate_size);
    if (end - start < candidate_size && end - start < k) break;
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return groups;
}

CandidateStream::CandidateStream(std::size_t pool_rows, std::size_t candidate_size, std::size_t k, Rng rng)
    : pool_rows_(pool_rows), candidate_size_(candidate_size), k_(k), rng_(rng) {}

const std::vector<std::size_t>& CandidateStream::next() {
  if (cursor_ == groups_.size()) {
    groups_ = candidate_batches(pool_rows_, candidate_size_, k_, rng_);
    cursor_ = 0;
  }
  return groups_[cursor_++];
}

}  // namespace dos
