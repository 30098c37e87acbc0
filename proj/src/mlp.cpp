#include "wlf/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "wlf/error.hpp"
#include "wlf/rng.hpp"

namespace wlf {

namespace {

// sub-stream tags so init and shuffling never share a generator
constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kShuffleStream = 0x22;

constexpr std::size_t kHiddenWidth = 128;
constexpr double kConstantDimSd = 1e-12;

struct ForwardCache {
  Eigen::MatrixXd a1, a2;        // post-relu activations, rows = batch
  Eigen::ArrayXXd mask1, mask2;  // relu derivatives
};

// rows of x are samples; returns the scalar head per row
Eigen::VectorXd batched_forward(const MlpModel& m, const Eigen::MatrixXd& x,
                                ForwardCache* cache) {
  Eigen::MatrixXd z1 = x * m.weights[0].transpose();
  z1.rowwise() += m.biases[0].transpose();
  Eigen::MatrixXd a1 = z1.cwiseMax(0.0);

  Eigen::MatrixXd z2 = a1 * m.weights[1].transpose();
  z2.rowwise() += m.biases[1].transpose();
  Eigen::MatrixXd a2 = z2.cwiseMax(0.0);

  Eigen::VectorXd yhat = a2 * m.weights[2].transpose();
  yhat.array() += m.biases[2](0);

  if (cache) {
    cache->mask1 = (z1.array() > 0.0).cast<double>();
    cache->mask2 = (z2.array() > 0.0).cast<double>();
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
  }
  return yhat;
}

double batched_loss(const MlpModel& m, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& targets) {
  const Eigen::VectorXd yhat = batched_forward(m, x, nullptr);
  return (yhat - targets).squaredNorm() / double(x.rows());
}

// MSE gradients for every parameter; the analytic counterpart checked against
// finite differences in the test suite.
double batched_loss_and_gradients(const MlpModel& m, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& targets,
                                  MlpGradients& grads) {
  const auto batch = double(x.rows());
  ForwardCache cache;
  const Eigen::VectorXd yhat = batched_forward(m, x, &cache);
  const Eigen::VectorXd residual = yhat - targets;
  const double loss = residual.squaredNorm() / batch;

  const Eigen::VectorXd delta_out = (2.0 / batch) * residual;

  grads.weights[2].noalias() = delta_out.transpose() * cache.a2;
  grads.biases[2](0) = delta_out.sum();

  Eigen::MatrixXd d2 =
      (delta_out * m.weights[2]).array() * cache.mask2;  // rows x h2
  grads.weights[1].noalias() = d2.transpose() * cache.a1;
  grads.biases[1] = d2.colwise().sum();

  Eigen::MatrixXd d1 = (d2 * m.weights[1]).array() * cache.mask1;  // rows x h1
  grads.weights[0].noalias() = d1.transpose() * x;
  grads.biases[0] = d1.colwise().sum();

  return loss;
}

MlpGradients make_gradients(const MlpModel& m) {
  MlpGradients g;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
  }
  return g;
}

Eigen::MatrixXd pack_features(const std::vector<WindowSample>& batch,
                              std::size_t d_in) {
  Eigen::MatrixXd x(batch.size(), d_in);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].features.size() != d_in) {
      throw Error(ErrorCode::DimensionMismatch,
                  "window has " + std::to_string(batch[i].features.size()) +
                      " features, model expects " + std::to_string(d_in));
    }
    x.row(i) = Eigen::Map<const Eigen::VectorXd>(batch[i].features.data(),
                                                 Eigen::Index(d_in));
  }
  return x;
}

struct ParamSnapshot {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

}  // namespace

std::size_t MlpModel::n_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += std::size_t(weights[l].size()) + std::size_t(biases[l].size());
  }
  return n;
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be at least 1");
  if (max_epochs < 1) throw Error(ErrorCode::InvalidConfig, "max_epochs must be at least 1");
  if (patience < 1) throw Error(ErrorCode::InvalidConfig, "patience must be at least 1");
  if (!(val_fraction > 0.0 && val_fraction < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "val_fraction must lie in (0, 0.5)");
  }
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "adam betas must lie in [0, 1)");
  }
  if (adam_eps <= 0.0) throw Error(ErrorCode::InvalidConfig, "adam_eps must be positive");
}

MlpModel make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() != 4 || dims.back() != 1) {
    throw Error(ErrorCode::InvalidConfig,
                "layer dims must be {d_in, h1, h2, 1}");
  }
  for (std::size_t d : dims) {
    if (d < 1) throw Error(ErrorCode::InvalidConfig, "layer dims must be positive");
  }
  MlpModel m;
  m.layer_dims = dims;
  m.seed = seed;
  Rng rng(mix_seed({seed, kInitStream}));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto rows = Eigen::Index(dims[l + 1]);
    const auto cols = Eigen::Index(dims[l]);
    Eigen::MatrixXd w(rows, cols);
    const double scale = 1.0 / std::sqrt(double(dims[l]));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        w(r, c) = rng.uniform(-scale, scale);
      }
    }
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(Eigen::VectorXd::Zero(rows));
  }
  m.feature_mean = Eigen::VectorXd::Zero(Eigen::Index(dims[0]));
  m.feature_sd = Eigen::VectorXd::Ones(Eigen::Index(dims[0]));
  return m;
}

MlpModel init_mlp(std::size_t d_in, std::uint64_t seed) {
  if (d_in < 1) throw Error(ErrorCode::InvalidConfig, "d_in must be at least 1");
  return make_mlp({d_in, kHiddenWidth, kHiddenWidth, 1}, seed);
}

double forward(const MlpModel& m, const std::vector<double>& features) {
  if (features.size() != m.d_in()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(features.size()) + " features, model expects " +
                    std::to_string(m.d_in()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(features.data(),
                                                        Eigen::Index(features.size()));
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::VectorXd z = m.weights[l] * a + m.biases[l];
    if (l + 1 < m.weights.size()) {
      a = z.cwiseMax(0.0);
    } else {
      return z(0);
    }
  }
  return 0.0;  // unreachable
}

double mse_loss(const MlpModel& m, const std::vector<WindowSample>& batch) {
  if (batch.empty()) throw Error(ErrorCode::InsufficientData, "empty batch");
  const Eigen::MatrixXd x = pack_features(batch, m.d_in());
  Eigen::VectorXd t(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) t(Eigen::Index(i)) = batch[i].target;
  return batched_loss(m, x, t);
}

std::pair<double, MlpGradients> loss_and_gradients(
    const MlpModel& m, const std::vector<WindowSample>& batch) {
  if (batch.empty()) throw Error(ErrorCode::InsufficientData, "empty batch");
  const Eigen::MatrixXd x = pack_features(batch, m.d_in());
  Eigen::VectorXd t(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) t(Eigen::Index(i)) = batch[i].target;
  MlpGradients grads = make_gradients(m);
  const double loss = batched_loss_and_gradients(m, x, t, grads);
  return {loss, std::move(grads)};
}

AdamState make_adam_state(const MlpModel& m) {
  AdamState st;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    st.m_w.emplace_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    st.v_w.emplace_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    st.m_b.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    st.v_b.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
  }
  return st;
}

void adam_step(MlpModel& m, const MlpGradients& grads, AdamState& state,
               std::size_t t, const TrainConfig& cfg) {
  if (t < 1) throw Error(ErrorCode::InvalidConfig, "step count starts at 1");
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, double(t));
  const double corr2 = 1.0 - std::pow(b2, double(t));
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    auto update = [&](auto& param, const auto& grad, auto& mom, auto& vel) {
      mom = b1 * mom.array() + (1.0 - b1) * grad.array();
      vel = b2 * vel.array() + (1.0 - b2) * grad.array().square();
      param.array() -= cfg.learning_rate * (mom.array() / corr1) /
                       ((vel.array() / corr2).sqrt() + cfg.adam_eps);
    };
    update(m.weights[l], grads.weights[l], state.m_w[l], state.v_w[l]);
    update(m.biases[l], grads.biases[l], state.m_b[l], state.v_b[l]);
  }
}

std::pair<MlpModel, TrainReport> train_early_stopping(
    const std::vector<WindowSample>& windows, const TrainConfig& cfg,
    std::size_t d_in) {
  cfg.validate();
  if (windows.empty()) {
    throw Error(ErrorCode::InsufficientData, "no training windows");
  }

  // temporal order within each subject decides the validation tail
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    by_subject[windows[i].subject_id].push_back(i);
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& [subject, idx] : by_subject) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return windows[a].target_index < windows[b].target_index;
    });
    const std::size_t n_val =
        std::max<std::size_t>(1, std::size_t(std::floor(cfg.val_fraction * double(idx.size()))));
    const std::size_t n_train = idx.size() > n_val ? idx.size() - n_val : 0;
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
    val_idx.insert(val_idx.end(), idx.begin() + n_train, idx.end());
  }
  if (train_idx.empty() || val_idx.empty()) {
    throw Error(ErrorCode::InsufficientData,
                "need at least one training window and one validation window");
  }

  Eigen::MatrixXd x_train = Eigen::MatrixXd(train_idx.size(), d_in);
  Eigen::VectorXd y_train(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    const WindowSample& w = windows[train_idx[i]];
    if (w.features.size() != d_in) {
      throw Error(ErrorCode::DimensionMismatch, "window feature size != d_in");
    }
    x_train.row(Eigen::Index(i)) =
        Eigen::Map<const Eigen::VectorXd>(w.features.data(), Eigen::Index(d_in));
    y_train(Eigen::Index(i)) = w.target;
  }
  Eigen::MatrixXd x_val = Eigen::MatrixXd(val_idx.size(), d_in);
  Eigen::VectorXd y_val(val_idx.size());
  for (std::size_t i = 0; i < val_idx.size(); ++i) {
    const WindowSample& w = windows[val_idx[i]];
    if (w.features.size() != d_in) {
      throw Error(ErrorCode::DimensionMismatch, "window feature size != d_in");
    }
    x_val.row(Eigen::Index(i)) =
        Eigen::Map<const Eigen::VectorXd>(w.features.data(), Eigen::Index(d_in));
    y_val(Eigen::Index(i)) = w.target;
  }

  // z-score statistics from the training split only
  const double n_train = double(x_train.rows());
  Eigen::VectorXd feat_mean = x_train.colwise().mean();
  Eigen::VectorXd feat_sd =
      ((x_train.rowwise() - feat_mean.transpose()).array().square().colwise().sum() /
       n_train)
          .sqrt();
  for (Eigen::Index j = 0; j < feat_sd.size(); ++j) {
    if (feat_sd(j) < kConstantDimSd) feat_sd(j) = 1.0;  // constant dimension
  }
  const double target_mean = y_train.mean();
  double target_sd =
      std::sqrt((y_train.array() - target_mean).square().sum() / n_train);
  if (target_sd < kConstantDimSd) target_sd = 1.0;

  auto normalize = [&](Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    x = (x.rowwise() - feat_mean.transpose()).array().rowwise() /
        feat_sd.transpose().array();
    y = (y.array() - target_mean) / target_sd;
  };
  normalize(x_train, y_train);
  normalize(x_val, y_val);

  MlpModel model = init_mlp(d_in, cfg.seed);
  model.seed = cfg.seed;
  AdamState adam = make_adam_state(model);
  MlpGradients grads = make_gradients(model);
  Rng shuffle_rng(mix_seed({cfg.seed, kShuffleStream}));

  std::vector<std::size_t> perm(train_idx.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  TrainReport report;
  double best_val = std::numeric_limits<double>::infinity();
  ParamSnapshot best{model.weights, model.biases};
  std::size_t since_improvement = 0;
  std::size_t step = 0;

  Eigen::MatrixXd x_batch;
  Eigen::VectorXd y_batch;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(perm);
    double epoch_loss = 0.0;
    for (std::size_t offset = 0; offset < perm.size(); offset += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, perm.size() - offset);
      x_batch.resize(Eigen::Index(count), Eigen::Index(d_in));
      y_batch.resize(Eigen::Index(count));
      for (std::size_t i = 0; i < count; ++i) {
        x_batch.row(Eigen::Index(i)) = x_train.row(Eigen::Index(perm[offset + i]));
        y_batch(Eigen::Index(i)) = y_train(Eigen::Index(perm[offset + i]));
      }
      const double loss = batched_loss_and_gradients(model, x_batch, y_batch, grads);
      adam_step(model, grads, adam, ++step, cfg);
      epoch_loss += loss * double(count);
    }
    report.train_loss_curve.push_back(epoch_loss / double(perm.size()));

    const double val_loss = batched_loss(model, x_val, y_val);
    report.val_loss_curve.push_back(val_loss);
    ++report.epochs_run;

    if (val_loss < best_val) {
      best_val = val_loss;
      best.weights = model.weights;
      best.biases = model.biases;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }

  model.weights = std::move(best.weights);
  model.biases = std::move(best.biases);
  model.feature_mean = std::move(feat_mean);
  model.feature_sd = std::move(feat_sd);
  model.target_mean = target_mean;
  model.target_sd = target_sd;
  report.best_val_loss = best_val;
  return {std::move(model), std::move(report)};
}

std::vector<Prediction> predict_block(const MlpModel& m, const SubjectSeries& s,
                                      const HorizonConfig& cfg,
                                      const ForecastMode& mode, SampleRange block) {
  const auto windows = build_windows(s, cfg, mode, block);
  Eigen::MatrixXd x = pack_features(windows, m.d_in());
  x = (x.rowwise() - m.feature_mean.transpose()).array().rowwise() /
      m.feature_sd.transpose().array();
  const Eigen::VectorXd yhat = batched_forward(m, x, nullptr);

  std::vector<Prediction> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out[i].target_time_s = s.time_at(windows[i].target_index);
    out[i].prediction = m.target_mean + m.target_sd * yhat(Eigen::Index(i));
    out[i].truth = windows[i].target;
  }
  return out;
}

namespace {

void write_vector(std::ostream& out, const char* label, const Eigen::VectorXd& v) {
  out << label;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v(i));
  out << '\n';
}

void write_matrix(std::ostream& out, const char* label, const Eigen::MatrixXd& w) {
  out << label;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) out << ' ' << format_double(w(r, c));
  }
  out << '\n';
}

std::vector<double> read_doubles(std::istringstream& line, std::size_t expect) {
  std::vector<double> values;
  values.reserve(expect);
  double v = 0.0;
  while (line >> v) values.push_back(v);
  if (values.size() != expect) {
    throw Error(ErrorCode::MalformedInput,
                "checkpoint field has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(expect));
  }
  return values;
}

std::istringstream next_record(std::istream& in, const std::string& label) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::MalformedInput, "checkpoint truncated before '" + label + "'");
  }
  std::istringstream stream(line);
  std::string got;
  stream >> got;
  if (got != label) {
    throw Error(ErrorCode::MalformedInput,
                "checkpoint expected '" + label + "', got '" + got + "'");
  }
  return stream;
}

}  // namespace

void save_model(const MlpModel& m, std::ostream& out) {
  out << "wlf-mlp v1\n";
  out << "dims";
  for (std::size_t d : m.layer_dims) out << ' ' << d;
  out << '\n';
  out << "seed " << m.seed << '\n';
  write_vector(out, "feature_mean", m.feature_mean);
  write_vector(out, "feature_sd", m.feature_sd);
  out << "target_mean " << format_double(m.target_mean) << '\n';
  out << "target_sd " << format_double(m.target_sd) << '\n';
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    write_matrix(out, ("w" + std::to_string(l)).c_str(), m.weights[l]);
    write_vector(out, ("b" + std::to_string(l)).c_str(), m.biases[l]);
  }
}

void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  save_model(m, out);
  if (!out.good()) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

MlpModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "wlf-mlp v1") {
    throw Error(ErrorCode::MalformedInput, "not a wlf-mlp v1 checkpoint");
  }
  auto dims_line = next_record(in, "dims");
  std::vector<std::size_t> dims;
  std::size_t d = 0;
  while (dims_line >> d) dims.push_back(d);
  if (dims.size() != 4) {
    throw Error(ErrorCode::MalformedInput, "checkpoint must carry 4 layer dims");
  }

  auto seed_line = next_record(in, "seed");
  std::uint64_t seed = 0;
  seed_line >> seed;

  MlpModel m = make_mlp(dims, seed);

  auto mean_line = next_record(in, "feature_mean");
  auto mean = read_doubles(mean_line, dims[0]);
  m.feature_mean = Eigen::Map<Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
  auto sd_line = next_record(in, "feature_sd");
  auto sd = read_doubles(sd_line, dims[0]);
  m.feature_sd = Eigen::Map<Eigen::VectorXd>(sd.data(), Eigen::Index(sd.size()));

  auto tm_line = next_record(in, "target_mean");
  tm_line >> m.target_mean;
  auto ts_line = next_record(in, "target_sd");
  ts_line >> m.target_sd;

  for (std::size_t l = 0; l < 3; ++l) {
    auto w_line = next_record(in, "w" + std::to_string(l));
    const std::size_t rows = dims[l + 1], cols = dims[l];
    auto w = read_doubles(w_line, rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        m.weights[l](Eigen::Index(r), Eigen::Index(c)) = w[r * cols + c];
      }
    }
    auto b_line = next_record(in, "b" + std::to_string(l));
    auto b = read_doubles(b_line, rows);
    m.biases[l] = Eigen::Map<Eigen::VectorXd>(b.data(), Eigen::Index(b.size()));
  }
  return m;
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read '" + path + "'");
  return load_model(in);
}

}  // namespace wlf
