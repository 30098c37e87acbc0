#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wlf/windowing.hpp"

namespace wlf {

// Four-layer regression net: d_in -> h1 -> h2 -> 1, relu hidden layers,
// linear output. init_mlp pins the production width of 128; tests may build
// smaller nets through make_mlp. Normalization statistics are baked into the
// model at training time and default to the identity for a fresh net.
struct MlpModel {
  std::vector<std::size_t> layer_dims;   // {d_in, h1, h2, 1}
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: rows = layer outputs
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;

  Eigen::VectorXd feature_mean, feature_sd;  // per input dimension
  double target_mean = 0.0;
  double target_sd = 1.0;

  std::size_t d_in() const { return layer_dims.front(); }
  std::size_t n_parameters() const;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  double val_fraction = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
};

struct TrainReport {
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
  std::vector<double> train_loss_curve;
  std::vector<double> val_loss_curve;
  bool stopped_early = false;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero,
// deterministic per seed.
MlpModel init_mlp(std::size_t d_in, std::uint64_t seed);
MlpModel make_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

// Raw network function; no normalization is applied here.
double forward(const MlpModel& m, const std::vector<double>& features);

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Mean squared error over the batch.
double mse_loss(const MlpModel& m, const std::vector<WindowSample>& batch);

// Batch MSE and its exact analytic gradients for every parameter.
std::pair<double, MlpGradients> loss_and_gradients(const MlpModel& m,
                                                   const std::vector<WindowSample>& batch);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
};

AdamState make_adam_state(const MlpModel& m);

// Standard Adam update with bias correction; t is the 1-based step count.
void adam_step(MlpModel& m, const MlpGradients& grads, AdamState& state,
               std::size_t t, const TrainConfig& cfg);

// Trains on z-scored windows with the temporally last val_fraction of each
// subject's windows held out for early stopping. Returns the parameters of
// the best validation epoch; losses are reported in normalized space.
std::pair<MlpModel, TrainReport> train_early_stopping(
    const std::vector<WindowSample>& windows, const TrainConfig& cfg,
    std::size_t d_in);

struct Prediction {
  double target_time_s = 0.0;
  double prediction = 0.0;
  double truth = 0.0;
};

// One prediction per window that fits inside `block`; features are
// normalized with the model's training statistics and the output is mapped
// back to the target scale.
std::vector<Prediction> predict_block(const MlpModel& m, const SubjectSeries& s,
                                      const HorizonConfig& cfg,
                                      const ForecastMode& mode, SampleRange block);

// Versioned text checkpoint: layer dims, normalization statistics and
// parameters, round-tripping every double exactly.
void save_model(const MlpModel& m, std::ostream& out);
void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(std::istream& in);
MlpModel load_model(const std::string& path);

}  // namespace wlf
