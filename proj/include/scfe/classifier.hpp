#pragma once

#include "scfe/numerics.hpp"

#include <string>
#include <vector>

namespace scfe {

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Vector bias;              // out
    Activation activation = Activation::identity;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

/// Feedforward network. A single output unit means a binary model whose head
/// applies a sigmoid; otherwise the outputs are multiclass logits.
class ClassifierModel {
public:
    ClassifierModel() = default;
    explicit ClassifierModel(std::vector<DenseLayer> layers);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& mutable_layers() { return layers_; }

    Eigen::Index input_dims() const;
    Eigen::Index output_dims() const;
    bool is_binary() const { return output_dims() == 1; }
    int num_classes() const { return is_binary() ? 2 : static_cast<int>(output_dims()); }

    /// Raw pre-head outputs.
    Vector forward_logits(const Vector& x) const;
    /// f(x): sigmoid of the logit for binary models, the logits otherwise.
    Vector output(const Vector& x) const;
    /// argmax with lowest-index ties; binary predicts 1 iff sigmoid > 0.5.
    int predict(const Vector& x) const;
    Labels predict(const Matrix& x) const;

private:
    std::vector<DenseLayer> layers_;
    void validate() const;
};

/// `hidden_layers` ReLU layers of width `hidden`, then a linear output layer.
/// Weights are drawn uniformly from +-sqrt(6/(fan_in+fan_out)), biases zero.
ClassifierModel make_mlp(Eigen::Index inputs, Eigen::Index hidden, int hidden_layers,
                         Eigen::Index outputs, Rng& rng);
ClassifierModel make_linear(Eigen::Index inputs, Eigen::Index outputs, Rng& rng);

enum class LossMode { binary, multiclass };

struct LossConfig {
    LossMode mode = LossMode::multiclass;
    double cutoff = 0.0;  // c
    int target = 0;       // y_cf
};

LossConfig loss_config_for(const ClassifierModel& model, int target, double cutoff = 0.0);

/// Hinge-style counterfactual loss:
///   binary      max{(1 - 2 y_cf) f(x), -c}
///   multiclass  max{max_{i != y_cf} f_i(x) - f_{y_cf}(x), -c}
double cfe_loss(const ClassifierModel& model, const Vector& x, const LossConfig& cfg);

/// Gradient of cfe_loss w.r.t. x by backpropagation. At a kink the branch
/// that appears first in the max (lowest index) is taken; relu'(0) = 0.
Vector input_gradient(const ClassifierModel& model, const Vector& x, const LossConfig& cfg);

struct TrainOptions {
    int epochs = 20;
    std::size_t batch = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean cross-entropy per epoch
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;      // NaN when no test data given
};

/// Mini-batch Adam on cross-entropy (softmax for multiclass, sigmoid for binary).
TrainReport train_adam(ClassifierModel& model, const Matrix& train_x, const Labels& train_y,
                       const TrainOptions& opts, Rng& rng, const Matrix* test_x = nullptr,
                       const Labels* test_y = nullptr);

double accuracy(const ClassifierModel& model, const Matrix& x, const Labels& y);

void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);
std::string serialize_model(const ClassifierModel& model);
ClassifierModel parse_model(const std::string& text);

} // namespace scfe
