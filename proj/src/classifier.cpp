#include "scfe/classifier.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace scfe {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void apply_activation(Activation a, Vector& v) {
    if (a == Activation::relu) {
        v = v.cwiseMax(0.0);
    }
}

// Pre-activations and activations of every layer; acts[0] is the input.
struct ForwardTrace {
    std::vector<Vector> pre;
    std::vector<Vector> acts;
};

ForwardTrace trace_forward(const std::vector<DenseLayer>& layers, const Vector& x) {
    ForwardTrace tr;
    tr.acts.push_back(x);
    for (const auto& layer : layers) {
        Vector z = layer.weights * tr.acts.back() + layer.bias;
        tr.pre.push_back(z);
        apply_activation(layer.activation, z);
        tr.acts.push_back(std::move(z));
    }
    return tr;
}

// Backpropagate dL/d(output) to dL/d(input); optionally accumulate parameter gradients.
Vector backward(const std::vector<DenseLayer>& layers, const ForwardTrace& tr, Vector upstream,
                std::vector<DenseLayer>* grads) {
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        if (layer.activation == Activation::relu) {
            for (Eigen::Index i = 0; i < upstream.size(); ++i) {
                if (!(tr.pre[li](i) > 0.0)) {
                    upstream(i) = 0.0;
                }
            }
        }
        if (grads != nullptr) {
            (*grads)[li].weights.noalias() += upstream * tr.acts[li].transpose();
            (*grads)[li].bias += upstream;
        }
        upstream = layer.weights.transpose() * upstream;
    }
    return upstream;
}

DenseLayer random_layer(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng) {
    DenseLayer layer;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) {
            layer.weights(r, c) = rng.uniform(-bound, bound);
        }
    }
    layer.bias = Vector::Zero(out);
    layer.activation = act;
    return layer;
}

} // namespace

std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu:
        return "relu";
    case Activation::identity:
        return "identity";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "identity") {
        return Activation::identity;
    }
    throw ParseError("unknown activation '" + name + "'");
}

ClassifierModel::ClassifierModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    validate();
}

void ClassifierModel::validate() const {
    if (layers_.empty()) {
        throw InvalidArgument("classifier: at least one layer required");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.bias.size() != l.outputs()) {
            throw InvalidArgument("classifier: bias size mismatch in layer " + std::to_string(i));
        }
        if (i > 0 && l.inputs() != layers_[i - 1].outputs()) {
            throw InvalidArgument("classifier: layer " + std::to_string(i) +
                                  " input width does not match previous output");
        }
        if (!l.weights.allFinite() || !l.bias.allFinite()) {
            throw InvalidArgument("classifier: non-finite weights in layer " + std::to_string(i));
        }
    }
}

Eigen::Index ClassifierModel::input_dims() const { return layers_.front().inputs(); }
Eigen::Index ClassifierModel::output_dims() const { return layers_.back().outputs(); }

Vector ClassifierModel::forward_logits(const Vector& x) const {
    if (x.size() != input_dims()) {
        throw InvalidArgument("forward_logits: expected " + std::to_string(input_dims()) +
                              " features, got " + std::to_string(x.size()));
    }
    Vector a = x;
    for (const auto& layer : layers_) {
        Vector z = layer.weights * a + layer.bias;
        apply_activation(layer.activation, z);
        a = std::move(z);
    }
    return a;
}

Vector ClassifierModel::output(const Vector& x) const {
    Vector f = forward_logits(x);
    if (is_binary()) {
        f(0) = sigmoid(f(0));
    }
    return f;
}

int ClassifierModel::predict(const Vector& x) const {
    const Vector f = output(x);
    if (is_binary()) {
        return f(0) > 0.5 ? 1 : 0;
    }
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < f.size(); ++i) {
        if (f(i) > f(best)) {
            best = i;
        }
    }
    return static_cast<int>(best);
}

Labels ClassifierModel::predict(const Matrix& x) const {
    Labels out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = predict(Vector(x.row(r).transpose()));
    }
    return out;
}

ClassifierModel make_mlp(Eigen::Index inputs, Eigen::Index hidden, int hidden_layers,
                         Eigen::Index outputs, Rng& rng) {
    if (inputs <= 0 || outputs <= 0 || hidden_layers < 0 || (hidden_layers > 0 && hidden <= 0)) {
        throw InvalidArgument("make_mlp: invalid layer sizes");
    }
    std::vector<DenseLayer> layers;
    Eigen::Index width = inputs;
    for (int i = 0; i < hidden_layers; ++i) {
        layers.push_back(random_layer(width, hidden, Activation::relu, rng));
        width = hidden;
    }
    layers.push_back(random_layer(width, outputs, Activation::identity, rng));
    return ClassifierModel(std::move(layers));
}

ClassifierModel make_linear(Eigen::Index inputs, Eigen::Index outputs, Rng& rng) {
    return make_mlp(inputs, 0, 0, outputs, rng);
}

// ---------------------------------------------------------------------------

LossConfig loss_config_for(const ClassifierModel& model, int target, double cutoff) {
    LossConfig cfg;
    cfg.mode = model.is_binary() ? LossMode::binary : LossMode::multiclass;
    cfg.cutoff = cutoff;
    cfg.target = target;
    return cfg;
}

namespace {

void check_loss_config(const ClassifierModel& model, const LossConfig& cfg) {
    const bool binary_model = model.is_binary();
    if ((cfg.mode == LossMode::binary) != binary_model) {
        throw InvalidArgument("cfe_loss: loss mode does not match the model head");
    }
    if (cfg.target < 0 || cfg.target >= model.num_classes()) {
        throw InvalidArgument("cfe_loss: target class " + std::to_string(cfg.target) +
                              " out of range");
    }
}

// Index of the largest non-target logit, lowest index on ties.
Eigen::Index runner_up(const Vector& f, int target) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        if (i == target) {
            continue;
        }
        if (best < 0 || f(i) > f(best)) {
            best = i;
        }
    }
    return best;
}

} // namespace

double cfe_loss(const ClassifierModel& model, const Vector& x, const LossConfig& cfg) {
    check_loss_config(model, cfg);
    const Vector f = model.output(x);
    if (cfg.mode == LossMode::binary) {
        const double sign = 1.0 - 2.0 * cfg.target;
        return std::max(sign * f(0), -cfg.cutoff);
    }
    const Eigen::Index j = runner_up(f, cfg.target);
    return std::max(f(j) - f(cfg.target), -cfg.cutoff);
}

Vector input_gradient(const ClassifierModel& model, const Vector& x, const LossConfig& cfg) {
    check_loss_config(model, cfg);
    if (x.size() != model.input_dims()) {
        throw InvalidArgument("input_gradient: dimension mismatch");
    }
    const ForwardTrace tr = trace_forward(model.layers(), x);
    const Vector& logits = tr.acts.back();
    Vector upstream = Vector::Zero(logits.size());

    if (cfg.mode == LossMode::binary) {
        const double sign = 1.0 - 2.0 * cfg.target;
        const double p = sigmoid(logits(0));
        if (sign * p >= -cfg.cutoff) {
            upstream(0) = sign * p * (1.0 - p);
        }
    } else {
        const Eigen::Index j = runner_up(logits, cfg.target);
        if (logits(j) - logits(cfg.target) >= -cfg.cutoff) {
            upstream(j) = 1.0;
            upstream(cfg.target) = -1.0;
        }
    }
    if (upstream.isZero(0.0)) {
        return Vector::Zero(x.size());
    }
    return backward(model.layers(), tr, std::move(upstream), nullptr);
}

// ---------------------------------------------------------------------------

double accuracy(const ClassifierModel& model, const Matrix& x, const Labels& y) {
    if (x.rows() == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const Labels pred = model.predict(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        hits += pred[i] == y[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

TrainReport train_adam(ClassifierModel& model, const Matrix& train_x, const Labels& train_y,
                       const TrainOptions& opts, Rng& rng, const Matrix* test_x,
                       const Labels* test_y) {
    if (train_x.rows() == 0) {
        throw InvalidArgument("train_adam: empty dataset");
    }
    if (static_cast<std::size_t>(train_x.rows()) != train_y.size()) {
        throw InvalidArgument("train_adam: label count does not match rows");
    }
    if (train_x.cols() != model.input_dims()) {
        throw InvalidArgument("train_adam: feature count does not match model input");
    }
    for (int y : train_y) {
        if (y < 0 || y >= model.num_classes()) {
            throw InvalidArgument("train_adam: label " + std::to_string(y) + " out of range");
        }
    }
    if (opts.batch == 0 || opts.epochs < 0 || !(opts.lr > 0.0)) {
        throw InvalidArgument("train_adam: invalid options");
    }

    auto& layers = model.mutable_layers();
    auto zeros_like = [&layers]() {
        std::vector<DenseLayer> z = layers;
        for (auto& l : z) {
            l.weights.setZero();
            l.bias.setZero();
        }
        return z;
    };
    std::vector<DenseLayer> m1 = zeros_like();
    std::vector<DenseLayer> m2 = zeros_like();

    const auto n = static_cast<std::size_t>(train_x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainReport report;
    long step = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += opts.batch) {
            const std::size_t stop = std::min(n, start + opts.batch);
            std::vector<DenseLayer> grads = zeros_like();
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t row = order[k];
                const Vector x = train_x.row(static_cast<Eigen::Index>(row)).transpose();
                const int y = train_y[row];
                const ForwardTrace tr = trace_forward(layers, x);
                const Vector& out = tr.acts.back();
                Vector dout(out.size());
                if (model.is_binary()) {
                    const double p = sigmoid(out(0));
                    const double z = out(0);
                    // log(1 + e^-|z|) form keeps the loss finite for large |z|.
                    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
                    epoch_loss += softplus - (y == 1 ? z : 0.0);
                    dout(0) = p - static_cast<double>(y);
                } else {
                    const double mx = out.maxCoeff();
                    const Vector e = (out.array() - mx).exp().matrix();
                    const double sum = e.sum();
                    epoch_loss += -(out(y) - mx - std::log(sum));
                    dout = e / sum;
                    dout(y) -= 1.0;
                }
                backward(layers, tr, std::move(dout), &grads);
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            ++step;
            const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
            for (std::size_t li = 0; li < layers.size(); ++li) {
                auto update = [&](auto& param, auto& g, auto& m, auto& v) {
                    g *= scale;
                    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
                    v = opts.beta2 * v + (1.0 - opts.beta2) * g.cwiseProduct(g);
                    param.array() -= opts.lr * (m.array() / c1) /
                                     ((v.array() / c2).sqrt() + opts.eps);
                };
                update(layers[li].weights, grads[li].weights, m1[li].weights, m2[li].weights);
                update(layers[li].bias, grads[li].bias, m1[li].bias, m2[li].bias);
            }
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    report.train_accuracy = accuracy(model, train_x, train_y);
    report.test_accuracy = (test_x != nullptr && test_y != nullptr)
                               ? accuracy(model, *test_x, *test_y)
                               : std::numeric_limits<double>::quiet_NaN();
    return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelHeader = "scfe-model v1";

void write_number(std::ostream& os, double v) {
    os << std::setprecision(17) << v;
}

double parse_double(const std::string& token, int line) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("model file line " + std::to_string(line) + ": bad number '" + token + "'");
    }
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) {
        out.push_back(tok);
    }
    return out;
}

} // namespace

std::string serialize_model(const ClassifierModel& model) {
    std::ostringstream os;
    os << kModelHeader << '\n';
    for (const auto& layer : model.layers()) {
        os << "layer " << layer.outputs() << ' ' << layer.inputs() << ' '
           << to_string(layer.activation) << '\n';
        for (Eigen::Index r = 0; r < layer.outputs(); ++r) {
            for (Eigen::Index c = 0; c < layer.inputs(); ++c) {
                if (c > 0) {
                    os << ' ';
                }
                write_number(os, layer.weights(r, c));
            }
            os << '\n';
        }
        for (Eigen::Index r = 0; r < layer.outputs(); ++r) {
            if (r > 0) {
                os << ' ';
            }
            write_number(os, layer.bias(r));
        }
        os << '\n';
    }
    return os.str();
}

ClassifierModel parse_model(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto next_line = [&](const char* what) {
        if (!std::getline(is, line)) {
            throw ParseError(std::string("model file truncated: expected ") + what + " after line " +
                             std::to_string(lineno));
        }
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
    };

    next_line("header");
    if (line != kModelHeader) {
        if (line.rfind("scfe-model", 0) == 0) {
            throw ParseError("model file version mismatch: '" + line + "' (expected '" +
                             kModelHeader + "')");
        }
        throw ParseError("model file: missing '" + std::string(kModelHeader) + "' header");
    }

    std::vector<DenseLayer> layers;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (split_ws(line).empty()) {
            continue;
        }
        const auto head = split_ws(line);
        if (head.size() != 4 || head[0] != "layer") {
            throw ParseError("model file line " + std::to_string(lineno) +
                             ": expected 'layer <rows> <cols> <activation>'");
        }
        long rows = 0;
        long cols = 0;
        try {
            rows = std::stol(head[1]);
            cols = std::stol(head[2]);
        } catch (const std::exception&) {
            throw ParseError("model file line " + std::to_string(lineno) + ": bad layer shape");
        }
        if (rows <= 0 || cols <= 0) {
            throw ParseError("model file line " + std::to_string(lineno) + ": bad layer shape");
        }
        DenseLayer layer;
        layer.activation = parse_activation(head[3]);
        layer.weights.resize(rows, cols);
        layer.bias.resize(rows);
        for (long r = 0; r < rows; ++r) {
            next_line("weight row");
            const auto toks = split_ws(line);
            if (static_cast<long>(toks.size()) != cols) {
                throw ParseError("model file line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(cols) + " weights");
            }
            for (long c = 0; c < cols; ++c) {
                layer.weights(r, c) = parse_double(toks[static_cast<std::size_t>(c)], lineno);
            }
        }
        next_line("bias row");
        const auto toks = split_ws(line);
        if (static_cast<long>(toks.size()) != rows) {
            throw ParseError("model file line " + std::to_string(lineno) + ": expected " +
                             std::to_string(rows) + " biases");
        }
        for (long r = 0; r < rows; ++r) {
            layer.bias(r) = parse_double(toks[static_cast<std::size_t>(r)], lineno);
        }
        layers.push_back(std::move(layer));
    }
    if (layers.empty()) {
        throw ParseError("model file truncated: no layers");
    }
    try {
        return ClassifierModel(std::move(layers));
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

void save_model(const ClassifierModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw InvalidArgument("cannot open '" + path + "' for writing");
    }
    os << serialize_model(model);
    if (!os) {
        throw InvalidArgument("failed writing '" + path + "'");
    }
}

ClassifierModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw InvalidArgument("cannot open model file '" + path + "'");
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_model(buf.str());
}

} // namespace scfe
