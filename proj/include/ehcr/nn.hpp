#pragma once

#include "ehcr/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ehcr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Linear, Logistic, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
    Matrix W;  // out x in
    Vector b;  // out
};

/// Fully connected network. Hidden layers use the rectifier; the output layer
/// uses `output`. Inputs are column vectors, batches are matrices whose
/// columns are samples.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> dims, Activation output);

    const std::vector<int>& dims() const { return dims_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    Activation output_activation() const { return output_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& mutable_layers() {
        ++version_;
        return layers_;
    }

    std::size_t parameter_count() const;
    /// Flat parameter view: per layer, W row-major then b.
    double parameter(std::size_t i) const;
    void set_parameter(std::size_t i, double v);

    /// Monotone counter bumped on every parameter mutation; used to detect stale caches.
    std::uint64_t version() const { return version_; }
    void touch() { ++version_; }

    bool same_shape(const Mlp& other) const { return dims_ == other.dims_; }

private:
    std::vector<int> dims_;
    Activation output_ = Activation::Linear;
    std::vector<DenseLayer> layers_;
    std::uint64_t version_ = 0;
};

/// Per-layer inputs and pre-activations of one forward pass.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
    const Mlp* owner = nullptr;
    std::uint64_t version = 0;
};

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;

    static Gradients zeros_like(const Mlp& net);
    void scale(double s);
};

struct BackwardResult {
    Gradients grads;
    Matrix dx;  // gradient with respect to the input batch
};

struct AdamState {
    std::vector<Matrix> mW, vW;
    std::vector<Vector> mb, vb;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_net(const Mlp& net);
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp init(const std::vector<int>& dims, Activation output, Rng& rng);

Matrix forward(const Mlp& net, const Matrix& x, ForwardCache* cache = nullptr);
Vector forward(const Mlp& net, const Vector& x);

/// Gradients (summed over batch columns) of the scalar loss whose gradient
/// with respect to the network output is `dy`. Throws UsageError on a stale
/// or foreign cache.
BackwardResult backward(const Mlp& net, const ForwardCache& cache, const Matrix& dy);

/// Bias-corrected Adam; `grads` are loss gradients (descent direction is -grads).
void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr);

/// target <- tau*source + (1-tau)*target for every parameter.
void soft_update(Mlp& target, const Mlp& source, double tau);

// Checkpoint record: "mlp v1", dims, activation tags, then per layer the
// row-major weight matrix and bias vector printed with 17 significant digits.
void save(std::ostream& os, const Mlp& net);
Mlp load(std::istream& is);
void save(std::ostream& os, const AdamState& st);
AdamState load_adam(std::istream& is, const Mlp& net);

} // namespace ehcr::nn
