#include "ehcr/nn.hpp"

#include "ehcr/errors.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace ehcr::nn {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Logistic: return "logistic";
    case Activation::Relu: return "relu";
    }
    return "linear";
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "logistic") return Activation::Logistic;
    if (s == "relu") return Activation::Relu;
    throw CheckpointError("unknown activation tag '" + s + "'");
}

Mlp::Mlp(std::vector<int> dims, Activation output) : dims_(std::move(dims)), output_(output) {
    if (dims_.size() < 2) throw UsageError("Mlp needs at least input and output dimensions");
    for (int d : dims_)
        if (d < 1) throw UsageError("Mlp dimensions must be positive");
    layers_.resize(dims_.size() - 1);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].W = Matrix::Zero(dims_[k + 1], dims_[k]);
        layers_[k].b = Vector::Zero(dims_[k + 1]);
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

namespace {

template <typename LayerVec>
auto& locate(LayerVec& layers, std::size_t i) {
    for (auto& l : layers) {
        const auto nw = static_cast<std::size_t>(l.W.size());
        if (i < nw) {
            const auto cols = static_cast<std::size_t>(l.W.cols());
            return l.W(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols));
        }
        i -= nw;
        const auto nb = static_cast<std::size_t>(l.b.size());
        if (i < nb) return l.b(static_cast<Eigen::Index>(i));
        i -= nb;
    }
    throw UsageError("parameter index out of range");
}

Matrix activate(Activation a, const Matrix& z) {
    switch (a) {
    case Activation::Linear: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Logistic: return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    }
    return z;
}

// Elementwise derivative of the activation at pre-activation z, multiplied into g.
void apply_derivative(Activation a, const Matrix& z, Matrix& g) {
    switch (a) {
    case Activation::Linear: return;
    case Activation::Relu: g = g.cwiseProduct(z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })); return;
    case Activation::Logistic:
        g = g.cwiseProduct(z.unaryExpr([](double v) {
            const double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 - s);
        }));
        return;
    }
}

} // namespace

double Mlp::parameter(std::size_t i) const { return locate(layers_, i); }

void Mlp::set_parameter(std::size_t i, double v) {
    locate(layers_, i) = v;
    ++version_;
}

Gradients Gradients::zeros_like(const Mlp& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
        g.dW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        g.db.push_back(Vector::Zero(l.b.size()));
    }
    return g;
}

void Gradients::scale(double s) {
    for (auto& w : dW) w *= s;
    for (auto& b : db) b *= s;
}

AdamState AdamState::for_net(const Mlp& net) {
    AdamState st;
    for (const auto& l : net.layers()) {
        st.mW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        st.vW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        st.mb.push_back(Vector::Zero(l.b.size()));
        st.vb.push_back(Vector::Zero(l.b.size()));
    }
    return st;
}

Mlp init(const std::vector<int>& dims, Activation output, Rng& rng) {
    Mlp net(dims, output);
    for (auto& l : net.mutable_layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.W.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        // Row-major draw order keeps initialization independent of Eigen's storage order.
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = u(rng);
    }
    return net;
}

Matrix forward(const Mlp& net, const Matrix& x, ForwardCache* cache) {
    if (x.rows() != net.input_dim()) throw UsageError("forward: input dimension mismatch");
    const auto& layers = net.layers();
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
        cache->owner = &net;
        cache->version = net.version();
    }
    Matrix h = x;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        Matrix z = layers[k].W * h;
        z.colwise() += layers[k].b;
        const bool last = k + 1 == layers.size();
        Matrix a = activate(last ? net.output_activation() : Activation::Relu, z);
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->pre.push_back(std::move(z));
        }
        h = std::move(a);
    }
    return h;
}

Vector forward(const Mlp& net, const Vector& x) {
    Matrix xm = x;
    return forward(net, xm, nullptr).col(0);
}

BackwardResult backward(const Mlp& net, const ForwardCache& cache, const Matrix& dy) {
    if (cache.owner != &net || cache.version != net.version() || cache.pre.size() != net.layers().size())
        throw UsageError("backward: cache does not belong to the current network state");
    const auto& layers = net.layers();
    const auto L = layers.size();
    if (dy.rows() != net.output_dim() || dy.cols() != cache.pre.back().cols())
        throw UsageError("backward: output gradient shape mismatch");

    BackwardResult res;
    res.grads.dW.resize(L);
    res.grads.db.resize(L);
    Matrix g = dy;
    for (std::size_t k = L; k-- > 0;) {
        apply_derivative(k + 1 == L ? net.output_activation() : Activation::Relu, cache.pre[k], g);
        res.grads.dW[k] = g * cache.inputs[k].transpose();
        res.grads.db[k] = g.rowwise().sum();
        g = layers[k].W.transpose() * g;
    }
    res.dx = std::move(g);
    return res;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& st, double lr) {
    auto& layers = net.mutable_layers();
    if (grads.dW.size() != layers.size() || st.mW.size() != layers.size())
        throw UsageError("adam_step: shape mismatch");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    const double b1 = st.beta1, b2 = st.beta2, eps = st.eps;
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < layers.size(); ++k) {
        update(layers[k].W, grads.dW[k], st.mW[k], st.vW[k]);
        update(layers[k].b, grads.db[k], st.mb[k], st.vb[k]);
    }
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_shape(source)) throw UsageError("soft_update: shape mismatch");
    auto& t = target.mutable_layers();
    const auto& s = source.layers();
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k].W = tau * s[k].W + (1.0 - tau) * t[k].W;
        t[k].b = tau * s[k].b + (1.0 - tau) * t[k].b;
    }
}

namespace {

void write_matrix(std::ostream& os, const char* tag, const Matrix& m) {
    os << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
        os << '\n';
    }
}

Matrix read_matrix(std::istream& is, const char* tag) {
    std::string t;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> t) || t != tag || !(is >> rows >> cols) || rows < 0 || cols < 0)
        throw CheckpointError(std::string("checkpoint: expected matrix '") + tag + "'");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!(is >> m(r, c))) throw CheckpointError("checkpoint: truncated matrix");
    return m;
}

void expect(std::istream& is, const std::string& tok) {
    std::string got;
    if (!(is >> got) || got != tok) throw CheckpointError("checkpoint: expected '" + tok + "', got '" + got + "'");
}

} // namespace

void save(std::ostream& os, const Mlp& net) {
    const auto old = os.precision(17);
    os << "mlp v1\ndims " << net.dims().size();
    for (int d : net.dims()) os << ' ' << d;
    os << "\nhidden relu\noutput " << to_string(net.output_activation()) << '\n';
    for (const auto& l : net.layers()) {
        write_matrix(os, "W", l.W);
        write_matrix(os, "b", l.b.transpose());
    }
    os << "end\n";
    os.precision(old);
}

Mlp load(std::istream& is) {
    expect(is, "mlp");
    expect(is, "v1");
    expect(is, "dims");
    std::size_t n = 0;
    if (!(is >> n) || n < 2 || n > 64) throw CheckpointError("checkpoint: bad layer count");
    std::vector<int> dims(n);
    for (auto& d : dims)
        if (!(is >> d) || d < 1) throw CheckpointError("checkpoint: bad dimension");
    expect(is, "hidden");
    expect(is, "relu");
    expect(is, "output");
    std::string act;
    is >> act;
    Mlp net(dims, activation_from_string(act));
    auto& layers = net.mutable_layers();
    for (auto& l : layers) {
        Matrix W = read_matrix(is, "W");
        Matrix b = read_matrix(is, "b");
        if (W.rows() != l.W.rows() || W.cols() != l.W.cols() || b.rows() != 1 || b.cols() != l.b.size())
            throw CheckpointError("checkpoint: layer shape does not match dims");
        l.W = W;
        l.b = b.transpose();
    }
    expect(is, "end");
    return net;
}

void save(std::ostream& os, const AdamState& st) {
    const auto old = os.precision(17);
    os << "adam v1\nstep " << st.step << "\nbetas " << st.beta1 << ' ' << st.beta2 << ' ' << st.eps << '\n';
    os << "layers " << st.mW.size() << '\n';
    for (std::size_t k = 0; k < st.mW.size(); ++k) {
        write_matrix(os, "mW", st.mW[k]);
        write_matrix(os, "vW", st.vW[k]);
        write_matrix(os, "mb", st.mb[k].transpose());
        write_matrix(os, "vb", st.vb[k].transpose());
    }
    os << "end\n";
    os.precision(old);
}

AdamState load_adam(std::istream& is, const Mlp& net) {
    expect(is, "adam");
    expect(is, "v1");
    AdamState st = AdamState::for_net(net);
    expect(is, "step");
    is >> st.step;
    expect(is, "betas");
    is >> st.beta1 >> st.beta2 >> st.eps;
    expect(is, "layers");
    std::size_t n = 0;
    if (!(is >> n) || n != st.mW.size()) throw CheckpointError("checkpoint: adam layer count mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        st.mW[k] = read_matrix(is, "mW");
        st.vW[k] = read_matrix(is, "vW");
        st.mb[k] = read_matrix(is, "mb").transpose();
        st.vb[k] = read_matrix(is, "vb").transpose();
        const auto& l = net.layers()[k];
        if (st.mW[k].rows() != l.W.rows() || st.mW[k].cols() != l.W.cols() || st.mb[k].size() != l.b.size())
            throw CheckpointError("checkpoint: adam shape mismatch");
    }
    expect(is, "end");
    return st;
}

} // namespace ehcr::nn
