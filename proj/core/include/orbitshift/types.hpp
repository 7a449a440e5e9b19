#ifndef ORBITSHIFT_TYPES_HPP
#define ORBITSHIFT_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace orbitshift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr const char* kVersion = "0.1.0";

/// Evaluation outside the field's domain (R <= 0, vanishing toroidal
/// component, non-finite value).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Step-size collapse, step-count overflow or a non-finite state during
/// integration.
class IntegrationError : public std::runtime_error {
public:
    explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

/// Newton shooting failed to converge.
class NewtonError : public std::runtime_error {
public:
    explicit NewtonError(const std::string& what) : std::runtime_error(what) {}
};

/// A unit (or numerically unit) multiplier makes the requested solve singular.
class DegenerateCycleError : public std::runtime_error {
public:
    explicit DegenerateCycleError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested derivative order is not available for this system.
class MissingDerivativeError : public std::runtime_error {
public:
    explicit MissingDerivativeError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration; carries the offending key when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::string key = "")
        : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Rank-3 tensor T(i,j,k), symmetric in (j,k) when it stores second
/// spatial derivatives: T(i,j,k) = d^2 F_i / dx_j dx_k.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int n_out, int n_in)
        : n_out_(n_out), n_in_(n_in), data_(static_cast<size_t>(n_out) * n_in * n_in, 0.0) {}

    double& operator()(int i, int j, int k) { return data_[idx(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[idx(i, j, k)]; }

    int size_out() const { return n_out_; }
    int size_in() const { return n_in_; }
    bool empty() const { return data_.empty(); }

    /// out_i = T(i,j,k) a_j b_k
    Vec bilinear(const Vec& a, const Vec& b) const {
        Vec out = Vec::Zero(n_out_);
        for (int i = 0; i < n_out_; ++i) {
            double s = 0;
            for (int j = 0; j < n_in_; ++j)
                for (int k = 0; k < n_in_; ++k) s += data_[idx(i, j, k)] * a[j] * b[k];
            out[i] = s;
        }
        return out;
    }

    /// M(i,j) = T(i,j,k) a_k
    Mat contract(const Vec& a) const {
        Mat out = Mat::Zero(n_out_, n_in_);
        for (int i = 0; i < n_out_; ++i)
            for (int j = 0; j < n_in_; ++j) {
                double s = 0;
                for (int k = 0; k < n_in_; ++k) s += data_[idx(i, j, k)] * a[k];
                out(i, j) = s;
            }
        return out;
    }

    Tensor3& operator+=(const Tensor3& o) {
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor3& operator*=(double s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

private:
    size_t idx(int i, int j, int k) const {
        return (static_cast<size_t>(i) * n_in_ + j) * n_in_ + k;
    }
    int n_out_ = 0, n_in_ = 0;
    std::vector<double> data_;
};

/// Rank-4 tensor T(i,j,k,l), symmetric in (j,k,l) for third derivatives.
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(int n_out, int n_in)
        : n_out_(n_out), n_in_(n_in),
          data_(static_cast<size_t>(n_out) * n_in * n_in * n_in, 0.0) {}

    double& operator()(int i, int j, int k, int l) { return data_[idx(i, j, k, l)]; }
    double operator()(int i, int j, int k, int l) const { return data_[idx(i, j, k, l)]; }

    int size_out() const { return n_out_; }
    int size_in() const { return n_in_; }
    bool empty() const { return data_.empty(); }

    /// out_i = T(i,j,k,l) a_j b_k c_l
    Vec trilinear(const Vec& a, const Vec& b, const Vec& c) const {
        Vec out = Vec::Zero(n_out_);
        for (int i = 0; i < n_out_; ++i) {
            double s = 0;
            for (int j = 0; j < n_in_; ++j)
                for (int k = 0; k < n_in_; ++k)
                    for (int l = 0; l < n_in_; ++l)
                        s += data_[idx(i, j, k, l)] * a[j] * b[k] * c[l];
            out[i] = s;
        }
        return out;
    }

    Tensor4& operator+=(const Tensor4& o) {
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor4& operator*=(double s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

private:
    size_t idx(int i, int j, int k, int l) const {
        return ((static_cast<size_t>(i) * n_in_ + j) * n_in_ + k) * n_in_ + l;
    }
    int n_out_ = 0, n_in_ = 0;
    std::vector<double> data_;
};

}  // namespace orbitshift

#endif
