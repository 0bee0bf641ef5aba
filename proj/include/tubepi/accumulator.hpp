#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>

namespace tubepi {

using Complex = std::complex<double>;

// Streaming mean / second moment of complex samples. merge() is commutative
// bitwise and associative up to rounding, so partial results from any
// partition of the samples combine to the same estimate.
class MCAccumulator {
public:
    void add(Complex x) {
        ++count_;
        const Complex delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        const Complex delta2 = x - mean_;
        m2_ += delta.real() * delta2.real() + delta.imag() * delta2.imag();
    }

    void merge(const MCAccumulator& other) { *this = merged(*this, other); }

    static MCAccumulator merged(const MCAccumulator& a, const MCAccumulator& b) {
        if (a.count_ == 0) return b;
        if (b.count_ == 0) return a;
        MCAccumulator out;
        out.count_ = a.count_ + b.count_;
        const double na = static_cast<double>(a.count_);
        const double nb = static_cast<double>(b.count_);
        const double n = static_cast<double>(out.count_);
        out.mean_ = (na * a.mean_ + nb * b.mean_) / n;
        const Complex d = b.mean_ - a.mean_;
        out.m2_ = (a.m2_ + b.m2_) + std::norm(d) * (na * nb / n);
        return out;
    }

    std::uint64_t count() const { return count_; }
    Complex mean() const { return mean_; }
    // Sum of squared deviations of the real and imaginary parts.
    double m2() const { return m2_; }
    double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
    double std_error() const { return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0; }

private:
    std::uint64_t count_ = 0;
    Complex mean_{0.0, 0.0};
    double m2_ = 0.0;
};

enum class Signature { Lorentzian, Euclidean };

inline const char* to_string(Signature s) { return s == Signature::Lorentzian ? "lorentzian" : "euclidean"; }

struct KernelEstimate {
    Complex value{0.0, 0.0};
    double std_error = 0.0;
    std::uint64_t n_samples = 0;
    // Metadata.
    std::string mode;
    std::optional<Complex> theta;
    std::optional<double> partition_mesh;
    std::uint64_t seed = 0;

    static KernelEstimate from(const MCAccumulator& acc) {
        KernelEstimate e;
        e.value = acc.mean();
        e.std_error = acc.std_error();
        e.n_samples = acc.count();
        return e;
    }
};

}  // namespace tubepi
