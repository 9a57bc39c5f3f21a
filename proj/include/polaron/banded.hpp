#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "polaron/common.hpp"

namespace polaron {

// Symmetric positive definite banded matrix, lower band storage:
// entry (i,j) with j <= i <= j+bw lives at data[j*(bw+1) + (i-j)].
class BandedSpd {
  public:
    BandedSpd(std::size_t n, std::size_t bandwidth) : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

    std::size_t size() const { return n_; }
    std::size_t bandwidth() const { return bw_; }

    double& at(std::size_t i, std::size_t j) { return data_[j * (bw_ + 1) + (i - j)]; }
    double at(std::size_t i, std::size_t j) const { return data_[j * (bw_ + 1) + (i - j)]; }

    // in-place Cholesky A = L L^T in band storage
    void factor() {
        for (std::size_t j = 0; j < n_; ++j) {
            std::size_t k0 = j > bw_ ? j - bw_ : 0;
            double d = at(j, j);
            for (std::size_t k = k0; k < j; ++k) d -= sq(at(j, k));
            if (!(d > 0)) throw numeric_error("BandedSpd: not positive definite at row " + std::to_string(j));
            double ljj = std::sqrt(d);
            at(j, j) = ljj;
            std::size_t imax = std::min(n_ - 1, j + bw_);
            for (std::size_t i = j + 1; i <= imax; ++i) {
                double s = at(i, j);
                std::size_t kk0 = i > bw_ ? i - bw_ : 0;
                if (kk0 < k0) kk0 = k0;
                for (std::size_t k = kk0; k < j; ++k) s -= at(i, k) * at(j, k);
                at(i, j) = s / ljj;
            }
        }
        factored_ = true;
    }

    double log_det() const {
        double s = 0;
        for (std::size_t j = 0; j < n_; ++j) s += std::log(at(j, j));
        return 2.0 * s;
    }

    // solve A x = b given the factorization
    std::vector<double> solve(std::vector<double> b) const {
        // L y = b
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t k0 = i > bw_ ? i - bw_ : 0;
            double s = b[i];
            for (std::size_t k = k0; k < i; ++k) s -= at(i, k) * b[k];
            b[i] = s / at(i, i);
        }
        // L^T x = y
        for (std::size_t i = n_; i-- > 0;) {
            double s = b[i];
            std::size_t jmax = std::min(n_ - 1, i + bw_);
            for (std::size_t j = i + 1; j <= jmax; ++j) s -= at(j, i) * b[j];
            b[i] = s / at(i, i);
        }
        return b;
    }

    // x = L^{-T} z, so x ~ N(0, A^{-1}) for z ~ N(0, I)
    std::vector<double> solve_lt(std::vector<double> z) const {
        for (std::size_t i = n_; i-- > 0;) {
            double s = z[i];
            std::size_t jmax = std::min(n_ - 1, i + bw_);
            for (std::size_t j = i + 1; j <= jmax; ++j) s -= at(j, i) * z[j];
            z[i] = s / at(i, i);
        }
        return z;
    }

    bool factored() const { return factored_; }

  private:
    std::size_t n_, bw_;
    std::vector<double> data_;
    bool factored_ = false;
};

}  // namespace polaron
