#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace polaron {

// Error taxonomy; the CLI maps these onto exit codes (config 2, numeric 3,
// root-not-found 4).
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};
struct mixing_error : numeric_error {
    using numeric_error::numeric_error;
};
struct insufficient_sample_error : numeric_error {
    using numeric_error::numeric_error;
};
struct iteration_limit_error : numeric_error {
    using numeric_error::numeric_error;
};
struct efficiency_error : numeric_error {
    using numeric_error::numeric_error;
};
struct root_not_found_error : error {
    using error::error;
};
struct io_error : error {
    using error::error;
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

inline double sq(double v) { return v * v; }

struct MeanErr {
    double value = 0;
    double stderr_ = 0;
};

inline double trapezoid(const std::vector<double>& f, double h) {
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

inline double vec_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double vec_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = vec_mean(v);
    double s = 0;
    for (double x : v) s += sq(x - m);
    return s / static_cast<double>(v.size() - 1);
}

// Standard error of the mean of a correlated series by non-overlapping batch
// means (default 30 batches).
inline double batch_means_stderr(const std::vector<double>& v, std::size_t n_batches = 30) {
    if (v.size() < 2 * n_batches) n_batches = std::max<std::size_t>(2, v.size() / 2);
    std::size_t bs = v.size() / n_batches;
    if (bs == 0) return 0.0;
    std::vector<double> bm(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0;
        for (std::size_t i = b * bs; i < (b + 1) * bs; ++i) s += v[i];
        bm[b] = s / static_cast<double>(bs);
    }
    return std::sqrt(vec_variance(bm) / static_cast<double>(n_batches));
}

}  // namespace polaron
