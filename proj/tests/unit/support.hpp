#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// Sample mean and its standard error.
struct MeanSe {
    double mean = 0, se = 0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
    double s = 0, s2 = 0;
    for (double v : x) s += v;
    const double n = static_cast<double>(x.size());
    const double m = s / n;
    for (double v : x) s2 += (v - m) * (v - m);
    return {m, std::sqrt(s2 / (n - 1) / n)};
}

// |estimate - target| within k standard errors.
inline bool within_sigma(const MeanSe& e, double target, double k = 3.0) {
    return std::abs(e.mean - target) <= k * e.se;
}

// Least-squares slope of y on x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}
