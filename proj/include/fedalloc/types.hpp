#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedalloc {

// Dense row-major matrix, sized for N devices x K subcarriers.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double row_sum(std::size_t r) const {
        double s = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) s += v_[r * cols_ + c];
        return s;
    }
    double col_sum(std::size_t c) const {
        double s = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) s += v_[r * cols_ + c];
        return s;
    }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

    bool operator==(const Mat& o) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

// Error taxonomy: configuration problems (bad inputs, bad config files) vs
// infeasible problem instances. The CLI maps these to distinct exit codes.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

struct Weights {
    double kappa1 = 1.0;  // 1/J, energy weight
    double kappa2 = 1.0;  // 1/s, FL delay weight
    double kappa3 = 1.0;  // unitless, accuracy weight

    void validate() const {
        if (kappa1 < 0 || kappa2 < 0 || kappa3 < 0)
            throw ConfigError("weights must be non-negative");
    }
};

}  // namespace fedalloc
