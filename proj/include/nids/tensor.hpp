#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nids/error.hpp"

namespace nids {

// Dense row-major matrix of doubles. The only numeric carrier in the engine:
// batches, weights, gradients and optimizer state are all Tensor2.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) throw ShapeError("Tensor2 data length does not match shape");
    }
    Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged Tensor2 initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    // Throws NumericError naming `where` when any entry is NaN or infinite.
    const Tensor2& check_finite(const char* where) const {
        if (!all_finite()) throw NumericError(std::string("non-finite value in ") + where);
        return *this;
    }

    Tensor2 gather_rows(std::span<const std::size_t> idx) const {
        Tensor2 out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
        }
        return out;
    }

    bool operator==(const Tensor2&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

// a[n x k] * b[k x m]
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    Tensor2 out(a.rows(), b.cols());
    const std::size_t k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double* br = b.row(p).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
    return out;
}

// a^T * b, with a[n x k], b[n x m] -> [k x m]
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
    Tensor2 out(a.cols(), b.cols());
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* br = b.row(i).data();
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            double* o = out.row(p).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
    return out;
}

// a * b^T, with a[n x m], b[k x m] -> [n x k]
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
    Tensor2 out(a.rows(), b.rows());
    const std::size_t m = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t p = 0; p < b.rows(); ++p) {
            const double* br = b.row(p).data();
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += ar[j] * br[j];
            out(i, p) = s;
        }
    }
    return out;
}

// Side-by-side concatenation of equal-height blocks.
inline Tensor2 hconcat(std::span<const Tensor2> blocks) {
    if (blocks.empty()) return {};
    const std::size_t n = blocks.front().rows();
    std::size_t width = 0;
    for (const auto& b : blocks) {
        if (b.rows() != n) throw ShapeError("hconcat: row counts differ");
        width += b.cols();
    }
    Tensor2 out(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        auto o = out.row(i).begin();
        for (const auto& b : blocks) o = std::copy(b.row(i).begin(), b.row(i).end(), o);
    }
    return out;
}

// Inverse of hconcat: splits columns into blocks of the given widths.
inline std::vector<Tensor2> hsplit(const Tensor2& t, std::span<const std::size_t> widths) {
    std::size_t total = 0;
    for (auto w : widths) total += w;
    if (total != t.cols()) throw ShapeError("hsplit: widths do not sum to column count");
    std::vector<Tensor2> out;
    out.reserve(widths.size());
    for (auto w : widths) out.emplace_back(t.rows(), w);
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto src = t.row(i).begin();
        for (std::size_t b = 0; b < widths.size(); ++b) {
            std::copy_n(src, widths[b], out[b].row(i).begin());
            src += static_cast<std::ptrdiff_t>(widths[b]);
        }
    }
    return out;
}

}  // namespace nids
