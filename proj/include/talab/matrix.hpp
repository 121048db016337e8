#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "talab/error.hpp"

namespace talab {

// Upper bound on n for any n^2-sized intermediate.
inline constexpr std::size_t kMaxSequence = 64;

// Dense row-major matrix.
template <class S>
class Matrix {
public:
    using value_type = S;

    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, const S& fill)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<S> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        require(data_.size() == rows_ * cols_, ErrorKind::ShapeMismatch,
                "entry count " + std::to_string(data_.size()) + " does not match " + std::to_string(rows_) +
                    "x" + std::to_string(cols_));
    }

    static Matrix from_rows(const std::vector<std::vector<S>>& rows) {
        require(!rows.empty() && !rows.front().empty(), ErrorKind::ShapeMismatch, "empty matrix literal");
        std::vector<S> data;
        for (const auto& r : rows) {
            require(r.size() == rows.front().size(), ErrorKind::ShapeMismatch, "ragged matrix literal");
            data.insert(data.end(), r.begin(), r.end());
        }
        return Matrix(rows.size(), rows.front().size(), std::move(data));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const S& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<S>& data() noexcept { return data_; }
    const std::vector<S>& data() const noexcept { return data_; }

    Matrix row(std::size_t i) const {
        return Matrix(1, cols_, std::vector<S>(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_));
    }

    Matrix transposed() const {
        std::vector<S> out;
        out.reserve(data_.size());
        for (std::size_t j = 0; j < cols_; ++j)
            for (std::size_t i = 0; i < rows_; ++i) out.push_back((*this)(i, j));
        return Matrix(cols_, rows_, std::move(out));
    }

    template <class F>
    auto map(F&& f) const -> Matrix<decltype(f(std::declval<const S&>()))> {
        using T = decltype(f(std::declval<const S&>()));
        std::vector<T> out;
        out.reserve(data_.size());
        for (const auto& x : data_) out.push_back(f(x));
        return Matrix<T>(rows_, cols_, std::move(out));
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<S> data_;
};

inline std::string shape_string(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

template <class S>
std::string shape_string(const Matrix<S>& m) {
    return shape_string(m.rows(), m.cols());
}

}  // namespace talab
