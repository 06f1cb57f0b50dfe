#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mmgr {

/// Dense row-major matrix of 64-bit reals.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds a matrix from nested braces, e.g. `Matrix::from_rows({{1, 2}, {3, 4}})`.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<double> data() noexcept { return m_data; }
    std::span<const double> data() const noexcept { return m_data; }
    std::span<double> row(std::size_t r) { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const double> row(std::size_t r) const { return {m_data.data() + r * m_cols, m_cols}; }

    void fill(double value);
    bool same_shape(const Matrix& other) const noexcept {
        return m_rows == other.m_rows && m_cols == other.m_cols;
    }
    std::string shape_string() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

// Forward operations. Every one of them validates shapes and throws
// ShapeError naming both operands on mismatch.

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Adds a 1×cols row to every row of `a`.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);
/// Column sums as a 1×cols matrix (backward of add_row_broadcast).
Matrix column_sum(const Matrix& a);

/// Mean of the rows of `rows` as a 1×cols matrix. Zero rows yield zeros.
Matrix row_mean(const Matrix& rows);
/// Mean of a set of equally shaped row vectors.
Matrix row_mean(std::span<const Matrix> rows);

/// Saturates at the representable values nearest 0 and 1, so the result is
/// strictly inside (0, 1) for every finite input.
double sigmoid(double x);
Matrix sigmoid(const Matrix& x);
Matrix relu(const Matrix& x);
/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

// In-place accumulation helpers used by the layer kernels.
void add_inplace(Matrix& target, const Matrix& value);
void axpy_inplace(Matrix& target, double alpha, const Matrix& value);
/// target += a·b
void matmul_accumulate(Matrix& target, const Matrix& a, const Matrix& b);
/// target += aᵀ·b
void matmul_tn_accumulate(Matrix& target, const Matrix& a, const Matrix& b);

// Backward rules. Each takes the upstream gradient of the forward output.

struct MatmulGrads {
    Matrix da;
    Matrix db;
};
/// dA = dC·Bᵀ, dB = Aᵀ·dC
MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc);

struct HadamardGrads {
    Matrix da;
    Matrix db;
};
HadamardGrads hadamard_backward(const Matrix& a, const Matrix& b, const Matrix& dc);

Matrix scale_backward(double factor, const Matrix& dy);
Matrix transpose_backward(const Matrix& dy);
/// Distributes the gradient of a row mean evenly over `count` rows.
Matrix row_mean_backward(const Matrix& dmean, std::size_t count);
/// Backward of sigmoid given its output s: dy ∘ s ∘ (1 − s).
Matrix sigmoid_backward(const Matrix& s, const Matrix& dy);
/// Backward of relu given its input x.
Matrix relu_backward(const Matrix& x, const Matrix& dy);
/// Backward of softmax_rows given its output s: s ∘ (dy − rowsum(dy ∘ s)).
Matrix softmax_rows_backward(const Matrix& s, const Matrix& dy);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

}  // namespace mmgr
