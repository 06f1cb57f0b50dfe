#include "mmgr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>

#include "mmgr/errors.hpp"

namespace mmgr {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
            static_cast<Eigen::Index>(m.cols())};
}

MutMap view(Matrix& m) {
    return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
            static_cast<Eigen::Index>(m.cols())};
}

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

template <typename F>
Matrix map_unary(const Matrix& x, F&& f) {
    Matrix out(x.rows(), x.cols());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <typename F>
Matrix map_binary(const char* op, const Matrix& a, const Matrix& b, F&& f) {
    require_same_shape(op, a, b);
    Matrix out(a.rows(), a.cols());
    auto pa = a.data();
    auto pb = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = f(pa[i], pb[i]);
    return out;
}

// Products below this many multiply-adds use a plain loop that accumulates
// each entry in index order.
constexpr std::size_t kSmallProduct = 4096;

}  // namespace

double sigmoid(double x) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::clamp(s, lo, hi);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
    if (m_data.size() != rows * cols) {
        throw ShapeError("Matrix: data length " + std::to_string(m_data.size()) +
                         " does not match shape " + shape_string());
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(m_data.begin(), m_data.end(), value); }

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << '[' << m_rows << 'x' << m_cols << ']';
    return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    if (a.cols() == 0) return out;
    if (a.rows() * a.cols() * b.cols() <= kSmallProduct) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            auto dst = out.row(i);
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double aik = a(i, k);
                auto src = b.row(k);
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
            }
        }
        return out;
    }
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    if (a.rows() == 0) return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    if (a.cols() == 0) return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

void matmul_accumulate(Matrix& target, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_mismatch("matmul_accumulate", a, b);
    if (target.rows() != a.rows() || target.cols() != b.cols())
        shape_mismatch("matmul_accumulate(target)", target, b);
    if (a.cols() == 0 || a.rows() == 0) return;
    view(target).noalias() += view(a) * view(b);
}

void matmul_tn_accumulate(Matrix& target, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_mismatch("matmul_tn_accumulate", a, b);
    if (target.rows() != a.cols() || target.cols() != b.cols())
        shape_mismatch("matmul_tn_accumulate(target)", target, b);
    if (a.rows() == 0) return;
    view(target).noalias() += view(a).transpose() * view(b);
}

Matrix add(const Matrix& a, const Matrix& b) {
    return map_binary("add", a, b, [](double x, double y) { return x + y; });
}

Matrix sub(const Matrix& a, const Matrix& b) {
    return map_binary("sub", a, b, [](double x, double y) { return x - y; });
}

Matrix scale(const Matrix& a, double factor) {
    return map_unary(a, [factor](double x) { return x * factor; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    return map_binary("hadamard", a, b, [](double x, double y) { return x * y; });
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("add_row_broadcast", a, row);
    Matrix out = a;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto dst = out.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += row(0, c);
    }
    return out;
}

Matrix column_sum(const Matrix& a) {
    Matrix out(1, a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) out(0, c) += src[c];
    }
    return out;
}

Matrix row_mean(const Matrix& rows) {
    Matrix out = column_sum(rows);
    if (rows.rows() > 0) out = scale(out, 1.0 / static_cast<double>(rows.rows()));
    return out;
}

Matrix row_mean(std::span<const Matrix> rows) {
    if (rows.empty()) return Matrix();
    Matrix acc(1, rows.front().cols());
    for (const auto& r : rows) {
        if (r.rows() != 1 || r.cols() != acc.cols()) shape_mismatch("row_mean", acc, r);
        add_inplace(acc, r);
    }
    return scale(acc, 1.0 / static_cast<double>(rows.size()));
}

Matrix sigmoid(const Matrix& x) { return map_unary(x, [](double v) { return sigmoid(v); }); }

Matrix relu(const Matrix& x) {
    return map_unary(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto src = logits.row(r);
        auto dst = out.row(r);
        if (src.empty()) continue;
        const double mx = *std::max_element(src.begin(), src.end());
        double total = 0.0;
        for (std::size_t c = 0; c < src.size(); ++c) {
            dst[c] = std::exp(src[c] - mx);
            total += dst[c];
        }
        for (double& v : dst) v /= total;
    }
    return out;
}

void add_inplace(Matrix& target, const Matrix& value) {
    require_same_shape("add_inplace", target, value);
    auto dst = target.data();
    auto src = value.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void axpy_inplace(Matrix& target, double alpha, const Matrix& value) {
    require_same_shape("axpy_inplace", target, value);
    auto dst = target.data();
    auto src = value.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc) {
    if (dc.rows() != a.rows() || dc.cols() != b.cols()) shape_mismatch("matmul_backward", a, dc);
    return {matmul_nt(dc, b), matmul_tn(a, dc)};
}

HadamardGrads hadamard_backward(const Matrix& a, const Matrix& b, const Matrix& dc) {
    return {hadamard(dc, b), hadamard(dc, a)};
}

Matrix scale_backward(double factor, const Matrix& dy) { return scale(dy, factor); }

Matrix transpose_backward(const Matrix& dy) { return transpose(dy); }

Matrix row_mean_backward(const Matrix& dmean, std::size_t count) {
    if (dmean.rows() != 1) throw ShapeError("row_mean_backward: expected a row, got " + dmean.shape_string());
    Matrix out(count, dmean.cols());
    if (count == 0) return out;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < dmean.cols(); ++c) out(r, c) = dmean(0, c) * inv;
    return out;
}

Matrix sigmoid_backward(const Matrix& s, const Matrix& dy) {
    return map_binary("sigmoid_backward", s, dy,
                      [](double sv, double g) { return g * sv * (1.0 - sv); });
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
    return map_binary("relu_backward", x, dy, [](double xv, double g) { return xv > 0.0 ? g : 0.0; });
}

Matrix softmax_rows_backward(const Matrix& s, const Matrix& dy) {
    require_same_shape("softmax_rows_backward", s, dy);
    Matrix out(s.rows(), s.cols());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        auto sr = s.row(r);
        auto gr = dy.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < sr.size(); ++c) dot += sr[c] * gr[c];
        auto dst = out.row(r);
        for (std::size_t c = 0; c < sr.size(); ++c) dst[c] = sr[c] * (gr[c] - dot);
    }
    return out;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape("max_abs_diff", a, b);
    double m = 0.0;
    auto pa = a.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < pa.size(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
    return m;
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mmgr
