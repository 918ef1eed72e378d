#include "fcaug/losses.hpp"

#include <cmath>

#include "fcaug/error.hpp"

namespace fc {

namespace {

/// Row-wise softmax and per-row log-sum-exp.
Matrix softmax_rows(const Matrix& s, Vector& lse)
{
    Matrix p(s.rows(), s.cols());
    lse.resize(s.rows());
    for (Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        const auto e = (s.row(i).array() - m).exp();
        const double sum = e.sum();
        p.row(i) = e / sum;
        lse(i) = m + std::log(sum);
    }
    return p;
}

}  // namespace

LossGrad info_nce(const Matrix& u1, const Matrix& u2, double tau)
{
    if (u1.rows() < 2)
        throw ValidationError("InfoNCE needs at least 2 pairs");
    if (u1.rows() != u2.rows() || u1.cols() != u2.cols())
        throw ValidationError("InfoNCE batches differ in shape");
    if (!(tau > 0.0))
        throw ConfigError("temperature must be > 0");
    const Index n = u1.rows();
    const Matrix s = u1 * u2.transpose() / tau;

    Vector lse_r, lse_c;
    const Matrix p_r = softmax_rows(s, lse_r);
    const Matrix p_c = softmax_rows(s.transpose(), lse_c).transpose();

    const double diag = s.diagonal().sum();
    LossGrad out;
    out.loss = 0.5 * ((lse_r.sum() - diag) + (lse_c.sum() - diag)) / double(n);

    const Matrix eye = Matrix::Identity(n, n);
    const Matrix ds = 0.5 * ((p_r - eye) + (p_c - eye)) / double(n);
    out.grad1 = ds * u2 / tau;
    out.grad2 = ds.transpose() * u1 / tau;
    return out;
}

LossGrad byol_loss(const Matrix& p1, const Matrix& p2, const Matrix& t1, const Matrix& t2)
{
    if (p1.rows() < 1 || p1.rows() != p2.rows() || t1.rows() != p1.rows() || t2.rows() != p1.rows())
        throw ValidationError("BYOL batches differ in size");
    const double n = double(p1.rows());
    Vector n_p1, n_p2, n_t1, n_t2;
    const Matrix q1 = normalize_rows(p1, n_p1);
    const Matrix q2 = normalize_rows(p2, n_p2);
    const Matrix k1 = normalize_rows(t1, n_t1);
    const Matrix k2 = normalize_rows(t2, n_t2);

    const double c12 = (q1.array() * k2.array()).sum();
    const double c21 = (q2.array() * k1.array()).sum();
    LossGrad out;
    out.loss = 0.5 * ((2.0 * n - 2.0 * c12) + (2.0 * n - 2.0 * c21)) / n;
    out.grad1 = normalize_rows_backward(q1, n_p1, -k2 / n);
    out.grad2 = normalize_rows_backward(q2, n_p2, -k1 / n);
    return out;
}

double squared_loss(const Matrix& z, Matrix& grad)
{
    grad = z;
    return 0.5 * z.squaredNorm();
}

}  // namespace fc
