#pragma once

#include "fcaug/encoder.hpp"

namespace fc {

struct LossGrad
{
    double loss = 0.0;
    Matrix grad1;  // dL/d(first batch)
    Matrix grad2;  // dL/d(second batch)
};

/// Symmetric InfoNCE over unit rows: positives (u1_i, u2_i), every other row of the
/// opposite batch is a negative. Loss is the mean of both cross-entropy directions.
LossGrad info_nce(const Matrix& u1, const Matrix& u2, double tau);

/// Symmetrized 2 - 2 cos(p, t) with t held fixed: pairs (p1, t2) and (p2, t1).
/// Gradients are taken only with respect to p1 (grad1) and p2 (grad2).
LossGrad byol_loss(const Matrix& p1, const Matrix& p2, const Matrix& t1, const Matrix& t2);

/// 0.5 * sum of squares; used to check the plain encoder backward pass.
double squared_loss(const Matrix& z, Matrix& grad);

}  // namespace fc
