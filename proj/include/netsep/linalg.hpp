#pragma once

#include <Eigen/Dense>

namespace netsep {

// Row-major throughout: rows are per-node embeddings and serialize directly.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

}  // namespace netsep
