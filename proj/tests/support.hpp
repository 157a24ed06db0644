#pragma once

#include <string>

#include "branchlab/model_io.hpp"
#include "branchlab/spectral.hpp"

namespace branchlab::testing {

std::string model_path(const std::string& name);

BmpModel load_bmp(const std::string& name);
SpModel load_sp(const std::string& name);

/// Fixed-step RK4 integrator for dX/dt = A X, X(0) = I.  Independent oracle
/// for the matrix exponential (never calls the spectral module).
MatrixXd expm_rk4(const MatrixXd& A, double t, int steps = 20000);

}  // namespace branchlab::testing
