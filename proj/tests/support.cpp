#include "support.hpp"

namespace branchlab::testing {

std::string model_path(const std::string& name) {
  return std::string(BRANCHLAB_MODELS_DIR) + "/" + name + ".json";
}

BmpModel load_bmp(const std::string& name) {
  return as_bmp(load_model(model_path(name)));
}

SpModel load_sp(const std::string& name) {
  return as_sp(load_model(model_path(name)));
}

MatrixXd expm_rk4(const MatrixXd& A, double t, int steps) {
  const int d = static_cast<int>(A.rows());
  MatrixXd X = MatrixXd::Identity(d, d);
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    const MatrixXd k1 = A * X;
    const MatrixXd k2 = A * (X + 0.5 * h * k1);
    const MatrixXd k3 = A * (X + 0.5 * h * k2);
    const MatrixXd k4 = A * (X + h * k3);
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return X;
}

}  // namespace branchlab::testing
