#include "branchlab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unsupported/Eigen/MatrixFunctions>

namespace branchlab {

namespace {

constexpr double kSimplicityTol = 1e-8;
constexpr double kEigenRouteCondLimit = 1e6;
constexpr double kExpArgumentCap = 700.0;

/// Rotate v so its largest-modulus entry (lowest index on ties) is real
/// positive, then scale to sup-norm 1.
VectorXcd phase_fix(VectorXcd v) {
  int arg = 0;
  double best = -1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best + 1e-14) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (best <= 0.0) return v;
  v *= std::conj(v(arg)) / std::abs(v(arg));
  return v / std::abs(v(arg));
}

}  // namespace

MatrixXd mean_generator(const BmpModel& model) {
  const MatrixXd M = offspring_mean_matrix(model);
  return model.motion_rates +
         model.branch_rate.asDiagonal() * (M - MatrixXd::Identity(model.d, model.d));
}

MatrixXd mean_generator(const SpModel& model) {
  MatrixXd J = MatrixXd::Zero(model.d, model.d);
  for (int x = 0; x < model.d; ++x)
    for (const auto& atom : model.jumps[x]) J.row(x) += atom.rate * atom.mass.transpose();
  MatrixXd A = model.motion_rates + model.eta + J;
  A -= MatrixXd(model.a.asDiagonal());
  return A;
}

SpectralContext eigensystem(const MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() < 1)
    throw_error(ErrorCode::ParseError, "generator must be square");
  if (!A.allFinite())
    throw_error(ErrorCode::ParseError, "generator has non-finite entries");

  SpectralContext ctx;
  ctx.A = A;
  ctx.a_norm_inf = A.cwiseAbs().rowwise().sum().maxCoeff();
  const int d = static_cast<int>(A.rows());

  Eigen::EigenSolver<MatrixXd> solver(A);
  if (solver.info() != Eigen::Success)
    throw_error(ErrorCode::DegenerateSpectrum, "eigendecomposition failed to converge");
  ctx.V = solver.eigenvectors();
  ctx.eigenvalues = solver.eigenvalues();
  ctx.Vinv = ctx.V.partialPivLu().inverse();

  Eigen::JacobiSVD<MatrixXcd> svd(ctx.V);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  ctx.condition = smin > 0.0 ? svd.singularValues()(0) / smin
                             : std::numeric_limits<double>::infinity();

  // Principal eigenvalue: maximal real part; must be simple.
  int principal = 0;
  for (int i = 1; i < d; ++i)
    if (ctx.eigenvalues(i).real() > ctx.eigenvalues(principal).real()) principal = i;
  const Complex lp = ctx.eigenvalues(principal);
  const double scale = std::max(1.0, std::abs(lp));
  for (int i = 0; i < d; ++i) {
    if (i == principal) continue;
    if (std::abs(ctx.eigenvalues(i) - lp) < kSimplicityTol * scale)
      throw_error(ErrorCode::DegenerateSpectrum,
                  "leading eigenvalue is not simple to tolerance");
  }
  if (std::abs(lp.imag()) > kSimplicityTol * scale)
    throw_error(ErrorCode::NonPositivePrincipal, "leading eigenvalue is not real");

  // Right principal eigenvector must be real with one strict sign.
  VectorXcd phic = phase_fix(ctx.V.col(principal));
  if (phic.imag().cwiseAbs().maxCoeff() > 1e-9)
    throw_error(ErrorCode::NonPositivePrincipal, "principal eigenvector is not real");
  VectorXd phi = phic.real();
  if (phi.minCoeff() < -1e-9)
    throw_error(ErrorCode::NonPositivePrincipal, "principal eigenvector changes sign");
  phi = phi.cwiseMax(0.0);  // sup-norm already 1 from phase_fix

  VectorXcd lt = phase_fix(ctx.Vinv.row(principal).transpose());
  if (lt.imag().cwiseAbs().maxCoeff() > 1e-9)
    throw_error(ErrorCode::NonPositivePrincipal, "left principal eigenvector is not real");
  VectorXd phit = lt.real();
  if (phit.minCoeff() < -1e-9)
    throw_error(ErrorCode::NonPositivePrincipal, "left principal eigenvector changes sign");
  phit = phit.cwiseMax(0.0);
  const double inner = phit.dot(phi);
  if (inner < 1e-14)
    throw_error(ErrorCode::NonPositivePrincipal, "left principal eigenvector degenerate");
  phit /= inner;

  ctx.principal.lambda1 = lp.real();
  ctx.principal.phi = phi;
  ctx.principal.phi_tilde = phit;

  // Assemble reporting triples, sorted by decreasing real part, principal first
  // among equals.  Left vectors keep the biorthogonal scaling <g, g~> = 1.
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (i == principal) return true;
    if (j == principal) return false;
    const Complex a_ = ctx.eigenvalues(i), b_ = ctx.eigenvalues(j);
    if (a_.real() != b_.real()) return a_.real() > b_.real();
    return a_.imag() > b_.imag();
  });
  ctx.pairs.reserve(d);
  for (int idx : order) {
    EigenTriple triple;
    triple.lambda = ctx.eigenvalues(idx);
    if (idx == principal) {
      triple.lambda = Complex(lp.real(), 0.0);
      triple.right = phi.cast<Complex>();
      triple.left = phit.cast<Complex>();
    } else {
      VectorXcd g = phase_fix(ctx.V.col(idx));
      VectorXcd gt = ctx.Vinv.row(idx).transpose();
      const Complex inner_g = (g.transpose() * gt)(0);
      if (std::abs(inner_g) < 1e-14)
        throw_error(ErrorCode::DegenerateSpectrum, "left/right eigenvector pairing degenerate");
      gt /= inner_g;
      triple.right = g;
      triple.left = gt;
    }
    ctx.pairs.push_back(std::move(triple));
  }

  double second = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i)
    if (i != principal) second = std::max(second, ctx.eigenvalues(i).real());
  ctx.spectral_gap = d > 1 ? lp.real() - second : std::numeric_limits<double>::infinity();
  return ctx;
}

MatrixXd semigroup(const SpectralContext& ctx, double t) {
  if (t < 0.0) throw_error(ErrorCode::PreconditionViolated, "semigroup time must be >= 0");
  if (t * ctx.a_norm_inf > kExpArgumentCap)
    throw_error(ErrorCode::Overflow, "t * ||A|| exceeds the exponential cap (t capped at 700/||A||)");
  const int d = ctx.dim();
  if (t == 0.0) return MatrixXd::Identity(d, d);
  if (ctx.condition < kEigenRouteCondLimit) {
    VectorXcd e(d);
    for (int i = 0; i < d; ++i) e(i) = std::exp(ctx.eigenvalues(i) * t);
    MatrixXcd result = ctx.V * e.asDiagonal() * ctx.Vinv;
    return result.real();
  }
  // Defective-adjacent spectrum: scaling-and-squaring Pade exponential.
  return MatrixXd((t * ctx.A).exp());
}

MatrixXd normalized_semigroup(const SpectralContext& ctx, double t) {
  if (t < 0.0) throw_error(ErrorCode::PreconditionViolated, "semigroup time must be >= 0");
  const int d = ctx.dim();
  if (t == 0.0) return MatrixXd::Identity(d, d);
  const double lambda1 = ctx.principal.lambda1;
  if (ctx.condition < kEigenRouteCondLimit) {
    VectorXcd e(d);
    for (int i = 0; i < d; ++i) e(i) = std::exp((ctx.eigenvalues(i) - lambda1) * t);
    MatrixXcd result = ctx.V * e.asDiagonal() * ctx.Vinv;
    return result.real();
  }
  const MatrixXd shifted = ctx.A - lambda1 * MatrixXd::Identity(d, d);
  return MatrixXd((t * shifted).exp());
}

double equilibrium_distance(const SpectralContext& ctx, double t) {
  const MatrixXd B = normalized_semigroup(ctx, t) -
                     ctx.principal.phi * ctx.principal.phi_tilde.transpose();
  double worst = 0.0;
  for (int x = 0; x < ctx.dim(); ++x)
    worst = std::max(worst, B.row(x).cwiseAbs().sum() / ctx.principal.phi(x));
  return worst;
}

DeltaTable verify_h1(const SpectralContext& ctx, const std::vector<double>& t_grid) {
  if (t_grid.empty())
    throw_error(ErrorCode::PreconditionViolated, "t grid must be nonempty");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] <= t_grid[i - 1])
      throw_error(ErrorCode::PreconditionViolated, "t grid must be increasing");

  DeltaTable table;
  table.spectral_gap = ctx.spectral_gap;
  double sum_t = 0.0, sum_log = 0.0, sum_tt = 0.0, sum_tlog = 0.0;
  int n_fit = 0;
  for (double t : t_grid) {
    DeltaRow row;
    row.t = t;
    row.delta = equilibrium_distance(ctx, t);
    table.rows.push_back(row);
    if (row.delta > 1e-14) {
      sum_t += t;
      sum_log += std::log(row.delta);
      sum_tt += t * t;
      sum_tlog += t * std::log(row.delta);
      ++n_fit;
    }
  }
  if (n_fit >= 2) {
    const double denom = n_fit * sum_tt - sum_t * sum_t;
    if (std::abs(denom) > 0.0) {
      const double slope = (n_fit * sum_tlog - sum_t * sum_log) / denom;
      const double intercept = (sum_log - slope * sum_t) / n_fit;
      table.fitted_rate = -slope;
      table.fitted_c = std::exp(intercept);
    }
  }
  for (auto& row : table.rows)
    row.fitted_bound = table.fitted_c * std::exp(-table.fitted_rate * row.t);
  return table;
}

}  // namespace branchlab
