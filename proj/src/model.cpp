#include "branchlab/model.hpp"

#include <cmath>
#include <sstream>

namespace branchlab {

namespace {

constexpr double kProbTolerance = 1e-9;

void check_motion_rates(const MatrixXd& Q, int d) {
  if (Q.rows() != d || Q.cols() != d)
    throw_error(ErrorCode::ParseError, "motion rate matrix has wrong shape");
  for (int x = 0; x < d; ++x) {
    for (int y = 0; y < d; ++y) {
      if (x != y && Q(x, y) < 0.0)
        throw_error(ErrorCode::NegativeRate,
                    "motion rate Q(" + std::to_string(x) + "," + std::to_string(y) + ") is negative");
    }
    if (std::abs(Q.row(x).sum()) > 1e-9)
      throw_error(ErrorCode::ParseError,
                  "motion rate row " + std::to_string(x) + " does not sum to zero");
  }
}

/// Reachability closure of "x feeds y" through motion or offspring.
bool strongly_connected(const MatrixXd& Q, const MatrixXd& M) {
  const int d = static_cast<int>(Q.rows());
  std::vector<std::vector<bool>> reach(d, std::vector<bool>(d, false));
  for (int x = 0; x < d; ++x) {
    reach[x][x] = true;
    for (int y = 0; y < d; ++y)
      if (Q(x, y) > 0.0 || M(x, y) > 0.0) reach[x][y] = true;
  }
  for (int k = 0; k < d; ++k)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y)
        if (reach[x][k] && reach[k][y]) reach[x][y] = true;
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y)
      if (!reach[x][y]) return false;
  return true;
}

}  // namespace

MatrixXd offspring_mean_matrix(const BmpModel& model) {
  MatrixXd M = MatrixXd::Zero(model.d, model.d);
  for (int x = 0; x < model.d; ++x)
    for (const auto& atom : model.offspring[x])
      for (int y = 0; y < model.d; ++y) M(x, y) += atom.p * atom.counts(y);
  return M;
}

ValidationReport validate_bmp(const BmpModel& model) {
  if (model.d < 1) throw_error(ErrorCode::ParseError, "type count must be >= 1");
  check_motion_rates(model.motion_rates, model.d);
  if (model.branch_rate.size() != model.d)
    throw_error(ErrorCode::ParseError, "branch rate vector has wrong length");
  if (model.branch_rate.minCoeff() < 0.0)
    throw_error(ErrorCode::NegativeRate, "branch rate is negative");
  if (static_cast<int>(model.offspring.size()) != model.d)
    throw_error(ErrorCode::ParseError, "offspring law list has wrong length");

  ValidationReport report;
  report.model_name = model.name;
  report.kind = "bmp";
  report.probability_residuals = VectorXd::Zero(model.d);
  report.offspring_moments = MatrixXd::Zero(model.d, 4);
  report.max_branch_rate = model.branch_rate.maxCoeff();

  for (int x = 0; x < model.d; ++x) {
    const auto& law = model.offspring[x];
    if (law.empty())
      throw_error(ErrorCode::EmptyOffspringList,
                  "type " + std::to_string(x) + " has an empty offspring law");
    double psum = 0.0;
    for (const auto& atom : law) {
      if (atom.p < 0.0)
        throw_error(ErrorCode::NegativeRate,
                    "offspring probability negative at type " + std::to_string(x));
      if (atom.counts.size() != model.d)
        throw_error(ErrorCode::ParseError, "offspring count vector has wrong length");
      if (atom.counts.minCoeff() < 0)
        throw_error(ErrorCode::ParseError, "offspring counts must be nonnegative");
      psum += atom.p;
      const double n = atom.counts.sum();
      if (n == 1.0) report.has_unit_offspring_atom = true;
      double nk = 1.0;
      for (int k = 0; k < 4; ++k) {
        nk *= n;
        report.offspring_moments(x, k) += atom.p * nk;
      }
    }
    report.probability_residuals(x) = std::abs(psum - 1.0);
    if (report.probability_residuals(x) > kProbTolerance)
      throw_error(ErrorCode::ProbabilitySumMismatch,
                  "offspring probabilities at type " + std::to_string(x) + " sum to " +
                      std::to_string(psum));
  }

  report.sup_fourth_moment = report.offspring_moments.col(3).maxCoeff();
  report.mean_matrix = offspring_mean_matrix(model);
  report.irreducible = strongly_connected(model.motion_rates, report.mean_matrix);
  return report;
}

ValidationReport validate_sp(const SpModel& model) {
  if (model.d < 1) throw_error(ErrorCode::ParseError, "type count must be >= 1");
  check_motion_rates(model.motion_rates, model.d);
  if (model.a.size() != model.d || model.b.size() != model.d)
    throw_error(ErrorCode::ParseError, "drift/diffusion vector has wrong length");
  if (model.b.minCoeff() < 0.0)
    throw_error(ErrorCode::NegativeRate, "diffusion coefficient b is negative");
  if (model.eta.rows() != model.d || model.eta.cols() != model.d)
    throw_error(ErrorCode::ParseError, "eta kernel has wrong shape");
  if (model.eta.minCoeff() < 0.0)
    throw_error(ErrorCode::NegativeRate, "eta kernel has a negative entry");
  for (int x = 0; x < model.d; ++x)
    if (model.eta(x, x) != 0.0)
      throw_error(ErrorCode::ParseError, "eta kernel must have zero diagonal");
  if (static_cast<int>(model.jumps.size()) != model.d)
    throw_error(ErrorCode::ParseError, "jump atom list has wrong length");

  ValidationReport report;
  report.model_name = model.name;
  report.kind = "sp";
  report.fourth_moment = VectorXd::Zero(model.d);
  report.total_jump_rate = VectorXd::Zero(model.d);
  report.eta_row_sums = model.eta.rowwise().sum();

  for (int x = 0; x < model.d; ++x) {
    for (const auto& atom : model.jumps[x]) {
      if (atom.rate < 0.0)
        throw_error(ErrorCode::NegativeRate, "jump rate negative at type " + std::to_string(x));
      if (atom.mass.size() != model.d)
        throw_error(ErrorCode::ParseError, "jump mass vector has wrong length");
      if (atom.mass.minCoeff() < 0.0)
        throw_error(ErrorCode::NegativeMass, "jump mass negative at type " + std::to_string(x));
      const double total = atom.mass.sum();
      report.total_jump_rate(x) += atom.rate;
      report.fourth_moment(x) += atom.rate * total * total * total * total;
    }
    if (model.b(x) == 0.0) report.pure_jump_types.push_back(x);
  }
  report.sup_fourth_moment = report.fourth_moment.size() ? report.fourth_moment.maxCoeff() : 0.0;

  // Mean jump matrix doubles as the reachability input.
  MatrixXd J = MatrixXd::Zero(model.d, model.d);
  for (int x = 0; x < model.d; ++x)
    for (const auto& atom : model.jumps[x]) J.row(x) += atom.rate * atom.mass.transpose();
  report.irreducible = strongly_connected(model.motion_rates, model.eta + J);
  return report;
}

VectorXd extinction_probabilities(const BmpModel& model) {
  // Smallest fixed point of s = E_x[prod_y s_y^{k_y}], iterated from 0.
  VectorXd q = VectorXd::Zero(model.d);
  for (int iter = 0; iter < 100000; ++iter) {
    VectorXd next(model.d);
    for (int x = 0; x < model.d; ++x) {
      double v = 0.0;
      for (const auto& atom : model.offspring[x]) {
        double term = atom.p;
        for (int y = 0; y < model.d; ++y)
          for (int j = 0; j < atom.counts(y); ++j) term *= q(y);
        v += term;
      }
      next(x) = v;
    }
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta < 1e-14) break;
  }
  return q;
}

bool models_equal(const BmpModel& a, const BmpModel& b) {
  if (a.d != b.d || a.motion_rates != b.motion_rates || a.branch_rate != b.branch_rate)
    return false;
  if (a.offspring.size() != b.offspring.size()) return false;
  for (std::size_t x = 0; x < a.offspring.size(); ++x) {
    if (a.offspring[x].size() != b.offspring[x].size()) return false;
    for (std::size_t i = 0; i < a.offspring[x].size(); ++i) {
      if (a.offspring[x][i].p != b.offspring[x][i].p) return false;
      if (a.offspring[x][i].counts != b.offspring[x][i].counts) return false;
    }
  }
  return true;
}

bool models_equal(const SpModel& a, const SpModel& b) {
  if (a.d != b.d || a.motion_rates != b.motion_rates || a.a != b.a || a.b != b.b ||
      a.eta != b.eta)
    return false;
  if (a.jumps.size() != b.jumps.size()) return false;
  for (std::size_t x = 0; x < a.jumps.size(); ++x) {
    if (a.jumps[x].size() != b.jumps[x].size()) return false;
    for (std::size_t i = 0; i < a.jumps[x].size(); ++i) {
      if (a.jumps[x][i].rate != b.jumps[x][i].rate) return false;
      if (a.jumps[x][i].mass != b.jumps[x][i].mass) return false;
    }
  }
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  out << "model " << model_name << " (" << kind << ")\n";
  if (kind == "bmp") {
    out << "  max probability residual: " << probability_residuals.maxCoeff() << "\n";
    out << "  sup_x E_x[N^4]: " << sup_fourth_moment << "\n";
    out << "  max branch rate: " << max_branch_rate << "\n";
    out << "  unit-offspring atom present: " << (has_unit_offspring_atom ? "yes" : "no") << "\n";
  } else {
    out << "  sup fourth-moment sum: " << sup_fourth_moment << "\n";
    if (!pure_jump_types.empty()) {
      out << "  pure-jump types (b=0):";
      for (int x : pure_jump_types) out << ' ' << x;
      out << "\n";
    }
  }
  out << "  irreducible: " << (irreducible ? "yes" : "no");
  return out.str();
}

}  // namespace branchlab
