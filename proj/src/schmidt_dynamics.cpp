#include "sbl/schmidt_dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace sbl {

namespace {

struct FlowState {
  RVec c;  // signed weight amplitudes
  CMat l;
  CMat r;
};

struct FlowDeriv {
  RVec c;
  CMat l;
  CMat r;
};

CVec reconstruct_raw(const FlowState& y) {
  const int da = static_cast<int>(y.l.rows());
  const int db = static_cast<int>(y.r.rows());
  CVec psi = CVec::Zero(da * db);
  for (int i = 0; i < y.c.size(); ++i) {
    if (y.c[i] == 0.0) continue;
    for (int a = 0; a < da; ++a) psi.segment(a * db, db) += (y.c[i] * y.l(a, i)) * y.r.col(i);
  }
  return psi;
}

// Core derivative on raw flow variables. Throws DegenerateSpectrum when an
// occupied pair collides with non-vanishing coupling.
FlowDeriv flow_rhs(const FlowState& y, const BipartiteModel& model, double eps_gap) {
  const int rr = static_cast<int>(y.c.size());
  const double hbar = model.hbar;

  CVec psi = reconstruct_raw(y);
  CVec hpsi = model.h * psi;
  CMat w = state_matrix(hpsi, model.dim_a, model.dim_b);
  CMat g = y.l.adjoint() * w * y.r.conjugate();  // g(i,j) = <l_i r_j|H|psi>

  RVec p(rr);
  RVec c(rr);
  std::vector<bool> occ(rr);
  for (int i = 0; i < rr; ++i) {
    p[i] = y.c[i] * y.c[i];
    occ[i] = p[i] > tol::eps_rank;
    c[i] = occ[i] ? y.c[i] : 0.0;  // frozen branches enter as exactly empty
    if (occ[i]) continue;
    p[i] = 0.0;
  }

  const double num_tol = 1e-10 * (1.0 + g.cwiseAbs().maxCoeff());
  const Cx minus_i_over_h(0.0, -1.0 / hbar);

  FlowDeriv d;
  d.c = RVec::Zero(rr);
  d.l = CMat::Zero(y.l.rows(), rr);
  d.r = CMat::Zero(y.r.rows(), rr);

  for (int i = 0; i < rr; ++i) {
    if (!occ[i]) continue;
    d.c[i] = g(i, i).imag() / hbar;

    CVec bl = CVec::Zero(y.l.rows());
    CVec br = CVec::Zero(y.r.rows());
    for (int j = 0; j < rr; ++j) {
      if (j == i) continue;
      double gap = p[i] - p[j];
      Cx num_r = c[i] * g(i, j) - c[j] * std::conj(g(j, i));
      Cx num_l = c[i] * g(j, i) - c[j] * std::conj(g(i, j));
      if (occ[j] && std::abs(gap) < eps_gap) {
        if (std::abs(num_r) <= num_tol && std::abs(num_l) <= num_tol) continue;
        throw DegenerateSpectrum(i, j, std::abs(gap));
      }
      br += (num_r / gap) * y.r.col(j);
      bl += (num_l / gap) * y.l.col(j);
    }
    // When a factor space is larger than the branch count, the carried
    // columns do not span it, and the branch states also move into the
    // orthogonal complement. The sum over a completed basis collapses to a
    // projection, since all those extra branches are empty.
    if (rr < y.r.rows()) {
      CVec vi = w.transpose() * y.l.col(i).conjugate();
      br += (vi - y.r * g.row(i).transpose()) / c[i];
    }
    if (rr < y.l.rows()) {
      CVec ui = w * y.r.col(i).conjugate();
      bl += (ui - y.l * g.col(i)) / c[i];
    }
    bl += (g(i, i).real() / y.c[i]) * y.l.col(i);  // diagonal phase, left factor only
    d.l.col(i) = minus_i_over_h * bl;
    d.r.col(i) = minus_i_over_h * br;
  }
  return d;
}

FlowState to_flow(const SchmidtForm& form) {
  return {form.coeffs, form.left, form.right};
}

// Symmetric (least-disturbing) orthonormalization of the given columns.
void lowdin(CMat& cols, const std::vector<int>& which) {
  const int k = static_cast<int>(which.size());
  if (k == 0) return;
  CMat x(cols.rows(), k);
  for (int i = 0; i < k; ++i) x.col(i) = cols.col(which[i]);
  CMat s = x.adjoint() * x;
  Eigen::SelfAdjointEigenSolver<CMat> es(s);
  RVec ev = es.eigenvalues();
  CMat inv_sqrt = CMat::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    double lam = std::max(ev[i], 1e-300);
    inv_sqrt += (1.0 / std::sqrt(lam)) * es.eigenvectors().col(i) *
                es.eigenvectors().col(i).adjoint();
  }
  CMat fixed = x * inv_sqrt;
  for (int i = 0; i < k; ++i) cols.col(which[i]) = fixed.col(i);
}

// Rebuild empty-branch columns as an orthonormal completion of the occupied
// span. Their weights are numerically zero, so the state is unchanged.
void recomplete_empty(CMat& cols, const std::vector<int>& occupied,
                      const std::vector<int>& empty) {
  if (empty.empty()) return;
  const int dim = static_cast<int>(cols.rows());
  CMat occ(dim, occupied.size());
  for (size_t i = 0; i < occupied.size(); ++i) occ.col(i) = cols.col(occupied[i]);
  CMat full = orthonormal_completion(occ, dim);
  for (size_t i = 0; i < empty.size(); ++i)
    cols.col(empty[i]) = full.col(occupied.size() + i);
}

SchmidtForm emit_form(const FlowState& y, std::vector<int>& ids_out) {
  const int rr = static_cast<int>(y.c.size());
  FlowState z = y;

  std::vector<int> occupied, empty;
  for (int i = 0; i < rr; ++i) {
    if (z.c[i] < 0.0) {  // weight amplitudes are signed inside the flow
      z.c[i] = -z.c[i];
      z.l.col(i) *= -1.0;
    }
    (z.c[i] * z.c[i] > tol::eps_rank ? occupied : empty).push_back(i);
  }
  double total = z.c.squaredNorm();
  if (total > 0.0) z.c /= std::sqrt(total);

  lowdin(z.l, occupied);
  lowdin(z.r, occupied);
  recomplete_empty(z.l, occupied, empty);
  recomplete_empty(z.r, occupied, empty);

  std::vector<int> order(rr);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z.c[a] > z.c[b]; });

  SchmidtForm form;
  form.coeffs.resize(rr);
  form.left.resize(z.l.rows(), rr);
  form.right.resize(z.r.rows(), rr);
  ids_out.resize(rr);
  for (int s = 0; s < rr; ++s) {
    form.coeffs[s] = z.c[order[s]];
    form.left.col(s) = z.l.col(order[s]);
    form.right.col(s) = z.r.col(order[s]);
    ids_out[s] = order[s];
  }
  form.rank = static_cast<int>(occupied.size());
  for (int s = 0; s + 1 < rr; ++s) {
    double pa = form.coeffs[s] * form.coeffs[s];
    double pb = form.coeffs[s + 1] * form.coeffs[s + 1];
    if (std::abs(pa - pb) < tol::eps_deg) form.degenerate = true;
  }
  return form;
}

void validate_form(const SchmidtForm& form, const BipartiteModel& model) {
  if (form.dim_left() != model.dim_a || form.dim_right() != model.dim_b)
    throw DimensionError("schmidt flow: form/model dimension mismatch");
  if (std::abs(form.probabilities().sum() - 1.0) > 1e-8)
    throw std::invalid_argument("schmidt flow: weights must sum to one");
}

}  // namespace

SchmidtDerivative schmidt_rhs(const SchmidtForm& form, const BipartiteModel& model,
                              double eps_gap) {
  validate_form(form, model);
  FlowDeriv d = flow_rhs(to_flow(form), model, eps_gap);
  return {std::move(d.c), std::move(d.l), std::move(d.r)};
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

FlowState combine(const FlowState& y, double dt, std::initializer_list<std::pair<double, const FlowDeriv*>> terms) {
  FlowState out = y;
  for (auto& [w, k] : terms) {
    out.c += dt * w * k->c;
    out.l += dt * w * k->l;
    out.r += dt * w * k->r;
  }
  return out;
}

double error_norm(const FlowDeriv& err, const FlowState& a, const FlowState& b, double dt,
                  double atol, double rtol) {
  double acc = 0.0;
  long n = 0;
  auto add = [&](double e, double y0, double y1) {
    double sc = atol + rtol * std::max(std::abs(y0), std::abs(y1));
    double q = dt * e / sc;
    acc += q * q;
    ++n;
  };
  for (int i = 0; i < err.c.size(); ++i) add(err.c[i], a.c[i], b.c[i]);
  for (int i = 0; i < err.l.size(); ++i) {
    add(err.l.data()[i].real(), a.l.data()[i].real(), b.l.data()[i].real());
    add(err.l.data()[i].imag(), a.l.data()[i].imag(), b.l.data()[i].imag());
  }
  for (int i = 0; i < err.r.size(); ++i) {
    add(err.r.data()[i].real(), a.r.data()[i].real(), b.r.data()[i].real());
    add(err.r.data()[i].imag(), a.r.data()[i].imag(), b.r.data()[i].imag());
  }
  return std::sqrt(acc / std::max<long>(n, 1));
}

}  // namespace

SchmidtTrajectory integrate_schmidt(const BipartiteModel& model, const SchmidtForm& form0,
                                    const std::vector<double>& times,
                                    const IntegratorOptions& opts) {
  validate_form(form0, model);
  if (times.empty()) throw std::invalid_argument("integrate_schmidt: no times");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] <= times[k - 1])
      throw std::invalid_argument("integrate_schmidt: times must strictly increase");
  if (!(opts.min_step > 0.0) || !(opts.max_step > opts.min_step))
    throw std::invalid_argument("integrate_schmidt: bad step bounds");

  SchmidtTrajectory traj;
  FlowState y = to_flow(form0);

  auto emit = [&](double t) {
    std::vector<int> ids;
    traj.forms.push_back(emit_form(y, ids));
    traj.branch_ids.push_back(std::move(ids));
    traj.times.push_back(t);
  };

  emit(times.front());

  double t = times.front();
  double dt = std::min(opts.max_step, (times.back() - times.front()) / 100.0);
  dt = std::max(dt, opts.min_step);

  int reseed_count = 0;
  double last_reseed_t = -1e300;
  bool halted = false;

  auto handle_resonance = [&](const DegenerateSpectrum& e) -> bool {
    // Called when the step size has bottomed out. Returns false to halt.
    if (opts.on_resonance == ResonancePolicy::Halt) {
      traj.events.push_back({EventKind::Degeneracy, t, e.branch_a, e.branch_b, e.gap});
      halted = true;
      return false;
    }
    if (t - last_reseed_t < 1e3 * opts.min_step && ++reseed_count >= 3)
      throw NumericalFailure("integrate_schmidt: step underflow at t=" + std::to_string(t) +
                             " (branches " + std::to_string(e.branch_a) + "," +
                             std::to_string(e.branch_b) + ")");
    if (t - last_reseed_t >= 1e3 * opts.min_step) reseed_count = 1;
    last_reseed_t = t;
    traj.events.push_back({EventKind::Degeneracy, t, e.branch_a, e.branch_b, e.gap});
    CVec psi = reconstruct_raw(y);
    double n = psi.norm();
    if (n <= 0.0) throw NumericalFailure("integrate_schmidt: state collapsed");
    y = to_flow(schmidt_decompose(psi / n, model.dim_a, model.dim_b));
    dt = std::max(opts.min_step * 10.0, dt);
    return true;
  };

  for (size_t target = 1; target < times.size() && !halted; ++target) {
    const double t_goal = times[target];
    while (t < t_goal - 1e-14 * std::max(1.0, std::abs(t_goal))) {
      double h = std::min(dt, t_goal - t);
      bool resonant = false;
      DegenerateSpectrum res(0, 0, 0.0);
      FlowState y_new = y;
      double err = 0.0;
      try {
        FlowDeriv k1 = flow_rhs(y, model, opts.eps_gap);
        FlowDeriv k2 = flow_rhs(combine(y, h, {{A21, &k1}}), model, opts.eps_gap);
        FlowDeriv k3 = flow_rhs(combine(y, h, {{A31, &k1}, {A32, &k2}}), model, opts.eps_gap);
        FlowDeriv k4 =
            flow_rhs(combine(y, h, {{A41, &k1}, {A42, &k2}, {A43, &k3}}), model, opts.eps_gap);
        FlowDeriv k5 = flow_rhs(combine(y, h, {{A51, &k1}, {A52, &k2}, {A53, &k3}, {A54, &k4}}),
                                model, opts.eps_gap);
        FlowDeriv k6 = flow_rhs(
            combine(y, h, {{A61, &k1}, {A62, &k2}, {A63, &k3}, {A64, &k4}, {A65, &k5}}), model,
            opts.eps_gap);
        y_new = combine(y, h, {{B1, &k1}, {B3, &k3}, {B4, &k4}, {B5, &k5}, {B6, &k6}});
        FlowDeriv k7 = flow_rhs(y_new, model, opts.eps_gap);
        FlowDeriv ed;
        ed.c = E1 * k1.c + E3 * k3.c + E4 * k4.c + E5 * k5.c + E6 * k6.c + E7 * k7.c;
        ed.l = E1 * k1.l + E3 * k3.l + E4 * k4.l + E5 * k5.l + E6 * k6.l + E7 * k7.l;
        ed.r = E1 * k1.r + E3 * k3.r + E4 * k4.r + E5 * k5.r + E6 * k6.r + E7 * k7.r;
        err = error_norm(ed, y, y_new, h, opts.atol, opts.rtol);
      } catch (const DegenerateSpectrum& e) {
        resonant = true;
        res = e;
      }

      if (resonant) {
        if (h <= opts.min_step * 1.0000001) {
          if (!handle_resonance(res)) break;
          continue;
        }
        dt = std::max(h * 0.5, opts.min_step);
        continue;
      }
      if (err <= 1.0) {
        t += h;
        y = y_new;
        double grow = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
        dt = std::clamp(h * std::clamp(grow, 0.2, 5.0), opts.min_step, opts.max_step);
      } else {
        if (h <= opts.min_step * 1.0000001)
          throw NumericalFailure("integrate_schmidt: step underflow (error control) at t=" +
                                 std::to_string(t));
        double shrink = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9);
        dt = std::max(h * shrink, opts.min_step);
      }
    }
    if (!halted) emit(t_goal);
  }
  return traj;
}

CMat reduced_density_flow(const SchmidtForm& form, const BipartiteModel& model, int side) {
  validate_form(form, model);
  if (side != 0 && side != 1)
    throw std::invalid_argument("reduced_density_flow: side must be 0 or 1");
  const int rr = form.branches();
  CVec psi = form.reconstruct();
  CVec hpsi = model.h * psi;
  CMat w = state_matrix(hpsi, model.dim_a, model.dim_b);
  CMat g = form.left.adjoint() * w * form.right.conjugate();
  const RVec& c = form.coeffs;

  if (side == 1) {
    CMat out = CMat::Zero(model.dim_b, model.dim_b);
    for (int i = 0; i < rr; ++i)
      for (int j = 0; j < rr; ++j) {
        Cx coef = c[j] * g(j, i) - c[i] * std::conj(g(i, j));
        if (coef == Cx(0.0, 0.0)) continue;
        out += coef * form.right.col(i) * form.right.col(j).adjoint();
      }
    // Flow into directions outside the carried columns (see flow_rhs).
    if (rr < model.dim_b) {
      for (int j = 0; j < rr; ++j) {
        if (c[j] == 0.0) continue;
        CVec vj = w.transpose() * form.left.col(j).conjugate();
        CVec perp = vj - form.right * (form.right.adjoint() * vj);
        out += c[j] *
               (perp * form.right.col(j).adjoint() - form.right.col(j) * perp.adjoint());
      }
    }
    return out;
  }
  CMat out = CMat::Zero(model.dim_a, model.dim_a);
  for (int i = 0; i < rr; ++i)
    for (int j = 0; j < rr; ++j) {
      Cx coef = c[j] * g(i, j) - c[i] * std::conj(g(j, i));
      if (coef == Cx(0.0, 0.0)) continue;
      out += coef * form.left.col(i) * form.left.col(j).adjoint();
    }
  if (rr < model.dim_a) {
    for (int j = 0; j < rr; ++j) {
      if (c[j] == 0.0) continue;
      CVec uj = w * form.right.col(j).conjugate();
      CVec perp = uj - form.left * (form.left.adjoint() * uj);
      out += c[j] * (perp * form.left.col(j).adjoint() - form.left.col(j) * perp.adjoint());
    }
  }
  return out;
}

CMat effective_hamiltonian(const BipartiteModel& model, const CVec& phi_env) {
  if (phi_env.size() != model.dim_b)
    throw DimensionError("effective_hamiltonian: environment state dim mismatch");
  if (std::abs(phi_env.norm() - 1.0) > tol::norm_tol)
    throw std::invalid_argument("effective_hamiltonian: state not normalized");
  const int da = model.dim_a;
  const int db = model.dim_b;
  CMat out(da, da);
  for (int a = 0; a < da; ++a)
    for (int ap = 0; ap < da; ++ap)
      out(a, ap) = phi_env.dot(model.h.block(a * db, ap * db, db, db) * phi_env);
  return out;
}

SchmidtDerivative stable_branch_rhs(const SchmidtForm& form, const PointerBasis& pointer,
                                    const BipartiteModel& model, double eps_gap) {
  validate_form(form, model);
  const int rr = form.branches();
  const double hbar = model.hbar;

  // Each occupied branch must sit on a pointer state (up to phase).
  std::vector<int> which(rr, -1);
  for (int i = 0; i < rr; ++i) {
    double best = -1.0;
    for (int k = 0; k < pointer.states.cols(); ++k) {
      double ov = std::abs(pointer.states.col(k).dot(form.left.col(i)));
      if (ov > best) {
        best = ov;
        which[i] = k;
      }
    }
    if (form.coeffs[i] * form.coeffs[i] > tol::eps_rank && best < 1.0 - 1e-8)
      throw std::invalid_argument("stable_branch_rhs: branch " + std::to_string(i) +
                                  " not aligned with the pointer basis");
  }

  RVec p = form.probabilities();
  std::vector<bool> occ(rr);
  for (int i = 0; i < rr; ++i) occ[i] = p[i] > tol::eps_rank;
  for (int i = 0; i < rr; ++i)
    for (int j = i + 1; j < rr; ++j)
      if (occ[i] && occ[j] && std::abs(p[i] - p[j]) < eps_gap)
        throw DegenerateSpectrum(i, j, std::abs(p[i] - p[j]));

  // e[m](i,j) = <r_i| H_cond(branch m) |r_j>
  std::vector<CMat> e(rr);
  for (int m = 0; m < rr; ++m)
    e[m] = form.right.adjoint() * pointer.conditional[which[m]] * form.right;

  const Cx minus_i_over_h(0.0, -1.0 / hbar);
  SchmidtDerivative d;
  d.d_coeffs = RVec::Zero(rr);
  d.d_left = CMat::Zero(model.dim_a, rr);
  d.d_right = CMat::Zero(model.dim_b, rr);

  for (int i = 0; i < rr; ++i) {
    if (!occ[i]) continue;
    d.d_coeffs[i] = form.coeffs[i] * e[i](i, i).imag() / hbar;  // zero up to roundoff

    CVec bl = CVec::Zero(model.dim_a);
    CVec br = CVec::Zero(model.dim_b);
    for (int j = 0; j < rr; ++j) {
      if (j == i) continue;
      double pj = occ[j] ? p[j] : 0.0;
      double gap = p[i] - pj;
      Cx term_r = e[i](j, i) - (pj / gap) * (e[j](j, i) - e[i](j, i));
      br += term_r * form.right.col(j);
      if (occ[j]) {
        Cx term_l = (std::sqrt(p[i] * pj) / gap) * (e[j](i, j) - e[i](i, j));
        bl += term_l * form.left.col(j);
      }
    }
    if (rr < model.dim_b) {
      CVec hr = pointer.conditional[which[i]] * form.right.col(i);
      br += hr - form.right * e[i].col(i);  // environment motion off the carried columns
    }
    bl += e[i](i, i).real() * form.left.col(i);
    d.d_left.col(i) = minus_i_over_h * bl;
    d.d_right.col(i) = minus_i_over_h * br;
  }
  return d;
}

}  // namespace sbl
