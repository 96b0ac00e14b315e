#include "gridtwin/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridtwin/metrics.hpp"

namespace gridtwin {

namespace {

// Index of entry (i, j), i <= j, in the stacked upper triangle.
inline int vech_index(int n, int i, int j) {
  return i * n - i * (i - 1) / 2 + (j - i);
}

// Dominant eigenvalue of a symmetric matrix by power iteration with a fixed
// deterministic start.
double power_max_eigenvalue(const Eigen::MatrixXd& m) {
  const int size = static_cast<int>(m.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Constant(size, 1.0 / std::sqrt(double(size)));
  double eig = 0.0;
  for (int it = 0; it < 80; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return 0.0;
    v = w / norm;
    eig = norm;
  }
  return eig;
}

// Smallest eigenvalue via inverse iteration on a prefactored system.
double inverse_min_eigenvalue(const Eigen::LDLT<Eigen::MatrixXd>& factor,
                              const Eigen::MatrixXd& m) {
  const int size = static_cast<int>(m.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Constant(size, 1.0 / std::sqrt(double(size)));
  for (int it = 0; it < 80; ++it) {
    Eigen::VectorXd w = factor.solve(v);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return 0.0;
    v = w / norm;
  }
  return v.dot(m * v);
}

}  // namespace

LaplacianEstimate fit_laplacian(const SampleSet& samples, const FitOptions& options) {
  samples.require_identifiable();
  const int n = samples.bus_count();
  const int K = samples.size();
  const int triangle = n * (n + 1) / 2;
  const int unknowns = triangle + 1;  // vech(Y) plus lambda

  // Gram blocks of the stacked per-interval Jacobians.  With w_k the
  // centered squared voltages, every normal-equation entry reduces to one of
  //   W  = sum_k w_k w_k^T,  Gp = sum_k p_k w_k^T,  Gq = sum_k q_k w_k^T
  // plus the scalars s_pp = sum ||p||^2 and s_pq = sum p.q.
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd Gp = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd Gq = Eigen::MatrixXd::Zero(n, n);
  double s_pp = 0.0, s_pq = 0.0;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd w =
        samples.v().row(k).transpose() - Eigen::VectorXd::Constant(n, samples.v0()(k));
    const Eigen::VectorXd pk = samples.p().row(k).transpose();
    const Eigen::VectorXd qk = samples.q().row(k).transpose();
    W.selfadjointView<Eigen::Lower>().rankUpdate(w);
    Gp.noalias() += pk * w.transpose();
    Gq.noalias() += qk * w.transpose();
    s_pp += pk.squaredNorm();
    s_pq += pk.dot(qk);
  }
  W = W.selfadjointView<Eigen::Lower>();

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(unknowns, unknowns);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);

  // The residual row for bus i reads the vech entry (min(i,j), max(i,j))
  // with weight w_j, so two vech entries interact once per shared bus.
  std::vector<std::array<int, 2>> members(triangle);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) members[vech_index(n, i, j)] = {i, j};
  }
  auto other = [](const std::array<int, 2>& entry, int bus) {
    return entry[0] == bus ? entry[1] : entry[0];
  };
  for (int e1 = 0; e1 < triangle; ++e1) {
    const auto& m1 = members[e1];
    for (int e2 = e1; e2 < triangle; ++e2) {
      const auto& m2 = members[e2];
      double value = 0.0;
      for (int a = 0; a < (m1[0] == m1[1] ? 1 : 2); ++a) {
        for (int b = 0; b < (m2[0] == m2[1] ? 1 : 2); ++b) {
          if (m1[a] == m2[b]) value += W(other(m1, m1[a]), other(m2, m2[b]));
        }
      }
      normal(e1, e2) = value;
      normal(e2, e1) = value;
    }
    // lambda column and right-hand side share the same row structure
    double lam = 0.0, rq = 0.0;
    for (int a = 0; a < (m1[0] == m1[1] ? 1 : 2); ++a) {
      const int bus = m1[a];
      const int oth = other(m1, bus);
      lam += -2.0 * Gp(bus, oth);
      rq += 2.0 * Gq(bus, oth);
    }
    normal(e1, triangle) = lam;
    normal(triangle, e1) = lam;
    rhs(e1) = rq;
  }
  normal(triangle, triangle) = 4.0 * s_pp;
  rhs(triangle) = -4.0 * s_pq;

  // Jacobi equilibration keeps the scale difference between vech and lambda
  // columns out of the factorization.
  Eigen::VectorXd scale(unknowns);
  for (int i = 0; i < unknowns; ++i) {
    const double d = normal(i, i);
    scale(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
  }
  Eigen::MatrixXd scaled = scale.asDiagonal() * normal * scale.asDiagonal();

  Eigen::LDLT<Eigen::MatrixXd> factor(scaled);
  require(factor.info() == Eigen::Success, Errc::ill_conditioned,
          "normal equations could not be factored");

  const double eig_max = power_max_eigenvalue(scaled);
  const double eig_min = inverse_min_eigenvalue(factor, scaled);
  require(std::isfinite(eig_min) && eig_min > 0.0, Errc::ill_conditioned,
          "normal matrix is numerically singular");
  const double condition = eig_max / eig_min;
  require(condition <= options.condition_limit, Errc::ill_conditioned,
          "normal matrix condition " + std::to_string(condition) + " exceeds limit");

  const Eigen::VectorXd solution =
      scale.asDiagonal() * factor.solve(scale.asDiagonal() * rhs);

  LaplacianEstimate out;
  out.y = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double value = solution(vech_index(n, i, j));
      out.y(i, j) = value;
      out.y(j, i) = value;
    }
  }
  out.lambda = solution(triangle);
  out.condition = condition;
  out.samples = K;

  double residual2 = 0.0;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd w =
        samples.v().row(k).transpose() - Eigen::VectorXd::Constant(n, samples.v0()(k));
    const Eigen::VectorXd r = out.y * w - 2.0 * out.lambda * samples.p().row(k).transpose() -
                              2.0 * samples.q().row(k).transpose();
    residual2 += r.squaredNorm();
  }
  out.residual = std::sqrt(residual2);
  return out;
}

FreeLaplacianFit fit_laplacian_free(const SampleSet& samples) {
  samples.require_identifiable();
  const int n = samples.bus_count();
  const int K = samples.size();

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);  // col i: sum_k p_i w
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);  // col i: 2 sum_k q_i w
  double s = 0.0, c = 0.0;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd w =
        samples.v().row(k).transpose() - Eigen::VectorXd::Constant(n, samples.v0()(k));
    const Eigen::VectorXd pk = samples.p().row(k).transpose();
    const Eigen::VectorXd qk = samples.q().row(k).transpose();
    W.selfadjointView<Eigen::Lower>().rankUpdate(w);
    G.noalias() += w * pk.transpose();
    B.noalias() += 2.0 * w * qk.transpose();
    s += pk.squaredNorm();
    c += 2.0 * pk.dot(qk);
  }
  W = W.selfadjointView<Eigen::Lower>();

  // Rows of Y decouple given the ratio variable phi = -2 lambda:
  //   y_i = W^{-1} (b_i - phi g_i),
  //   phi = (c - sum_i g_i' W^{-1} b_i) / (s - sum_i g_i' W^{-1} g_i).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W);
  require(eig.info() == Eigen::Success, Errc::singular_normal_matrix,
          "voltage Gram matrix eigensolve failed");
  const Eigen::VectorXd d = eig.eigenvalues();
  require(d.minCoeff() > 0.0, Errc::singular_normal_matrix,
          "voltage Gram matrix is singular; intervals are not rich enough");
  const Eigen::MatrixXd& U = eig.eigenvectors();

  const Eigen::MatrixXd A = U.transpose() * G;   // col i = U' g_i
  const Eigen::MatrixXd Bt = U.transpose() * B;  // col i = U' b_i
  const Eigen::ArrayXd dinv = d.array().inverse();

  double gWb = 0.0, gWg = 0.0;
  for (int i = 0; i < n; ++i) {
    gWb += (A.col(i).array() * Bt.col(i).array() * dinv).sum();
    gWg += (A.col(i).array().square() * dinv).sum();
  }
  const double denom = s - gWg;
  require(std::abs(denom) > 1e-14 * std::max(1.0, s), Errc::singular_normal_matrix,
          "ratio direction is unobservable in this sample set");
  const double phi = (c - gWb) / denom;

  FreeLaplacianFit out;
  out.y = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd yi =
        U * ((Bt.col(i) - phi * A.col(i)).array() * dinv).matrix();
    out.y.row(i) = yi.transpose();
  }
  out.lambda = -0.5 * phi;

  // Smallest normal-matrix eigenvalue.  The normal matrix is
  // [[I (x) W, g], [g', s]]; rotating each block by U leaves an arrowhead
  // whose coupled part collapses to (n+1) rows because equal diagonal
  // entries can be combined (their arrow weights add in quadrature).
  Eigen::MatrixXd reduced = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int m = 0; m < n; ++m) {
    reduced(m, m) = d(m);
    const double tau = A.row(m).norm();  // sqrt(sum_i A(m,i)^2)
    reduced(m, n) = tau;
    reduced(n, m) = tau;
  }
  reduced(n, n) = s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_reduced(reduced);
  require(eig_reduced.info() == Eigen::Success, Errc::singular_normal_matrix,
          "reduced normal matrix eigensolve failed");
  out.min_eigenvalue = eig_reduced.eigenvalues().minCoeff();
  if (n > 1) out.min_eigenvalue = std::min(out.min_eigenvalue, d.minCoeff());
  return out;
}

std::vector<int> dbscan_1d(const std::vector<double>& values, double radius,
                           int min_neighbors) {
  const int m = static_cast<int>(values.size());
  require(m >= 1, Errc::invalid_argument, "dbscan: empty input");
  require(radius >= 0.0, Errc::invalid_argument, "dbscan: negative radius");
  require(min_neighbors >= 1, Errc::invalid_argument, "dbscan: min_neighbors < 1");

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[a] < values[b]; });
  std::vector<double> s(m);
  for (int a = 0; a < m; ++a) s[a] = values[order[a]];

  // neighbour counts with a sliding window over the sorted points
  std::vector<char> core(m, 0);
  int lo = 0, hi = 0;
  for (int a = 0; a < m; ++a) {
    while (s[a] - s[lo] > radius) ++lo;
    if (hi < a) hi = a;
    while (hi + 1 < m && s[hi + 1] - s[a] <= radius) ++hi;
    core[a] = (hi - lo) >= min_neighbors;  // window size minus the point itself
  }

  // chain cores: consecutive cores closer than the radius share a cluster
  std::vector<int> cluster_of(m, -1);
  int clusters = 0;
  int prev_core = -1;
  for (int a = 0; a < m; ++a) {
    if (!core[a]) continue;
    if (prev_core >= 0 && s[a] - s[prev_core] <= radius) {
      cluster_of[a] = cluster_of[prev_core];
    } else {
      cluster_of[a] = clusters++;
    }
    prev_core = a;
  }

  // borders attach to the nearest core within the radius; ties take the
  // left (lower-id) cluster
  std::vector<int> prev_core_at(m, -1), next_core_at(m, -1);
  for (int a = 0, last = -1; a < m; ++a) {
    if (core[a]) last = a;
    prev_core_at[a] = last;
  }
  for (int a = m - 1, next = -1; a >= 0; --a) {
    if (core[a]) next = a;
    next_core_at[a] = next;
  }
  for (int a = 0; a < m; ++a) {
    if (core[a]) continue;
    const int left = prev_core_at[a];
    const int right = next_core_at[a];
    const double dl = left >= 0 ? s[a] - s[left] : std::numeric_limits<double>::infinity();
    const double dr = right >= 0 ? s[right] - s[a] : std::numeric_limits<double>::infinity();
    if (dl <= dr && dl <= radius) {
      cluster_of[a] = cluster_of[left];
    } else if (dr < dl && dr <= radius) {
      cluster_of[a] = cluster_of[right];
    }
  }

  std::vector<int> labels(m, -1);
  for (int a = 0; a < m; ++a) labels[order[a]] = cluster_of[a];
  return labels;
}

double auto_radius(const std::vector<double>& values, int gamma) {
  const int m = static_cast<int>(values.size());
  require(m >= 3, Errc::too_few_points, "auto_radius: need at least three points");
  require(gamma >= 1, Errc::invalid_argument, "auto_radius: gamma < 1");
  const int k = std::min(gamma, m - 1);

  std::vector<double> s(values);
  std::sort(s.begin(), s.end());

  // distance to the k-th nearest neighbour by expanding left/right around
  // each sorted position
  std::vector<double> knn(m);
  for (int a = 0; a < m; ++a) {
    int left = a - 1, right = a + 1;
    double dist = 0.0;
    for (int step = 0; step < k; ++step) {
      const double dl = left >= 0 ? s[a] - s[left] : std::numeric_limits<double>::infinity();
      const double dr = right < m ? s[right] - s[a] : std::numeric_limits<double>::infinity();
      if (dl <= dr) {
        dist = dl;
        --left;
      } else {
        dist = dr;
        ++right;
      }
    }
    knn[a] = dist;
  }
  std::sort(knn.begin(), knn.end());

  // knee of the ascending curve: farthest point from the chord through the
  // endpoints (ties -> larger index; flat curve -> last point)
  const double g0 = knn.front();
  const double g1 = knn.back();
  int knee = m - 1;
  if (g1 - g0 > 1e-15) {
    double best = -1.0;
    for (int i = 0; i < m; ++i) {
      const double gap = std::abs((g1 - g0) * i - double(m - 1) * (knn[i] - g0));
      if (gap >= best) {
        best = gap;
        knee = i;
      }
    }
  }
  return std::max(knn[knee], 1e-9);
}

namespace {

struct RowSelection {
  std::vector<int> connected;  // column ids flagged in this row
  std::vector<double> margin;  // per flagged column, distance to the boundary
  RowDiagnostics diag;
};

// Clusters one row's off-diagonal entries and keeps the group whose
// pre-normalization mean is most negative.
RowSelection select_row(int bus_row, const std::vector<double>& raw,
                        const std::vector<int>& columns, int gamma, double fixed_radius) {
  RowSelection out;
  out.diag.bus = bus_row + 1;
  const int m = static_cast<int>(raw.size());

  if (m < 3) {
    // too few entries to cluster; fall back to the sign of the entry
    for (int t = 0; t < m; ++t) {
      if (raw[t] < 0.0) {
        out.connected.push_back(columns[t]);
        out.margin.push_back(1.0);
      }
    }
    out.diag.connected_count = static_cast<int>(out.connected.size());
    out.diag.boundary = 0.5;
    return out;
  }

  const double lo = *std::min_element(raw.begin(), raw.end());
  const double hi = *std::max_element(raw.begin(), raw.end());
  std::vector<double> u(m);
  for (int t = 0; t < m; ++t) u[t] = (raw[t] - lo) / (hi - lo);

  const double radius = fixed_radius > 0.0 ? fixed_radius : auto_radius(u, gamma);
  out.diag.radius = radius;
  const std::vector<int> labels = dbscan_1d(u, radius, gamma);

  int cluster_count = 0;
  for (int label : labels) cluster_count = std::max(cluster_count, label + 1);
  out.diag.cluster_count = cluster_count;
  for (int label : labels) out.diag.outlier_count += label < 0;

  // candidate groups: every cluster plus (if present) the outlier pool
  const int groups = cluster_count + (out.diag.outlier_count > 0 ? 1 : 0);
  std::vector<double> mean(groups, 0.0);
  std::vector<int> count(groups, 0);
  auto group_of = [&](int t) { return labels[t] >= 0 ? labels[t] : cluster_count; };
  for (int t = 0; t < m; ++t) {
    mean[group_of(t)] += raw[t];
    ++count[group_of(t)];
  }
  int chosen = -1;
  for (int g = 0; g < groups; ++g) {
    mean[g] /= count[g];
    if (chosen < 0 || mean[g] < mean[chosen]) chosen = g;
  }
  require(chosen >= 0 && mean[chosen] < 0.0, Errc::no_cluster_found,
          "row " + std::to_string(bus_row + 1) +
              ": no negatively-valued group of entries found");

  // normalized boundary between the connected group and everything else
  double max_conn = 0.0;
  double min_rest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < m; ++t) {
    if (group_of(t) == chosen && raw[t] < 0.0) {
      max_conn = std::max(max_conn, u[t]);
    } else {
      min_rest = std::min(min_rest, u[t]);
    }
  }
  const double boundary =
      std::isfinite(min_rest) ? 0.5 * (max_conn + min_rest) : 1.0;
  out.diag.boundary = boundary;

  for (int t = 0; t < m; ++t) {
    if (group_of(t) == chosen && raw[t] < 0.0) {
      out.connected.push_back(columns[t]);
      out.margin.push_back(boundary - u[t]);
    }
  }
  require(!out.connected.empty(), Errc::no_cluster_found,
          "row " + std::to_string(bus_row + 1) +
              ": connected group has no negative entries");
  out.diag.connected_count = static_cast<int>(out.connected.size());
  return out;
}

}  // namespace

AdjacencyEstimate recover_topology(const LaplacianEstimate& estimate,
                                   const ClusterOptions& options) {
  const Eigen::MatrixXd& y = estimate.y;
  const int n = static_cast<int>(y.rows());
  require(n >= 1 && y.cols() == n, Errc::dimension_mismatch,
          "laplacian estimate must be square");
  require(options.radius >= 0.0, Errc::invalid_argument, "negative radius");

  const int gamma =
      options.gamma > 0 ? options.gamma
                        : std::max(4, static_cast<int>(std::ceil(0.05 * n)));

  const double scale = y.cwiseAbs().maxCoeff();
  // rows whose entries never leave the numerical noise floor have no
  // bus-to-bus connection (the bus hangs directly off the substation)
  const double zero_guard = 1e-6 * scale;

  AdjacencyEstimate out;
  out.bus_count = n;
  out.gamma = gamma;
  out.radius = options.radius;
  out.labels = Eigen::MatrixXi::Zero(n, n);

  Eigen::MatrixXi flags = Eigen::MatrixXi::Zero(n, n);
  Eigen::MatrixXd margins = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row_radius(n, 0.0);

  if (!options.per_row) {
    // joint variant: pool all off-diagonal entries, normalize once, cluster
    // once, then route the flags back to their rows
    std::vector<double> raw;
    std::vector<std::pair<int, int>> where;
    raw.reserve(static_cast<std::size_t>(n) * (n - 1));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) {
          raw.push_back(y(i, j));
          where.emplace_back(i, j);
        }
      }
    }
    std::vector<int> columns(raw.size());
    std::iota(columns.begin(), columns.end(), 0);
    RowSelection joint = select_row(0, raw, columns, gamma, options.radius);
    for (std::size_t t = 0; t < joint.connected.size(); ++t) {
      const auto [i, j] = where[joint.connected[t]];
      flags(i, j) = 1;
      margins(i, j) = joint.margin[t];
    }
    std::fill(row_radius.begin(), row_radius.end(), joint.diag.radius);
    joint.diag.bus = 0;
    out.rows.push_back(joint.diag);
  } else {
    for (int i = 0; i < n; ++i) {
      std::vector<double> raw;
      std::vector<int> columns;
      raw.reserve(n - 1);
      for (int j = 0; j < n; ++j) {
        if (j != i) {
          raw.push_back(y(i, j));
          columns.push_back(j);
        }
      }
      RowDiagnostics blank;
      blank.bus = i + 1;
      double max_abs = 0.0;
      for (double t : raw) max_abs = std::max(max_abs, std::abs(t));
      if (raw.empty() || max_abs <= zero_guard) {
        out.rows.push_back(blank);
        continue;
      }
      const double lo = *std::min_element(raw.begin(), raw.end());
      const double hi = *std::max_element(raw.begin(), raw.end());
      require(hi - lo > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))) ||
                  raw.size() < 3,
              Errc::degenerate_row,
              "row " + std::to_string(i + 1) + ": all off-diagonal entries coincide");

      RowSelection sel = select_row(i, raw, columns, gamma, options.radius);
      for (std::size_t t = 0; t < sel.connected.size(); ++t) {
        flags(i, sel.connected[t]) = 1;
        margins(i, sel.connected[t]) = sel.margin[t];
      }
      row_radius[i] = sel.diag.radius;
      out.rows.push_back(sel.diag);
    }
  }

  // symmetrize: mutual flags make an edge; a one-sided flag survives only
  // when it sits well clear of the group boundary
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool fij = flags(i, j) != 0;
      const bool fji = flags(j, i) != 0;
      bool edge = fij && fji;
      if (!edge && fij) edge = margins(i, j) > 2.0 * row_radius[i];
      if (!edge && fji) edge = margins(j, i) > 2.0 * row_radius[j];
      if (edge) {
        out.labels(i, j) = 1;
        out.labels(j, i) = 1;
        out.edges.emplace_back(i + 1, j + 1);
      }
    }
  }

  // every connected component of the recovered bus graph hangs off the
  // substation through exactly one bus: the one whose row sum (diagonal
  // surplus) is largest
  std::vector<int> component(n, -1);
  int components = 0;
  for (int i = 0; i < n; ++i) {
    if (component[i] >= 0) continue;
    std::vector<int> stack{i};
    component[i] = components;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      for (int b = 0; b < n; ++b) {
        if (out.labels(a, b) != 0 && component[b] < 0) {
          component[b] = components;
          stack.push_back(b);
        }
      }
    }
    ++components;
  }
  std::vector<int> best(components, -1);
  for (int i = 0; i < n; ++i) {
    const int c = component[i];
    if (best[c] < 0 || y.row(i).sum() > y.row(best[c]).sum()) best[c] = i;
  }
  for (int c = 0; c < components; ++c) out.root_adjacent.push_back(best[c] + 1);
  std::sort(out.root_adjacent.begin(), out.root_adjacent.end());
  return out;
}

RobustnessCertificate verify_robustness_bound(const RadialNetwork& net,
                                              const SampleSet& samples) {
  require(samples.bus_count() == net.branch_count(), Errc::dimension_mismatch,
          "sample set does not match the network size");
  const FreeLaplacianFit fit = fit_laplacian_free(samples);

  const int K = samples.size();
  const int n = samples.bus_count();
  double coupling = 0.0;  // sum_k ||[per-interval jacobian]|| * ||p_k||
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd w =
        samples.v().row(k).transpose() - Eigen::VectorXd::Constant(n, samples.v0()(k));
    const double pnorm = samples.p().row(k).norm();
    // the interval's Jacobian [I (x) w', p] has rows with disjoint w-blocks,
    // so its spectral norm is sqrt(||w||^2 + ||p||^2)
    coupling += std::sqrt(w.squaredNorm() + pnorm * pnorm) * pnorm;
  }

  RobustnessCertificate cert;
  cert.min_eigenvalue = fit.min_eigenvalue;
  require(fit.min_eigenvalue > 0.0, Errc::singular_normal_matrix,
          "normal matrix is singular; certificate undefined");
  cert.eps = 2.0 * coupling / fit.min_eigenvalue;

  const Eigen::VectorXd ratios = net.ratios();
  const double mean_ratio = ratios.mean();
  const Eigen::MatrixXd deviation =
      net.ratio_deviation_matrix(ratios - Eigen::VectorXd::Constant(net.branch_count(),
                                                                    mean_ratio));
  cert.delta_norm = deviation.norm();
  cert.lhs = (fit.y - net.weighted_laplacian()).norm();
  cert.lambda_fit = fit.lambda;
  cert.lambda_mean = mean_ratio;
  // tiny absolute slack covers the homogeneous case where both sides vanish
  cert.holds = cert.lhs <= cert.eps * cert.delta_norm + 1e-9;
  return cert;
}

}  // namespace gridtwin
