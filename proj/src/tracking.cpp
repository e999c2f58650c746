#include "gs4d/tracking.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "gs4d/knn.hpp"

namespace gs4d {

std::vector<std::pair<int, int>> SegmentPlan::segments() const {
  std::vector<std::pair<int, int>> out;
  for (size_t i = 0; i < keyframes.size(); ++i) {
    const int begin = keyframes[i];
    const int end = i + 1 < keyframes.size() ? keyframes[i + 1] : frame_count;
    out.emplace_back(begin, end);
  }
  return out;
}

SegmentPlan plan_segments(int frame_count, int segment_length) {
  if (frame_count <= 0) throw std::invalid_argument("plan_segments: frame_count must be > 0");
  if (segment_length < 1) throw std::invalid_argument("plan_segments: segment_length must be >= 1");
  SegmentPlan plan;
  plan.segment_length = segment_length;
  plan.frame_count = frame_count;
  for (int k = 0; k < frame_count; k += segment_length) plan.keyframes.push_back(k);
  return plan;
}

namespace {

std::vector<Binding> bind_sources(const std::vector<Vec3>& src, const EDGraph& graph) {
  std::vector<Vec3> node_positions(graph.size());
  for (size_t i = 0; i < graph.size(); ++i) node_positions[i] = graph.nodes[i].x;
  KnnIndex index(node_positions);
  std::vector<Binding> bindings;
  bindings.reserve(src.size());
  for (const Vec3& p : src) bindings.push_back(bind_point(p, graph, index));
  return bindings;
}

double data_energy(const EDGraph& graph, const std::vector<Binding>& bindings,
                   const std::vector<Vec3>& src, const std::vector<Vec3>& tgt,
                   const std::vector<Vec3>& normals) {
  double e = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 warped = dq_transform_point(dqb(bindings[i], graph), src[i]);
    if (!normals.empty()) {
      const double d = normals[i].dot(warped - tgt[i]);
      e += d * d;
    } else {
      e += (warped - tgt[i]).squaredNorm();
    }
  }
  return e;
}

double reg_energy(const EDGraph& graph, const std::vector<RigidTransform>& transforms) {
  double e = 0.0;
  for (size_t i = 0; i < graph.size(); ++i) {
    for (int j : graph.edges[i]) {
      const Vec3 d = transforms[i].apply(graph.nodes[j].x) - transforms[j].apply(graph.nodes[j].x);
      e += d.squaredNorm();
    }
  }
  return e;
}

std::vector<RigidTransform> node_transforms(const EDGraph& graph) {
  std::vector<RigidTransform> t(graph.size());
  for (size_t i = 0; i < graph.size(); ++i) t[i] = dq_to_rigid(graph.nodes[i].dq);
  return t;
}

}  // namespace

double e_data(const EDGraph& graph, const CorrespondenceSet& corr) {
  if (corr.src.empty()) throw std::invalid_argument("e_data: empty correspondence set");
  if (corr.src.size() != corr.tgt.size()) {
    throw std::invalid_argument("e_data: src/tgt size mismatch");
  }
  return data_energy(graph, bind_sources(corr.src, graph), corr.src, corr.tgt, corr.normals);
}

double e_reg(const EDGraph& graph) {
  return reg_energy(graph, node_transforms(graph));
}

namespace {

struct Pairing {
  std::vector<int> src_of_row;  // active source index per pair
  std::vector<Vec3> tgt_of_row;
};

Pairing pair_by_nearest(const EDGraph& graph, const std::vector<Binding>& bindings,
                        const std::vector<Vec3>& src, const KnnIndex& tgt_index,
                        double cutoff) {
  Pairing p;
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 warped = dq_transform_point(dqb(bindings[i], graph), src[i]);
    const auto nb = tgt_index.knn(warped, 1);
    if (nb[0].distance <= cutoff) {
      p.src_of_row.push_back(static_cast<int>(i));
      p.tgt_of_row.push_back(tgt_index.points()[nb[0].index]);
    }
  }
  return p;
}

// One Gauss-Newton pass over a fixed pairing. Returns true when the update
// dropped below cfg.convergence_tol.
bool gauss_newton(EDGraph& graph, const std::vector<Binding>& bindings,
                  const std::vector<Vec3>& src, const std::vector<Vec3>& tgt,
                  const std::vector<Vec3>& normals, const std::vector<int>& rows,
                  const TrackConfig& cfg, int iterations) {
  const int n = static_cast<int>(graph.size());
  const int dof = 6 * n;

  auto energy_of = [&](const EDGraph& g) {
    double e = 0.0;
    if (cfg.lambda_data > 0.0) {
      std::vector<Vec3> s(rows.size()), t(rows.size());
      std::vector<Vec3> nrm;
      if (!normals.empty()) nrm.resize(rows.size());
      std::vector<Binding> b(rows.size());
      for (size_t r = 0; r < rows.size(); ++r) {
        s[r] = src[rows[r]];
        t[r] = tgt[r];
        b[r] = bindings[rows[r]];
        if (!normals.empty()) nrm[r] = normals[rows[r]];
      }
      e += cfg.lambda_data * data_energy(g, b, s, t, nrm);
    }
    if (cfg.lambda_reg > 0.0) e += cfg.lambda_reg * reg_energy(g, node_transforms(g));
    return e;
  };

  double energy = energy_of(graph);

  for (int iter = 0; iter < iterations; ++iter) {
    const std::vector<RigidTransform> transforms = node_transforms(graph);
    std::vector<Vec3> anchors(n);
    for (int i = 0; i < n; ++i) anchors[i] = transforms[i].apply(graph.nodes[i].x);

    MatX h = MatX::Zero(dof, dof);
    VecX g = VecX::Zero(dof);

    // Data rows, linearized as a blended per-node rigid motion.
    for (size_t r = 0; r < rows.size(); ++r) {
      const int si = rows[r];
      const Binding& b = bindings[si];
      Vec3 warped = Vec3::Zero();
      for (int k = 0; k < kBindingNodes; ++k) {
        warped += b.weights[k] * transforms[b.node_indices[k]].apply(src[si]);
      }
      Eigen::Matrix<double, 3, 48> jac;  // 8 nodes x (theta, t)
      for (int k = 0; k < kBindingNodes; ++k) {
        const int node = b.node_indices[k];
        const Vec3 arm = transforms[node].apply(src[si]) - anchors[node];
        jac.block<3, 3>(0, 6 * k) = -b.weights[k] * skew(arm);
        jac.block<3, 3>(0, 6 * k + 3) = b.weights[k] * Mat3::Identity();
      }
      const Vec3 residual = warped - tgt[r];

      Eigen::Matrix<double, Eigen::Dynamic, 48> jrows;
      VecX rrows;
      if (!normals.empty()) {
        const Vec3& nrm = normals[si];
        jrows = (nrm.transpose() * jac).eval();
        rrows = VecX::Constant(1, nrm.dot(residual));
      } else {
        jrows = jac;
        rrows = residual;
      }
      for (int a = 0; a < kBindingNodes; ++a) {
        const int na = b.node_indices[a];
        g.segment<6>(6 * na) +=
            cfg.lambda_data * jrows.middleCols<6>(6 * a).transpose() * rrows;
        for (int c = 0; c < kBindingNodes; ++c) {
          const int nc = b.node_indices[c];
          h.block<6, 6>(6 * na, 6 * nc) += cfg.lambda_data *
                                           jrows.middleCols<6>(6 * a).transpose() *
                                           jrows.middleCols<6>(6 * c);
        }
      }
    }

    // Regularizer rows over directed edges.
    if (cfg.lambda_reg > 0.0) {
      for (int i = 0; i < n; ++i) {
        for (int j : graph.edges[i]) {
          const Vec3 xi = transforms[i].apply(graph.nodes[j].x);
          const Vec3 xj = transforms[j].apply(graph.nodes[j].x);
          const Vec3 residual = xi - xj;
          Eigen::Matrix<double, 3, 6> ji, jj;
          ji << -skew(xi - anchors[i]), Mat3::Identity();
          jj << -skew(xj - anchors[j]), Mat3::Identity();
          g.segment<6>(6 * i) += cfg.lambda_reg * ji.transpose() * residual;
          g.segment<6>(6 * j) -= cfg.lambda_reg * jj.transpose() * residual;
          h.block<6, 6>(6 * i, 6 * i) += cfg.lambda_reg * ji.transpose() * ji;
          h.block<6, 6>(6 * j, 6 * j) += cfg.lambda_reg * jj.transpose() * jj;
          h.block<6, 6>(6 * i, 6 * j) -= cfg.lambda_reg * ji.transpose() * jj;
          h.block<6, 6>(6 * j, 6 * i) -= cfg.lambda_reg * jj.transpose() * ji;
        }
      }
    }

    // Solve with escalating Levenberg damping until the true energy drops.
    double mu = 0.0;
    bool accepted = false;
    double step_inf = 0.0;
    for (int attempt = 0; attempt < 9; ++attempt) {
      MatX damped = h;
      if (mu > 0.0) damped.diagonal().array() += mu;
      Eigen::LDLT<MatX> ldlt(damped);
      bool usable = ldlt.info() == Eigen::Success;
      VecX delta;
      if (usable) {
        delta = ldlt.solve(-g);
        usable = delta.allFinite();
      }
      if (usable) {
        EDGraph trial = graph;
        for (int i = 0; i < n; ++i) {
          const Vec3 theta = delta.segment<3>(6 * i);
          const Vec3 t = delta.segment<3>(6 * i + 3);
          const Mat3 r_inc = rotation_exp(theta);
          RigidTransform updated;
          updated.rotation = r_inc * transforms[i].rotation;
          updated.translation = r_inc * (transforms[i].translation - anchors[i]) + anchors[i] + t;
          trial.nodes[i].dq = dq_from_rigid(updated);
        }
        const double trial_energy = energy_of(trial);
        if (std::isfinite(trial_energy) && trial_energy <= energy) {
          graph = std::move(trial);
          energy = trial_energy;
          step_inf = delta.cwiseAbs().maxCoeff();
          accepted = true;
          break;
        }
      }
      mu = mu == 0.0 ? 1e-6 * (1.0 + h.diagonal().cwiseAbs().maxCoeff()) : mu * 10.0;
      if (attempt == 8 && !usable) {
        throw std::runtime_error("solve_tracking: normal equations singular after 8 damping retries");
      }
    }

    if (!accepted) return true;  // no decreasing step exists; current state is the minimum found
    if (step_inf < cfg.convergence_tol) return true;
  }
  return false;
}

}  // namespace

EDGraph solve_tracking(const EDGraph& graph, const CorrespondenceSet& corr,
                       const TrackConfig& cfg) {
  if (corr.src.empty()) throw std::invalid_argument("solve_tracking: empty correspondence set");
  if (!(cfg.lambda_data + cfg.lambda_reg > 0.0)) {
    throw std::invalid_argument("solve_tracking: lambda_data + lambda_reg must be > 0");
  }
  if (cfg.mode == CorrespondenceMode::kGiven && corr.src.size() != corr.tgt.size()) {
    throw std::invalid_argument("solve_tracking: src/tgt size mismatch in given mode");
  }
  if (corr.src.size() < 3 * graph.size()) {
    std::cerr << "solve_tracking: only " << corr.src.size() << " correspondences for "
              << graph.size() << " nodes (< 3x node count)\n";
  }

  EDGraph result = graph;
  const std::vector<Binding> bindings = bind_sources(corr.src, result);

  if (cfg.mode == CorrespondenceMode::kGiven) {
    std::vector<int> rows(corr.src.size());
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    gauss_newton(result, bindings, corr.src, corr.tgt, corr.normals, rows, cfg,
                 cfg.max_iterations);
    return result;
  }

  // ICP mode: re-pair by nearest neighbor each outer round, then refine.
  KnnIndex tgt_index(corr.tgt);
  const double cutoff = 2.0 * result.node_radius;
  const int inner = 3;
  const int outer = std::max(1, cfg.max_iterations / inner);
  for (int round = 0; round < outer; ++round) {
    const Pairing pairing = pair_by_nearest(result, bindings, corr.src, tgt_index, cutoff);
    if (pairing.src_of_row.empty()) break;
    const bool converged = gauss_newton(result, bindings, corr.src, pairing.tgt_of_row, {},
                                        pairing.src_of_row, cfg, inner);
    if (converged && round > 0) break;
  }
  return result;
}

}  // namespace gs4d
