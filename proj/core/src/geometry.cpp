#include "pdrci/geometry.hpp"

#include "pdrci/conic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

namespace pdrci::geometry {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Portable uniform in [0, 1): the top 53 bits of one engine draw.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

MatrixXd inverse_checked(const MatrixXd& W) {
  Eigen::FullPivLU<MatrixXd> lu(W);
  if (W.rows() != W.cols() || !lu.isInvertible()) throw GeometryError("W is singular");
  const Eigen::JacobiSVD<MatrixXd> svd(W);
  const VectorXd s = svd.singularValues();
  if (s[s.size() - 1] <= 1e-14 * std::max(1.0, s[0])) throw GeometryError("W is singular");
  return lu.inverse();
}

// Maximizes or minimizes x_axis over the polytope, clamped by |x| <= guard.
double axis_extent(const HPolytope& poly, int axis, double sign, double guard) {
  conic::ConicProgram prog;
  const auto x = prog.free_var("x", poly.dim(), 1);
  const conic::AffineExpr xe = prog.expr(x);
  prog.add_nonneg("faces", conic::AffineExpr(MatrixXd(poly.g)) - poly.F * xe);
  prog.add_nonneg("guard_hi", conic::AffineExpr(MatrixXd::Constant(poly.dim(), 1, guard)) - xe);
  prog.add_nonneg("guard_lo", conic::AffineExpr(MatrixXd::Constant(poly.dim(), 1, guard)) + xe);
  prog.maximize(sign * prog.entry(x, axis, 0));
  const conic::Solution sol = conic::solve(prog);
  if (sol.status == conic::SolveStatus::Infeasible) throw GeometryError("polytope is empty");
  if (!sol.ok()) throw GeometryError("bounding-box LP failed: " + conic::to_string(sol.status));
  VectorXd xs = sol.y.head(poly.dim());
  // Snap to the exact vertex of the active faces when they determine one.
  const VectorXd slack = poly.g - poly.F * xs;
  std::vector<int> active;
  for (int r = 0; r < poly.rows(); ++r) {
    if (slack[r] <= 1e-6 * (1.0 + std::abs(poly.g[r]))) active.push_back(r);
  }
  if (!active.empty()) {
    MatrixXd Fa(static_cast<Eigen::Index>(active.size()), poly.dim());
    VectorXd ga(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      Fa.row(static_cast<Eigen::Index>(k)) = poly.F.row(active[k]);
      ga[static_cast<Eigen::Index>(k)] = poly.g[active[k]];
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Fa);
    if (qr.rank() == poly.dim()) {
      const VectorXd xv = qr.solve(ga);
      if ((poly.F * xv - poly.g).maxCoeff() <= 1e-9 && (xv - xs).norm() <= 1e-5 * (1.0 + xs.norm())) {
        xs = xv;
      }
    }
  }
  const double v = xs[axis];
  if (std::abs(v) >= guard * (1.0 - 1e-6)) throw GeometryError("polytope is unbounded");
  return v;
}

}  // namespace

MatrixXd ParamPolytope::P_at(const SimplexPoint& xi) const {
  if (xi.size() != N_xi()) throw GeometryError("xi length does not match the number of vertices");
  MatrixXd out = MatrixXd::Zero(n_p(), n_x());
  for (int k = 0; k < N_xi(); ++k) out += xi[k] * P[static_cast<std::size_t>(k)];
  return out;
}

bool Box::contains(const VectorXd& x, double tol) const {
  return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
}

HPolytope slice(const ParamPolytope& pp, const SimplexPoint& xi) {
  const MatrixXd Winv = inverse_checked(pp.W);
  const MatrixXd R = pp.P_at(xi) * Winv;
  HPolytope h;
  h.F.resize(2 * R.rows(), R.cols());
  h.F << R, -R;
  h.g = VectorXd::Ones(2 * R.rows());
  return h;
}

HPolytope robust_intersection(const ParamPolytope& pp) {
  const MatrixXd Winv = inverse_checked(pp.W);
  const int np = pp.n_p();
  HPolytope h;
  h.F.resize(2 * np * pp.N_xi(), pp.n_x());
  h.g = VectorXd::Ones(h.F.rows());
  for (int k = 0; k < pp.N_xi(); ++k) {
    const MatrixXd R = pp.P[static_cast<std::size_t>(k)] * Winv;
    h.F.middleRows(2 * np * k, np) = R;
    h.F.middleRows(2 * np * k + np, np) = -R;
  }
  return h;
}

bool membership(const HPolytope& poly, const VectorXd& x, double tol) {
  return ((poly.F * x - poly.g).array() <= tol).all();
}

double slice_rank_margin(const ParamPolytope& pp, const SimplexPoint& xi) {
  const MatrixXd R = pp.P_at(xi) * inverse_checked(pp.W);
  const Eigen::JacobiSVD<MatrixXd> svd(R);
  const VectorXd s = svd.singularValues();
  if (s.size() < pp.n_x()) return 0.0;
  return s[pp.n_x() - 1];
}

Box bounding_box(const HPolytope& poly, double guard) {
  Box b;
  b.lower.resize(poly.dim());
  b.upper.resize(poly.dim());
  for (int i = 0; i < poly.dim(); ++i) {
    b.upper[i] = axis_extent(poly, i, 1.0, guard);
    b.lower[i] = axis_extent(poly, i, -1.0, guard);
  }
  return b;
}

Box bounding_box(const ConstraintData& c, double guard) {
  HPolytope h{c.H_x, VectorXd::Ones(c.H_x.rows())};
  // only pure state rows bound x on their own
  std::vector<int> keep;
  for (int r = 0; r < h.rows(); ++r) {
    const bool pure = c.H_u.cols() == 0 || c.H_u.row(r).isZero(0.0);
    if (pure && !h.F.row(r).isZero(0.0)) keep.push_back(r);
  }
  HPolytope s;
  s.F.resize(static_cast<Eigen::Index>(keep.size()), c.H_x.cols());
  s.g = VectorXd::Ones(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) s.F.row(static_cast<Eigen::Index>(k)) = h.F.row(keep[k]);
  if (keep.empty()) throw GeometryError("state constraint set is unbounded");
  return bounding_box(s, guard);
}

std::vector<VectorXd> box_vertices_and_boundary_samples(const Box& box, int extra, std::uint64_t seed) {
  const int n = box.dim();
  std::vector<VectorXd> out;
  for (long c = 0; c < (1L << n); ++c) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = (c >> i) & 1 ? box.upper[i] : box.lower[i];
    out.push_back(std::move(v));
  }
  std::mt19937_64 rng(splitmix64(seed));
  const VectorXd width = box.upper - box.lower;
  // facet i+ and i- carry weight proportional to their (n-1)-volume
  VectorXd facet_w(2 * n);
  for (int i = 0; i < n; ++i) {
    double a = 1.0;
    for (int k = 0; k < n; ++k) {
      if (k != i) a *= width[k];
    }
    facet_w[2 * i] = a;
    facet_w[2 * i + 1] = a;
  }
  const double total = facet_w.sum();
  for (int e = 0; e < extra; ++e) {
    double pick = unit(rng) * total;
    int f = 0;
    while (f < 2 * n - 1 && pick >= facet_w[f]) {
      pick -= facet_w[f];
      ++f;
    }
    VectorXd v(n);
    for (int k = 0; k < n; ++k) v[k] = box.lower[k] + unit(rng) * width[k];
    v[f / 2] = f % 2 == 0 ? box.upper[f / 2] : box.lower[f / 2];
    out.push_back(std::move(v));
  }
  return out;
}

VolumeEstimate mc_volume(const HPolytope& poly, const Box& box, std::int64_t samples, std::uint64_t seed) {
  VolumeEstimate est;
  est.samples = samples;
  if (samples <= 0) return est;
  constexpr std::int64_t kChunk = 1 << 15;
  const std::int64_t chunks = (samples + kChunk - 1) / kChunk;
  const int n = box.dim();
  const VectorXd width = box.upper - box.lower;
  auto run_chunk = [&](std::int64_t c) -> std::int64_t {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(c))));
    const std::int64_t count = std::min(kChunk, samples - c * kChunk);
    std::int64_t hits = 0;
    VectorXd x(n);
    for (std::int64_t s = 0; s < count; ++s) {
      for (int i = 0; i < n; ++i) x[i] = box.lower[i] + unit(rng) * width[i];
      if (membership(poly, x)) ++hits;
    }
    return hits;
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::int64_t>(chunks, std::min(hw, 8u)));
  std::vector<std::int64_t> partial(workers, 0);
  if (workers <= 1) {
    for (std::int64_t c = 0; c < chunks; ++c) partial[0] += run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::int64_t c = t; c < chunks; c += workers) partial[t] += run_chunk(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  est.hits = std::accumulate(partial.begin(), partial.end(), std::int64_t{0});
  const double p = static_cast<double>(est.hits) / static_cast<double>(samples);
  const double vol = box.volume();
  est.value = vol * p;
  est.standard_error = vol * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return est;
}

Polygon vertex_enumerate_2d(const HPolytope& poly, double tol) {
  if (poly.dim() != 2) throw GeometryError("vertex enumeration requires a planar polytope");
  // bounded iff the outward normals leave no angular gap of pi or more
  std::vector<double> angles;
  for (int r = 0; r < poly.rows(); ++r) {
    if (poly.F.row(r).norm() > 0.0) angles.push_back(std::atan2(poly.F(r, 1), poly.F(r, 0)));
  }
  if (angles.size() < 3) throw GeometryError("polygon is unbounded");
  std::sort(angles.begin(), angles.end());
  double max_gap = angles.front() + 2.0 * kPi - angles.back();
  for (std::size_t k = 1; k < angles.size(); ++k) max_gap = std::max(max_gap, angles[k] - angles[k - 1]);
  if (max_gap >= kPi - 1e-12) throw GeometryError("polygon is unbounded");

  std::vector<Vector2d> pts;
  for (int a = 0; a < poly.rows(); ++a) {
    for (int b = a + 1; b < poly.rows(); ++b) {
      Eigen::Matrix2d M;
      M << poly.F(a, 0), poly.F(a, 1), poly.F(b, 0), poly.F(b, 1);
      const double det = M.determinant();
      const double scale = poly.F.row(a).norm() * poly.F.row(b).norm();
      if (std::abs(det) <= 1e-12 * scale) continue;
      const Vector2d v = M.partialPivLu().solve(Vector2d(poly.g[a], poly.g[b]));
      const VectorXd res = poly.F * v - poly.g;
      bool inside = true;
      for (int r = 0; r < poly.rows() && inside; ++r) {
        inside = res[r] <= tol * (1.0 + std::abs(poly.g[r]));
      }
      if (!inside) continue;
      bool dup = false;
      for (const Vector2d& p : pts) {
        if ((p - v).norm() <= 1e-9 * (1.0 + v.norm())) {
          dup = true;
          break;
        }
      }
      if (!dup) pts.push_back(v);
    }
  }
  if (pts.size() < 3) throw GeometryError("polygon is empty or degenerate");
  Vector2d center = Vector2d::Zero();
  for (const Vector2d& p : pts) center += p;
  center /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vector2d& p, const Vector2d& q) {
    return std::atan2(p.y() - center.y(), p.x() - center.x()) < std::atan2(q.y() - center.y(), q.x() - center.x());
  });
  // drop vertices in the interior of an edge
  std::vector<Vector2d> hull;
  const std::size_t n = pts.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vector2d& prev = pts[(k + n - 1) % n];
    const Vector2d& cur = pts[k];
    const Vector2d& next = pts[(k + 1) % n];
    const Vector2d e1 = cur - prev;
    const Vector2d e2 = next - cur;
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(cross) > 1e-12 * e1.norm() * e2.norm()) hull.push_back(cur);
  }
  if (hull.size() < 3) throw GeometryError("polygon is empty or degenerate");
  Polygon poly_out;
  poly_out.vertices = hull;
  double area2 = 0.0;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const Vector2d& p = hull[k];
    const Vector2d& q = hull[(k + 1) % hull.size()];
    area2 += p.x() * q.y() - q.x() * p.y();
    int face = -1;
    for (int r = 0; r < poly.rows() && face < 0; ++r) {
      const double s1 = poly.F.row(r).dot(p) - poly.g[r];
      const double s2 = poly.F.row(r).dot(q) - poly.g[r];
      const double t = 1e-7 * (1.0 + std::abs(poly.g[r]));
      if (std::abs(s1) <= t && std::abs(s2) <= t) face = r;
    }
    poly_out.faces.push_back(face);
  }
  poly_out.area = 0.5 * std::abs(area2);
  return poly_out;
}

int facet_count(const Polygon& polygon) {
  return static_cast<int>(polygon.vertices.size());
}

std::vector<VectorXd> sample_in_slice(const ParamPolytope& pp, const SimplexPoint& xi, int count,
                                      std::uint64_t seed) {
  std::vector<VectorXd> out;
  if (count <= 0) return out;
  const HPolytope h = slice(pp, xi);
  if (slice_rank_margin(pp, xi) <= 1e-12) throw GeometryError("slice is unbounded");
  const Box box = bounding_box(h);
  std::mt19937_64 rng(splitmix64(seed));
  const VectorXd width = box.upper - box.lower;
  const int n = box.dim();
  long attempts = 0;
  VectorXd x(n);
  while (static_cast<int>(out.size()) < count && attempts < 1000000) {
    ++attempts;
    for (int i = 0; i < n; ++i) x[i] = box.lower[i] + unit(rng) * width[i];
    if (membership(h, x)) out.push_back(x);
  }
  if (static_cast<int>(out.size()) == count) return out;
  if (n != 2) throw GeometryError("sampling cap exceeded");
  const Polygon poly = vertex_enumerate_2d(h);
  while (static_cast<int>(out.size()) < count) {
    VectorXd w(static_cast<Eigen::Index>(poly.vertices.size()));
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = -std::log(std::max(unit(rng), 1e-300));
    w /= w.sum();
    Vector2d p = Vector2d::Zero();
    for (std::size_t k = 0; k < poly.vertices.size(); ++k) p += w[static_cast<Eigen::Index>(k)] * poly.vertices[k];
    out.emplace_back(p);
  }
  return out;
}

void write_polygons_csv(std::ostream& os, const std::vector<PolygonRecord>& records) {
  os << "xi_index,slice_id,vertex_id,x1,x2\n";
  const auto old_prec = os.precision(17);
  for (const PolygonRecord& rec : records) {
    for (std::size_t v = 0; v < rec.polygon.vertices.size(); ++v) {
      os << rec.xi_index << ',' << rec.slice_id << ',' << v << ',' << rec.polygon.vertices[v].x() << ','
         << rec.polygon.vertices[v].y() << '\n';
    }
  }
  os.precision(old_prec);
}

}  // namespace pdrci::geometry
