#ifndef CFSPLIT_APPS_HPP_
#define CFSPLIT_APPS_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfsplit/execution.hpp"
#include "cfsplit/io.hpp"
#include "cfsplit/primal_dual.hpp"
#include "cfsplit/splitting.hpp"

namespace cfsplit {

// A wired problem: a coordinate-update process (the CF path), a full-update
// operator (possibly configured with different steps), an initial iterate,
// and hooks to pull the reported solution and its objective out of z.
struct ProblemInstance {
  std::string name;
  ProcessPtr coord;
  OperatorPtr full_op;
  BlockVector z0;
  std::function<std::vector<double>(const BlockVector&)> extract_solution;
  std::function<double(std::span<const double>)> objective;  // at a solution
  std::size_t solution_dim = 0;

  double objective_of(const BlockVector& z) const {
    return objective(extract_solution(z));
  }
};

// ---- generic diagonally scaled forward-backward operator ----
// (T x)_i = prox_{step_i * g_i}(x_i - step_i * grad_i f(x)); per-block steps.
OperatorPtr make_fbs_operator(SmoothPtr f, std::vector<ProxFn> prox_g,
                              std::vector<double> block_steps,
                              PartitionPtr partition,
                              std::function<double(std::span<const double>)>
                                  objective = nullptr);

// diagonal quadratic smooth term 0.5 * sum_e d_e (x_e - z_e)^2 (separable)
SmoothPtr make_diag_quadratic_smooth(std::vector<double> diag,
                                     std::vector<double> target);

// scalar prox of the logistic loss phi(u) = scale * log(1 + exp(-label * u))
ProxFn make_prox_logistic(double label, double scale = 1.0);

// ---- empirical risk minimization: (1/p) sum phi_j(a_j'x) + f(x) + g(x) ----
// x is one block; each dual s_j is a scalar; primal-first ordering with
// maintained A's.  prox_phi[j] is the prox of phi_j itself.
ProblemInstance build_erm(const DenseMatrix& a, std::vector<ProxFn> prox_phi,
                          SmoothPtr f, ProxFn prox_g_whole,
                          std::function<double(std::span<const double>)> objective,
                          double eta = 0.0, double gamma = 0.0);

// ---- SVM duals (Q psd, labels beta in {+-1}) ----
// unbiased: FBS with per-coordinate steps 1/Q_ii (fallback_step when Q_ii = 0)
ProblemInstance build_svm_unbiased(const DenseMatrix& q, double c,
                                   double fallback_step = 1.0);
// biased, primal-dual: coordinates {t} + {s_i}, maintained w = sum beta_i s_i
ProblemInstance build_svm_biased_pd(const DenseMatrix& q,
                                    std::span<const double> beta, double c,
                                    double eta = 0.0, double gamma = 0.0);
// biased, three-operator splitting on u with maintained w = beta~'u
ProblemInstance build_svm_biased_3s(const DenseMatrix& q,
                                    std::span<const double> beta, double c,
                                    double gamma = 0.0);

// ---- group lasso: f(x) + sum_i lambda_i ||x_{I_i}|| ----
struct GroupSpec {
  std::vector<std::vector<std::size_t>> groups;  // index sets covering [n]
  std::vector<double> lambdas;                   // per group
};
ProblemInstance build_group_lasso(const DenseMatrix& a,
                                  std::span<const double> b,
                                  const GroupSpec& spec, bool overlapping,
                                  double eta = 0.0, double gamma = 0.0);

// ---- anisotropic TV reconstruction on an h x w grid ----
// minimize lambda ||grad x||_1 + 0.5 ||Ax - b||^2; bundled column blocks.
struct TvProblem {
  std::size_t grid_h = 0, grid_w = 0;
  SparseMatrix sampling;  // rows x n
  std::vector<double> b;
  double lambda = 0.1;
};
ProblemInstance build_tv_reconstruction(const TvProblem& tv, double eta = 0.0,
                                        double gamma = 0.0);
// forward-difference gradient operator of the grid (2n x n, row pair per pixel)
SparseMatrix grid_gradient(std::size_t h, std::size_t w);

// ---- portfolio: min 0.5 x'Qx st x >= 0, sum x <= 1, xi'x >= c ----
ProblemInstance build_portfolio(const DenseMatrix& q, std::span<const double> xi,
                                double ret, double gamma = 0.0, double eta = 0.8);

// ---- NMF: min 0.5 ||W H' - A||_F^2, W, H >= 0; 2r column blocks ----
enum class NmfVariant {
  kUnitColumns,  // W columns kept on the nonneg unit ball (zero-column remedy)
  kRaw,          // plain projected gradient; skips steps with tiny curvature
};
ProblemInstance build_nmf(const DenseMatrix& a, std::size_t r,
                          NmfVariant variant = NmfVariant::kUnitColumns,
                          std::uint64_t seed = 1);

// ---- SOCP via DRS: min c'x st Ax = b, x in Q_1 x ... x Q_k ----
// cone_sizes: per-cone dims (1 = nonnegative ray); cached y = Bx + d with
// per-cone maintained tail squares; optional quadratic term 0.5 x'Cx.
ProblemInstance build_socp_drs(const DenseMatrix& a, std::span<const double> b,
                               std::span<const double> c,
                               std::vector<std::size_t> cone_sizes,
                               double gamma = 1.0,
                               const DenseMatrix* quad = nullptr);

// ---- 3D mesh denoising (overlapping blocks, rho = 1/2 per edge dual) ----
struct MeshProblem {
  std::size_t nodes = 0, dim = 1;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // undirected
  std::vector<double> noisy;                               // nodes * dim
  double fidelity = 1.0;                                   // weight on 0.5||x_i - z_i||^2
  double lambda = 1.0;                                     // TV weight
  std::vector<double> lo, hi;                              // optional box, size nodes*dim
};
ProblemInstance build_mesh_denoise(const MeshProblem& mesh, double eta = 0.0,
                                   double gamma = 0.0);

// ---- star-network consensus by FBFS: min sum f_i(x), worker units (x_i,s_i) ----
ProblemInstance build_network_consensus(
    std::vector<ProxFn> prox_f, std::size_t dim, double gamma,
    std::vector<std::function<double(std::span<const double>)>> f_values = {});

// ---- l1-regularized logistic regression (Eq. of §6-style) ----
ProblemInstance build_logistic_l1(const SparseMatrix& a,
                                  std::span<const double> labels, double lambda,
                                  std::size_t block_size, double gamma = 0.0);
ProblemInstance build_logistic_l1(const SparseDataset& data, double lambda,
                                  std::size_t block_size, double gamma = 0.0);

// Gaussian-kernel matrix utility (data helper for SVM instances).
DenseMatrix gaussian_kernel(const DenseMatrix& samples, double sigma);

// ---- synthetic instance generation (deterministic in the seed) ----
struct SyntheticDims {
  std::size_t rows = 0, cols = 0, rank = 1;
};
ProblemInstance gen_synthetic(const std::string& kind, const SyntheticDims& dims,
                              std::uint64_t seed);
// raw data generators backing `gen`
SparseDataset gen_least_squares_data(std::size_t p, std::size_t m,
                                     std::uint64_t seed);
SparseDataset gen_logistic_data(std::size_t p, std::size_t m, std::uint64_t seed);
Image gen_piecewise_image(std::size_t h, std::size_t w, std::uint64_t seed);
// portfolio data per the synthetic recipe: returns xi (row 0) stacked over Q
DenseMatrix gen_portfolio_data(std::size_t m, std::uint64_t seed);
DenseMatrix gen_nonneg_lowrank(std::size_t p, std::size_t n, std::size_t r,
                               std::uint64_t seed);

}  // namespace cfsplit

#endif  // CFSPLIT_APPS_HPP_
