#include "patchmg/smoother.hpp"

#include <cmath>
#include <utility>

#include "patchmg/errors.hpp"
#include "patchmg/spline.hpp"

namespace patchmg {

PieceSmoother::PieceSmoother(Piece piece, double scalar)
    : piece_(std::move(piece)), payload_(Payload::scalar), scalar_(scalar) {}

PieceSmoother::PieceSmoother(Piece piece, BandedCholesky payload)
    : piece_(std::move(piece)), payload_(Payload::banded), banded_(std::move(payload)) {}

PieceSmoother::PieceSmoother(Piece piece, FastDiagonalSolver payload)
    : piece_(std::move(piece)), payload_(Payload::tensor), tensor_(std::move(payload)) {}

Eigen::VectorXd PieceSmoother::solve(const Eigen::VectorXd& local) const {
  if (local.size() != Eigen::Index(piece_.dofs.size()))
    throw DomainError("piece smoother: local vector size mismatch");
  switch (payload_) {
    case Payload::scalar:
      return local / scalar_;
    case Payload::banded:
      return banded_.solve(local);
    case Payload::tensor:
    default:
      return tensor_.solve(local);
  }
}

void PieceSmoother::apply_add(const Eigen::VectorXd& residual, Eigen::VectorXd& correction) const {
  const std::vector<std::int32_t>& dofs = piece_.dofs;
  if (payload_ == Payload::scalar) {
    correction[dofs[0]] += residual[dofs[0]] / scalar_;
    return;
  }
  Eigen::VectorXd local(dofs.size());
  for (std::size_t i = 0; i < dofs.size(); ++i) local[Eigen::Index(i)] = residual[dofs[i]];
  Eigen::VectorXd x = solve(local);
  for (std::size_t i = 0; i < dofs.size(); ++i) correction[dofs[i]] += x[Eigen::Index(i)];
}

PieceSmoother PieceSmoother::reindexed(const std::vector<std::int32_t>& to_local) const {
  PieceSmoother out = *this;
  for (std::int32_t& d : out.piece_.dofs) d = to_local[d];
  return out;
}

PieceSmoother build_vertex_smoother(Piece piece, double h, int p, int d) {
  return PieceSmoother(std::move(piece), std::pow(h / p, d - 2));
}

PieceSmoother build_edge_smoother(Piece piece, double h, int p, int d) {
  const UnivariateSpace& space = piece.spaces.at(0);
  BandedSymMatrix K = univariate_stiffness(space);
  BandedSymMatrix M = univariate_mass(space);
  BandedSymMatrix L =
      BandedSymMatrix::combine(std::pow(h / p, d - 1), K, std::pow(h / p, d - 3), M);
  return PieceSmoother(std::move(piece), BandedCholesky(L));
}

PieceSmoother build_face_smoother(Piece piece, double h, int p) {
  std::vector<Eigen::MatrixXd> K, M;
  for (const UnivariateSpace& space : piece.spaces) {
    K.push_back(univariate_stiffness(space).to_dense());
    M.push_back(univariate_mass(space).to_dense());
  }
  return PieceSmoother(std::move(piece),
                       FastDiagonalSolver(K, M, double(p) * p / (h * h), h / p));
}

PieceSmoother build_interior_smoother(Piece piece, double sigma) {
  std::vector<Eigen::MatrixXd> K, M;
  for (const UnivariateSpace& space : piece.spaces) {
    K.push_back(univariate_stiffness(space).to_dense());
    M.push_back(univariate_mass(space).to_dense());
  }
  return PieceSmoother(std::move(piece), FastDiagonalSolver(K, M, sigma, 1.0));
}

HybridSmoother::HybridSmoother(const DofMapper& mapper, double tau, double sigma_scale)
    : num_dofs_(mapper.num_dofs()), tau_(tau) {
  const int d = mapper.domain().dim;
  const int p = mapper.degree();
  const double h = 1.0 / mapper.elements();
  const double sigma = 1.0 / (sigma_scale * h * h);
  std::vector<Piece> pieces = classify_dofs(mapper);
  pieces_.reserve(pieces.size());
  for (Piece& piece : pieces) {
    switch (piece.kind) {
      case PieceKind::interior:
        pieces_.push_back(build_interior_smoother(std::move(piece), sigma));
        break;
      case PieceKind::face:
        pieces_.push_back(build_face_smoother(std::move(piece), h, p));
        break;
      case PieceKind::edge:
        pieces_.push_back(build_edge_smoother(std::move(piece), h, p, d));
        break;
      case PieceKind::vertex:
        pieces_.push_back(build_vertex_smoother(std::move(piece), h, p, d));
        break;
    }
  }
}

Eigen::VectorXd HybridSmoother::apply(const Eigen::VectorXd& residual) const {
  if (residual.size() != num_dofs_) throw DomainError("smoother: residual size mismatch");
  Eigen::VectorXd correction = Eigen::VectorXd::Zero(num_dofs_);
  for (const PieceSmoother& ps : pieces_) ps.apply_add(residual, correction);
  return correction;
}

}  // namespace patchmg
