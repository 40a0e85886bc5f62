#pragma once

#include <Eigen/Dense>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "patchmg/errors.hpp"
#include "patchmg/multigrid.hpp"
#include "patchmg/smoother.hpp"
#include "patchmg/topology.hpp"

namespace patchmg {

/// Hard cap on logical ranks of the in-process backend: enough for every
/// desk-scale experiment while bounding thread and buffer bookkeeping.
inline constexpr int kMaxRanks = 64;

/// Message channel of one rank: reliable ordered point-to-point transfers of
/// tagged real arrays plus deterministic collectives.  Every rank takes part
/// in every collective exactly once and in the same order.  All collectives
/// reduce in ascending-rank order, so their results are identical bitwise on
/// every rank and across runs.
class Communicator {
 public:
  virtual ~Communicator() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;

  virtual void send(int dest, int tag, const Eigen::VectorXd& data) = 0;
  virtual Eigen::VectorXd recv(int source, int tag) = 0;

  /// Every rank contributes one array and receives all of them, indexed by
  /// source rank.
  virtual std::vector<Eigen::VectorXd> allgather(const Eigen::VectorXd& local) = 0;

  /// Payload bytes this rank has pushed to peers so far.
  virtual std::uint64_t bytes_sent() const = 0;

  /// Ascending-rank sums built on allgather.
  double allreduce_sum(double local);
  Eigen::VectorXd allreduce_sum(const Eigen::VectorXd& local);
};

/// Single-rank communicator: collectives are identities, peers do not exist.
class LoopbackComm final : public Communicator {
 public:
  int rank() const override { return 0; }
  int size() const override { return 1; }
  void send(int, int, const Eigen::VectorXd&) override;
  Eigen::VectorXd recv(int, int) override;
  std::vector<Eigen::VectorXd> allgather(const Eigen::VectorXd& local) override;
  std::uint64_t bytes_sent() const override { return 0; }
};

/// Mailbox hub for R in-process ranks within one OS process.  Each rank gets
/// its own Communicator; ranks interact only through it (no shared mutable
/// state).  Channels are per (source, dest) FIFO queues under one lock; an
/// error on any rank poisons the hub so every blocked peer throws
/// TransportError instead of deadlocking.  The message log records
/// point-to-point traffic only (collectives ride an internal slot table).
class InProcHub {
 public:
  explicit InProcHub(int ranks);

  int ranks() const { return ranks_; }
  std::unique_ptr<Communicator> communicator(int rank);

  /// First call wins and records the reason; wakes every waiter.
  bool poison(const std::string& reason);

  struct Message {
    int source;
    int dest;
    int tag;
    Eigen::Index size;
  };
  std::vector<Message> message_log() const;
  void clear_log();
  std::uint64_t total_bytes() const;

 private:
  friend class InProcComm;

  struct Slot {
    std::vector<Eigen::VectorXd> parts;
    int provided = 0;
    int consumed = 0;
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  int ranks_;
  std::vector<std::deque<std::pair<int, Eigen::VectorXd>>> channels_;  // source * R + dest
  std::map<std::uint64_t, Slot> collectives_;
  std::vector<Message> log_;
  std::uint64_t bytes_ = 0;
  bool poisoned_ = false;
  std::string reason_;
};

/// Runs fn(rank, communicator) on one thread per rank and joins them all.
/// If any rank throws, the hub is poisoned and the first failure is rethrown
/// after every thread has stopped.
void run_ranks(InProcHub& hub, const std::function<void(int, Communicator&)>& fn);

/// Patch ownership: every patch on exactly one rank, as contiguous blocks of
/// the patch index order balanced by patch count.
struct RankPartition {
  int ranks = 1;
  std::vector<int> patch_to_rank;
  std::vector<std::vector<int>> owned_patches;  // per rank, ascending

  int rank_of_patch(int patch) const { return patch_to_rank[patch]; }
};

/// Throws ConfigError unless 1 <= ranks <= min(num_patches, kMaxRanks).
RankPartition contiguous_partition(int num_patches, int ranks);

/// One rank's dof view of one level: the dofs supported on its patches, in
/// ascending global order, plus the interface exchange plan.  A dof is shared
/// when patches of several ranks support it; each pair plan lists the shared
/// locals ordered by global id, and sharer lists are ascending, so every rank
/// sums contributions in the same order.
class RankLayout {
 public:
  RankLayout() = default;
  RankLayout(const DofMapper& mapper, const RankPartition& partition, int rank);

  Eigen::Index num_local() const { return Eigen::Index(local_to_global_.size()); }
  const std::vector<std::int32_t>& local_to_global() const { return local_to_global_; }
  std::int32_t global_to_local(std::int32_t global) const { return global_to_local_[global]; }
  /// Full global-to-local table (-1 where a dof is not on this rank).
  const std::vector<std::int32_t>& global_to_local_map() const { return global_to_local_; }

  struct Neighbor {
    int rank;
    std::vector<std::int32_t> local;  // shared with that rank, ascending global order
  };
  const std::vector<Neighbor>& neighbors() const { return neighbors_; }

  /// Shared locals ascending; sharer ranks (including this one) per entry.
  const std::vector<std::int32_t>& shared_local() const { return shared_local_; }
  const std::vector<std::vector<int>>& sharer_ranks() const { return sharer_ranks_; }

  /// First owned patch supporting each local dof: the rank-local owner used
  /// to mask shares deterministically.
  const std::vector<std::int32_t>& local_owner_patch() const { return local_owner_patch_; }

 private:
  std::vector<std::int32_t> local_to_global_;
  std::vector<std::int32_t> global_to_local_;
  std::vector<std::int32_t> local_owner_patch_;
  std::vector<std::int32_t> shared_local_;
  std::vector<std::vector<int>> sharer_ranks_;
  std::vector<Neighbor> neighbors_;
};

/// Vector in accumulated form: the rank holds the true global values of its
/// dofs; interface replicas agree bitwise across ranks.
class AccumulatedVector {
 public:
  AccumulatedVector() = default;
  explicit AccumulatedVector(Eigen::VectorXd values) : values_(std::move(values)) {}

  Eigen::Index size() const { return values_.size(); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  AccumulatedVector& operator+=(const AccumulatedVector& o) {
    values_ += o.values_;
    return *this;
  }
  AccumulatedVector& operator-=(const AccumulatedVector& o) {
    values_ -= o.values_;
    return *this;
  }
  AccumulatedVector& operator*=(double a) {
    values_ *= a;
    return *this;
  }
  friend AccumulatedVector operator+(AccumulatedVector a, const AccumulatedVector& b) {
    a += b;
    return a;
  }
  friend AccumulatedVector operator-(AccumulatedVector a, const AccumulatedVector& b) {
    a -= b;
    return a;
  }
  friend AccumulatedVector operator*(double a, AccumulatedVector v) {
    v *= a;
    return v;
  }

 private:
  Eigen::VectorXd values_;
};

/// Vector in distributed form: the mathematical global vector is the sum of
/// the per-rank contributions.  Not interchangeable with accumulated form;
/// no operation mixes the two types.
class DistributedVector {
 public:
  DistributedVector() = default;
  explicit DistributedVector(Eigen::VectorXd values) : values_(std::move(values)) {}

  Eigen::Index size() const { return values_.size(); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  DistributedVector& operator+=(const DistributedVector& o) {
    values_ += o.values_;
    return *this;
  }
  DistributedVector& operator-=(const DistributedVector& o) {
    values_ -= o.values_;
    return *this;
  }
  DistributedVector& operator*=(double a) {
    values_ *= a;
    return *this;
  }
  friend DistributedVector operator+(DistributedVector a, const DistributedVector& b) {
    a += b;
    return a;
  }
  friend DistributedVector operator-(DistributedVector a, const DistributedVector& b) {
    a -= b;
    return a;
  }
  friend DistributedVector operator*(double a, DistributedVector v) {
    v *= a;
    return v;
  }

 private:
  Eigen::VectorXd values_;
};

AccumulatedVector operator+(const AccumulatedVector&, const DistributedVector&) = delete;
AccumulatedVector operator+(const DistributedVector&, const AccumulatedVector&) = delete;
AccumulatedVector operator-(const AccumulatedVector&, const DistributedVector&) = delete;
AccumulatedVector operator-(const DistributedVector&, const AccumulatedVector&) = delete;

/// Global scalar product of one vector of each type: the distributed factor's
/// shared entries split the sum, so local dots plus one ascending-rank
/// reduction give the exact global pairing.  Same-type pairings would need an
/// accumulation first and are not provided.
double parallel_dot(Communicator& comm, const AccumulatedVector& u, const DistributedVector& v);
double parallel_dot(Communicator& comm, const DistributedVector& v, const AccumulatedVector& u);
double parallel_dot(Communicator&, const AccumulatedVector&, const AccumulatedVector&) = delete;
double parallel_dot(Communicator&, const DistributedVector&, const DistributedVector&) = delete;

/// Rank-local realization of the cycle's vector algebra over a redundantly
/// built hierarchy: every rank holds the full grid hierarchy but stores
/// vectors only on its own dofs and applies operators only on its own
/// patches.  Instantiates the same cycle and solver templates as the serial
/// backend.
class ParallelBackend {
 public:
  using AccVec = AccumulatedVector;
  using DistVec = DistributedVector;

  ParallelBackend(const Hierarchy& hierarchy, const RankPartition& partition,
                  Communicator& comm);

  const CycleParams& params() const { return h_->params(); }
  int finest_level() const { return h_->finest_level(); }
  const RankPartition& partition() const { return part_; }
  const RankLayout& layout(int level) const { return layouts_[level][rank_]; }
  Communicator& comm() const { return *comm_; }

  AccVec zero_acc(int level) const;
  DistVec zero_dist(int level) const;

  /// Owned patch blocks only; no communication.
  DistVec apply_op(int level, const AccVec& u) const;
  DistVec residual(int level, const DistVec& f, const AccVec& u) const;

  /// Neighbor exchange; shared entries summed in ascending-rank order.
  AccVec accumulate(int level, const DistVec& r) const;

  /// Type-preserving piece application on the rank's dofs.  Every piece is
  /// rank-whole, so accumulated input gives interface-consistent accumulated
  /// output (sharing ranks compute identical corrections from identical
  /// replicas), and distributed shares sum to the global correction by
  /// linearity of the piece solves.
  AccVec apply_pieces(int level, const AccVec& v) const;
  DistVec apply_pieces(int level, const DistVec& v) const;

  /// Piece solves on the local share, then one accumulation.
  AccVec smooth(int level, const DistVec& r) const;

  /// Transposed prolongation of the local share; no communication.
  DistVec restrict_residual(int level, const DistVec& r) const;

  /// u += c * P coarse on the local dofs; no communication.
  void add_prolonged(int level, const AccVec& coarse, double c, AccVec& u) const;

  /// All-gathers the distributed coarse residual into the global coarse
  /// vector, solves redundantly on every rank, keeps the local entries.
  AccVec coarse_solve(const DistVec& r) const;

  double dot(int level, const DistVec& a, const AccVec& b) const;
  void axpy_acc(double a, const AccVec& x, AccVec& y) const { y.values() += a * x.values(); }
  void axpy_dist(double a, const DistVec& x, DistVec& y) const { y.values() += a * x.values(); }
  void xpay_acc(const AccVec& z, double beta, AccVec& p) const {
    p.values() = z.values() + beta * p.values();
  }

  /// Local slice of a global vector in accumulated form.
  AccVec to_accumulated(int level, const Eigen::VectorXd& global) const;
  /// Owner-rank masked slice: summing the slices over ranks restores the
  /// global vector exactly.
  DistVec to_distributed_owner(int level, const Eigen::VectorXd& global) const;
  /// Global vector from consistent accumulated slices (one allgather).
  Eigen::VectorXd gather_global(int level, const AccVec& u) const;
  /// Global sum of distributed slices in ascending-rank order (one allgather).
  Eigen::VectorXd gather_global_sum(int level, const DistVec& v) const;

 private:
  Eigen::VectorXd apply_pieces_values(int level, const Eigen::VectorXd& v) const;

  const Hierarchy* h_;
  RankPartition part_;
  Communicator* comm_;
  int rank_;
  std::vector<std::vector<RankLayout>> layouts_;        // [level][rank]
  std::vector<std::vector<PieceSmoother>> local_pieces_;  // [level], local dof ids
  /// Exchange tags advance in lockstep on every rank; a mismatch means the
  /// ranks diverged and is reported as a transport error.
  mutable int exchange_tag_ = 0;
};

/// Iteration record of a rank-parallel solve.
struct ParallelReport {
  SolveReport solve;
  int ranks = 1;
  std::uint64_t comm_bytes = 0;
};

/// One rank's share of a preconditioned conjugate gradient solve: builds the
/// hierarchy redundantly, owner-masks the assembled right-hand side, runs the
/// cycle-preconditioned iteration, and returns the gathered global solution
/// (identical on every rank).  Works over any communicator backend.
Eigen::VectorXd parallel_solve_rank(Communicator& comm, const MultiPatchDomain& domain,
                                    const RankPartition& partition, int degree, int levels,
                                    CycleParams params,
                                    const std::function<double(const Eigen::VectorXd&)>& rhs,
                                    double tol = 1e-8, int max_iter = 500,
                                    SolveReport* report = nullptr);

/// Preconditioned conjugate gradients over R in-process ranks with a
/// contiguous patch partition.  Returns the gathered global solution.
Eigen::VectorXd parallel_pcg_solve(const MultiPatchDomain& domain, int degree, int levels,
                                   CycleParams params,
                                   const std::function<double(const Eigen::VectorXd&)>& rhs,
                                   int ranks, double tol = 1e-8, int max_iter = 500,
                                   ParallelReport* report = nullptr);

}  // namespace patchmg
