#pragma once

#include "patchmg/parallel.hpp"

#ifdef PATCHMG_WITH_MPI

#include <mpi.h>

namespace patchmg {

/// Communicator over a real message-passing world, one OS process per rank.
/// Keeps the same contracts as the in-process hub: per-channel ordered
/// delivery with a hard error on a tag mismatch, and collectives reduced in
/// ascending-rank order, so residual histories are interchangeable with the
/// in-process backend at equal rank counts, bit for bit.
///
/// Sends are posted nonblocking on an internally owned copy, so the
/// send-all-then-receive pattern of the interface exchange cannot stall on
/// rendezvous no matter the message size.
class MpiComm final : public Communicator {
 public:
  explicit MpiComm(MPI_Comm comm = MPI_COMM_WORLD);
  ~MpiComm() override;

  MpiComm(const MpiComm&) = delete;
  MpiComm& operator=(const MpiComm&) = delete;

  int rank() const override { return rank_; }
  int size() const override { return size_; }
  void send(int dest, int tag, const Eigen::VectorXd& data) override;
  Eigen::VectorXd recv(int source, int tag) override;
  std::vector<Eigen::VectorXd> allgather(const Eigen::VectorXd& local) override;
  std::uint64_t bytes_sent() const override { return bytes_; }

 private:
  void reap_completed_sends();

  struct PendingSend {
    MPI_Request request;
    std::unique_ptr<Eigen::VectorXd> buffer;
  };

  MPI_Comm comm_;
  int rank_ = 0;
  int size_ = 1;
  std::uint64_t bytes_ = 0;
  std::vector<PendingSend> pending_;
};

}  // namespace patchmg

#endif  // PATCHMG_WITH_MPI
