#include "patchmg/mpi_comm.hpp"

#ifdef PATCHMG_WITH_MPI

#include "patchmg/errors.hpp"

namespace patchmg {

MpiComm::MpiComm(MPI_Comm comm) : comm_(comm) {
  int initialized = 0;
  MPI_Initialized(&initialized);
  if (!initialized) throw ConfigError("mpi: runtime not initialized");
  MPI_Comm_rank(comm_, &rank_);
  MPI_Comm_size(comm_, &size_);
  if (size_ > kMaxRanks) throw ConfigError("mpi: rank cap exceeded");
}

MpiComm::~MpiComm() {
  for (PendingSend& p : pending_) MPI_Wait(&p.request, MPI_STATUS_IGNORE);
}

void MpiComm::reap_completed_sends() {
  std::size_t keep = 0;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    int done = 0;
    MPI_Test(&pending_[i].request, &done, MPI_STATUS_IGNORE);
    if (!done) pending_[keep++] = std::move(pending_[i]);
  }
  pending_.resize(keep);
}

void MpiComm::send(int dest, int tag, const Eigen::VectorXd& data) {
  if (dest < 0 || dest >= size_ || dest == rank_)
    throw TransportError("send: destination is not a peer");
  reap_completed_sends();
  auto buffer = std::make_unique<Eigen::VectorXd>(data);
  static double dummy = 0.0;
  const double* ptr = buffer->size() > 0 ? buffer->data() : &dummy;
  MPI_Request request;
  if (MPI_Isend(ptr, int(buffer->size()), MPI_DOUBLE, dest, tag, comm_, &request) != MPI_SUCCESS)
    throw TransportError("send: message passing failed");
  bytes_ += std::uint64_t(data.size()) * 8;
  pending_.push_back({request, std::move(buffer)});
}

Eigen::VectorXd MpiComm::recv(int source, int tag) {
  if (source < 0 || source >= size_ || source == rank_)
    throw TransportError("recv: source is not a peer");
  MPI_Status status;
  if (MPI_Probe(source, MPI_ANY_TAG, comm_, &status) != MPI_SUCCESS)
    throw TransportError("recv: probe failed");
  // pairwise delivery is non-overtaking, so the head of the channel must
  // carry the expected tag or the ranks have diverged
  if (status.MPI_TAG != tag) throw TransportError("recv: tag mismatch on ordered channel");
  int len = 0;
  MPI_Get_count(&status, MPI_DOUBLE, &len);
  Eigen::VectorXd out(len);
  static double dummy = 0.0;
  double* ptr = len > 0 ? out.data() : &dummy;
  if (MPI_Recv(ptr, len, MPI_DOUBLE, source, tag, comm_, MPI_STATUS_IGNORE) != MPI_SUCCESS)
    throw TransportError("recv: message passing failed");
  return out;
}

std::vector<Eigen::VectorXd> MpiComm::allgather(const Eigen::VectorXd& local) {
  reap_completed_sends();
  const int n = int(local.size());
  std::vector<int> lens(std::size_t(size_), 0);
  if (MPI_Allgather(&n, 1, MPI_INT, lens.data(), 1, MPI_INT, comm_) != MPI_SUCCESS)
    throw TransportError("allgather: length exchange failed");
  std::vector<int> offsets(std::size_t(size_) + 1, 0);
  for (int r = 0; r < size_; ++r)
    offsets[std::size_t(r) + 1] = offsets[std::size_t(r)] + lens[std::size_t(r)];
  Eigen::VectorXd flat(offsets[std::size_t(size_)]);
  static double dummy = 0.0;
  const double* src = n > 0 ? local.data() : &dummy;
  double* dst = flat.size() > 0 ? flat.data() : &dummy;
  if (MPI_Allgatherv(src, n, MPI_DOUBLE, dst, lens.data(), offsets.data(), MPI_DOUBLE, comm_) !=
      MPI_SUCCESS)
    throw TransportError("allgather: payload exchange failed");
  std::vector<Eigen::VectorXd> parts;
  parts.resize(std::size_t(size_));
  for (int r = 0; r < size_; ++r)
    parts[std::size_t(r)] = flat.segment(offsets[std::size_t(r)], lens[std::size_t(r)]);
  bytes_ += std::uint64_t(n) * 8 * std::uint64_t(size_ - 1);
  return parts;
}

}  // namespace patchmg

#endif  // PATCHMG_WITH_MPI
