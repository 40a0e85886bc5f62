#include "patchmg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "patchmg/assembly.hpp"
#include "patchmg/transfer.hpp"

namespace patchmg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double Communicator::allreduce_sum(double local) {
  Eigen::VectorXd one(1);
  one[0] = local;
  std::vector<Eigen::VectorXd> parts = allgather(one);
  double s = parts[0][0];
  for (std::size_t r = 1; r < parts.size(); ++r) s += parts[r][0];
  return s;
}

Eigen::VectorXd Communicator::allreduce_sum(const Eigen::VectorXd& local) {
  std::vector<Eigen::VectorXd> parts = allgather(local);
  Eigen::VectorXd s = parts[0];
  for (std::size_t r = 1; r < parts.size(); ++r) s += parts[r];
  return s;
}

void LoopbackComm::send(int, int, const Eigen::VectorXd&) {
  throw TransportError("loopback: no peers to send to");
}

Eigen::VectorXd LoopbackComm::recv(int, int) {
  throw TransportError("loopback: no peers to receive from");
}

std::vector<Eigen::VectorXd> LoopbackComm::allgather(const Eigen::VectorXd& local) {
  return {local};
}

class InProcComm final : public Communicator {
 public:
  InProcComm(InProcHub* hub, int rank) : hub_(hub), rank_(rank) {}

  int rank() const override { return rank_; }
  int size() const override { return hub_->ranks(); }

  void send(int dest, int tag, const Eigen::VectorXd& data) override {
    if (dest < 0 || dest >= size() || dest == rank_)
      throw TransportError("send: destination is not a peer");
    std::lock_guard<std::mutex> lock(hub_->mu_);
    if (hub_->poisoned_) throw TransportError(hub_->reason_);
    hub_->channels_[std::size_t(rank_) * std::size_t(size()) + std::size_t(dest)].emplace_back(
        tag, data);
    hub_->log_.push_back({rank_, dest, tag, data.size()});
    const std::uint64_t bytes = std::uint64_t(data.size()) * 8;
    hub_->bytes_ += bytes;
    bytes_ += bytes;
    hub_->cv_.notify_all();
  }

  Eigen::VectorXd recv(int source, int tag) override {
    if (source < 0 || source >= size() || source == rank_)
      throw TransportError("recv: source is not a peer");
    std::unique_lock<std::mutex> lock(hub_->mu_);
    auto& queue =
        hub_->channels_[std::size_t(source) * std::size_t(size()) + std::size_t(rank_)];
    hub_->cv_.wait(lock, [&] { return hub_->poisoned_ || !queue.empty(); });
    if (hub_->poisoned_) throw TransportError(hub_->reason_);
    if (queue.front().first != tag) {
      hub_->poisoned_ = true;
      hub_->reason_ = "recv: tag mismatch on ordered channel";
      hub_->cv_.notify_all();
      throw TransportError(hub_->reason_);
    }
    Eigen::VectorXd out = std::move(queue.front().second);
    queue.pop_front();
    return out;
  }

  std::vector<Eigen::VectorXd> allgather(const Eigen::VectorXd& local) override {
    const std::uint64_t seq = next_collective_++;
    std::unique_lock<std::mutex> lock(hub_->mu_);
    if (hub_->poisoned_) throw TransportError(hub_->reason_);
    InProcHub::Slot& slot = hub_->collectives_[seq];
    if (slot.parts.empty()) slot.parts.resize(std::size_t(size()));
    slot.parts[std::size_t(rank_)] = local;
    slot.provided++;
    const std::uint64_t bytes = std::uint64_t(local.size()) * 8 * std::uint64_t(size() - 1);
    hub_->bytes_ += bytes;
    bytes_ += bytes;
    hub_->cv_.notify_all();
    hub_->cv_.wait(lock, [&] { return hub_->poisoned_ || slot.provided == size(); });
    if (hub_->poisoned_) throw TransportError(hub_->reason_);
    std::vector<Eigen::VectorXd> out = slot.parts;
    slot.consumed++;
    if (slot.consumed == size()) hub_->collectives_.erase(seq);
    return out;
  }

  std::uint64_t bytes_sent() const override { return bytes_; }

 private:
  InProcHub* hub_;
  int rank_;
  std::uint64_t next_collective_ = 0;
  std::uint64_t bytes_ = 0;
};

InProcHub::InProcHub(int ranks) : ranks_(ranks) {
  if (ranks < 1) throw ConfigError("hub: need at least one rank");
  if (ranks > kMaxRanks) throw ConfigError("hub: rank cap exceeded");
  channels_.resize(std::size_t(ranks) * std::size_t(ranks));
}

std::unique_ptr<Communicator> InProcHub::communicator(int rank) {
  if (rank < 0 || rank >= ranks_) throw ConfigError("hub: rank out of range");
  return std::make_unique<InProcComm>(this, rank);
}

bool InProcHub::poison(const std::string& reason) {
  std::lock_guard<std::mutex> lock(mu_);
  if (poisoned_) return false;
  poisoned_ = true;
  reason_ = reason;
  cv_.notify_all();
  return true;
}

std::vector<InProcHub::Message> InProcHub::message_log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

void InProcHub::clear_log() {
  std::lock_guard<std::mutex> lock(mu_);
  log_.clear();
}

std::uint64_t InProcHub::total_bytes() const {
  std::lock_guard<std::mutex> lock(mu_);
  return bytes_;
}

void run_ranks(InProcHub& hub, const std::function<void(int, Communicator&)>& fn) {
  const int ranks = hub.ranks();
  std::vector<std::exception_ptr> errors;
  errors.resize(std::size_t(ranks));
  std::atomic<int> primary{-1};
  std::vector<std::thread> threads;
  threads.reserve(std::size_t(ranks));
  for (int r = 0; r < ranks; ++r) {
    threads.emplace_back([&, r] {
      std::unique_ptr<Communicator> comm = hub.communicator(r);
      try {
        fn(r, *comm);
      } catch (...) {
        errors[std::size_t(r)] = std::current_exception();
        if (hub.poison("peer rank failed")) {
          int expected = -1;
          primary.compare_exchange_strong(expected, r);
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  const int first = primary.load();
  if (first >= 0 && errors[std::size_t(first)]) std::rethrow_exception(errors[std::size_t(first)]);
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

RankPartition contiguous_partition(int num_patches, int ranks) {
  if (ranks < 1) throw ConfigError("partition: need at least one rank");
  if (ranks > kMaxRanks) throw ConfigError("partition: rank cap exceeded");
  if (ranks > num_patches) throw ConfigError("partition: more ranks than patches");
  RankPartition part;
  part.ranks = ranks;
  part.patch_to_rank.resize(std::size_t(num_patches));
  part.owned_patches.resize(std::size_t(ranks));
  for (int r = 0; r < ranks; ++r) {
    const int lo = int(std::int64_t(num_patches) * r / ranks);
    const int hi = int(std::int64_t(num_patches) * (r + 1) / ranks);
    for (int k = lo; k < hi; ++k) {
      part.patch_to_rank[std::size_t(k)] = r;
      part.owned_patches[std::size_t(r)].push_back(k);
    }
  }
  return part;
}

RankLayout::RankLayout(const DofMapper& mapper, const RankPartition& partition, int rank) {
  const std::int64_t n = mapper.num_dofs();
  global_to_local_.assign(std::size_t(n), -1);
  std::vector<char> mine(std::size_t(n), 0);
  for (int k : partition.owned_patches[std::size_t(rank)])
    for (std::int32_t g : mapper.local_to_global(k))
      if (g >= 0) mine[std::size_t(g)] = 1;
  for (std::int64_t g = 0; g < n; ++g)
    if (mine[std::size_t(g)]) {
      global_to_local_[std::size_t(g)] = std::int32_t(local_to_global_.size());
      local_to_global_.push_back(std::int32_t(g));
    }

  local_owner_patch_.resize(local_to_global_.size());
  std::vector<std::vector<std::int32_t>> plan(std::size_t(partition.ranks));
  for (std::size_t i = 0; i < local_to_global_.size(); ++i) {
    const std::int32_t g = local_to_global_[i];
    std::int32_t owned_owner = -1;
    std::vector<int> sharers;
    for (const auto& [patch, local] : mapper.reps(g)) {
      (void)local;
      const int r = partition.patch_to_rank[std::size_t(patch)];
      if (owned_owner < 0 && r == rank) owned_owner = patch;
      sharers.push_back(r);
    }
    std::sort(sharers.begin(), sharers.end());
    sharers.erase(std::unique(sharers.begin(), sharers.end()), sharers.end());
    local_owner_patch_[i] = owned_owner;
    if (sharers.size() > 1) {
      shared_local_.push_back(std::int32_t(i));
      sharer_ranks_.push_back(sharers);
      for (int r : sharers)
        if (r != rank) plan[std::size_t(r)].push_back(std::int32_t(i));
    }
  }
  for (int r = 0; r < partition.ranks; ++r)
    if (!plan[std::size_t(r)].empty()) neighbors_.push_back({r, std::move(plan[std::size_t(r)])});
}

double parallel_dot(Communicator& comm, const AccumulatedVector& u, const DistributedVector& v) {
  return comm.allreduce_sum(u.values().dot(v.values()));
}

double parallel_dot(Communicator& comm, const DistributedVector& v, const AccumulatedVector& u) {
  return comm.allreduce_sum(v.values().dot(u.values()));
}

ParallelBackend::ParallelBackend(const Hierarchy& hierarchy, const RankPartition& partition,
                                 Communicator& comm)
    : h_(&hierarchy), part_(partition), comm_(&comm), rank_(comm.rank()) {
  if (part_.ranks != comm.size())
    throw ConfigError("backend: partition and communicator disagree on rank count");
  const int levels = h_->num_levels();
  layouts_.resize(std::size_t(levels));
  local_pieces_.resize(std::size_t(levels));
  for (int l = 0; l < levels; ++l) {
    layouts_[std::size_t(l)].reserve(std::size_t(part_.ranks));
    for (int r = 0; r < part_.ranks; ++r)
      layouts_[std::size_t(l)].emplace_back(h_->mapper(l), part_, r);

    const RankLayout& lay = layouts_[std::size_t(l)][std::size_t(rank_)];
    for (const PieceSmoother& ps : h_->smoother(l).pieces()) {
      std::size_t here = 0;
      for (std::int32_t g : ps.piece().dofs)
        if (lay.global_to_local(g) >= 0) here++;
      if (here == 0) continue;
      if (here != ps.piece().dofs.size())
        throw DomainError("backend: a smoother piece straddles the rank boundary");
      local_pieces_[std::size_t(l)].push_back(ps.reindexed(lay.global_to_local_map()));
    }
  }
}

AccumulatedVector ParallelBackend::zero_acc(int level) const {
  return AccumulatedVector(Eigen::VectorXd::Zero(layout(level).num_local()));
}

DistributedVector ParallelBackend::zero_dist(int level) const {
  return DistributedVector(Eigen::VectorXd::Zero(layout(level).num_local()));
}

DistributedVector ParallelBackend::apply_op(int level, const AccVec& u) const {
  const RankLayout& lay = layout(level);
  const DofMapper& mapper = h_->mapper(level);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.num_local());
  std::vector<double> xl, yl;
  for (int k : part_.owned_patches[std::size_t(rank_)]) {
    const auto& l2g = mapper.local_to_global(k);
    const PatchOperator& blk = h_->op(level).block(k);
    xl.assign(std::size_t(blk.rows), 0.0);
    yl.assign(std::size_t(blk.rows), 0.0);
    for (std::int64_t f = 0; f < blk.rows; ++f)
      if (l2g[std::size_t(f)] >= 0)
        xl[std::size_t(f)] = u.values()[lay.global_to_local(l2g[std::size_t(f)])];
    blk.apply_add(xl.data(), yl.data());
    for (std::int64_t f = 0; f < blk.rows; ++f)
      if (l2g[std::size_t(f)] >= 0)
        out[lay.global_to_local(l2g[std::size_t(f)])] += yl[std::size_t(f)];
  }
  return DistributedVector(std::move(out));
}

DistributedVector ParallelBackend::residual(int level, const DistVec& f, const AccVec& u) const {
  return DistributedVector(f.values() - apply_op(level, u).values());
}

AccumulatedVector ParallelBackend::accumulate(int level, const DistVec& r) const {
  const RankLayout& lay = layout(level);
  const int tag = exchange_tag_++;
  Eigen::VectorXd out = r.values();
  for (const RankLayout::Neighbor& nb : lay.neighbors()) {
    Eigen::VectorXd buf(Eigen::Index(nb.local.size()));
    for (std::size_t i = 0; i < nb.local.size(); ++i)
      buf[Eigen::Index(i)] = r.values()[nb.local[i]];
    comm_->send(nb.rank, tag, buf);
  }
  std::vector<Eigen::VectorXd> in(lay.neighbors().size());
  std::vector<int> index_of_rank(std::size_t(part_.ranks), -1);
  for (std::size_t j = 0; j < lay.neighbors().size(); ++j) {
    in[j] = comm_->recv(lay.neighbors()[j].rank, tag);
    index_of_rank[std::size_t(lay.neighbors()[j].rank)] = int(j);
  }
  std::vector<Eigen::Index> cursor(lay.neighbors().size(), 0);
  for (std::size_t s = 0; s < lay.shared_local().size(); ++s) {
    const std::int32_t li = lay.shared_local()[s];
    double sum = 0.0;
    for (int rr : lay.sharer_ranks()[s]) {
      if (rr == rank_) {
        sum += r.values()[li];
      } else {
        const int j = index_of_rank[std::size_t(rr)];
        sum += in[std::size_t(j)][cursor[std::size_t(j)]++];
      }
    }
    out[li] = sum;
  }
  return AccumulatedVector(std::move(out));
}

Eigen::VectorXd ParallelBackend::apply_pieces_values(int level, const Eigen::VectorXd& v) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(layout(level).num_local());
  for (const PieceSmoother& ps : local_pieces_[std::size_t(level)]) ps.apply_add(v, z);
  return z;
}

AccumulatedVector ParallelBackend::apply_pieces(int level, const AccVec& v) const {
  return AccumulatedVector(apply_pieces_values(level, v.values()));
}

DistributedVector ParallelBackend::apply_pieces(int level, const DistVec& v) const {
  return DistributedVector(apply_pieces_values(level, v.values()));
}

AccumulatedVector ParallelBackend::smooth(int level, const DistVec& r) const {
  return accumulate(level, apply_pieces(level, r));
}

DistributedVector ParallelBackend::restrict_residual(int level, const DistVec& r) const {
  const RankLayout& lay_f = layout(level);
  const RankLayout& lay_c = layout(level - 1);
  const TransferOperator& transfer = h_->transfer(level);
  const DofMapper& fine = h_->mapper(level);
  const DofMapper& coarse = h_->mapper(level - 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay_c.num_local());
  Eigen::VectorXd share, cshare;
  for (int k : part_.owned_patches[std::size_t(rank_)]) {
    const auto& l2g_f = fine.local_to_global(k);
    share.setZero(Eigen::Index(l2g_f.size()));
    for (std::size_t f = 0; f < l2g_f.size(); ++f) {
      const std::int32_t g = l2g_f[f];
      if (g < 0) continue;
      const std::int32_t li = lay_f.global_to_local(g);
      if (lay_f.local_owner_patch()[std::size_t(li)] == k) share[Eigen::Index(f)] = r.values()[li];
    }
    transfer.restrict_patch(k, share, cshare);
    const auto& l2g_c = coarse.local_to_global(k);
    for (std::size_t c = 0; c < l2g_c.size(); ++c) {
      const std::int32_t g = l2g_c[c];
      if (g >= 0) out[lay_c.global_to_local(g)] += cshare[Eigen::Index(c)];
    }
  }
  return DistributedVector(std::move(out));
}

void ParallelBackend::add_prolonged(int level, const AccVec& coarse_vec, double c,
                                    AccVec& u) const {
  const RankLayout& lay_f = layout(level);
  const RankLayout& lay_c = layout(level - 1);
  const TransferOperator& transfer = h_->transfer(level);
  const DofMapper& fine = h_->mapper(level);
  const DofMapper& coarse = h_->mapper(level - 1);

  Eigen::VectorXd scratch = Eigen::VectorXd::Zero(coarse.num_dofs());
  for (Eigen::Index i = 0; i < lay_c.num_local(); ++i)
    scratch[lay_c.local_to_global()[std::size_t(i)]] = coarse_vec.values()[i];

  Eigen::VectorXd pu = Eigen::VectorXd::Zero(lay_f.num_local());
  Eigen::VectorXd lattice;
  for (int k : part_.owned_patches[std::size_t(rank_)]) {
    transfer.prolong_patch(k, scratch, lattice);
    const auto& l2g = fine.local_to_global(k);
    for (std::size_t f = 0; f < l2g.size(); ++f) {
      const std::int32_t g = l2g[f];
      if (g < 0) continue;
      const std::int32_t li = lay_f.global_to_local(g);
      if (lay_f.local_owner_patch()[std::size_t(li)] == k) pu[li] = lattice[Eigen::Index(f)];
    }
  }
  u.values() += c * pu;
}

AccumulatedVector ParallelBackend::coarse_solve(const DistVec& r) const {
  const RankLayout& lay = layouts_[0][std::size_t(rank_)];
  Eigen::VectorXd scattered = Eigen::VectorXd::Zero(h_->mapper(0).num_dofs());
  for (Eigen::Index i = 0; i < lay.num_local(); ++i)
    scattered[lay.local_to_global()[std::size_t(i)]] = r.values()[i];
  Eigen::VectorXd global = comm_->allreduce_sum(scattered);
  Eigen::VectorXd solution = h_->coarse_solve(global);
  Eigen::VectorXd out(lay.num_local());
  for (Eigen::Index i = 0; i < lay.num_local(); ++i)
    out[i] = solution[lay.local_to_global()[std::size_t(i)]];
  return AccumulatedVector(std::move(out));
}

double ParallelBackend::dot(int, const DistVec& a, const AccVec& b) const {
  return comm_->allreduce_sum(a.values().dot(b.values()));
}

AccumulatedVector ParallelBackend::to_accumulated(int level, const Eigen::VectorXd& global) const {
  const RankLayout& lay = layout(level);
  Eigen::VectorXd out(lay.num_local());
  for (Eigen::Index i = 0; i < lay.num_local(); ++i)
    out[i] = global[lay.local_to_global()[std::size_t(i)]];
  return AccumulatedVector(std::move(out));
}

DistributedVector ParallelBackend::to_distributed_owner(int level,
                                                        const Eigen::VectorXd& global) const {
  const RankLayout& lay = layout(level);
  const DofMapper& mapper = h_->mapper(level);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.num_local());
  for (Eigen::Index i = 0; i < lay.num_local(); ++i) {
    const std::int32_t g = lay.local_to_global()[std::size_t(i)];
    if (part_.rank_of_patch(mapper.owner_patch(g)) == rank_) out[i] = global[g];
  }
  return DistributedVector(std::move(out));
}

Eigen::VectorXd ParallelBackend::gather_global(int level, const AccVec& u) const {
  std::vector<Eigen::VectorXd> parts = comm_->allgather(u.values());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(h_->mapper(level).num_dofs());
  for (int r = 0; r < part_.ranks; ++r) {
    const RankLayout& lay = layouts_[std::size_t(level)][std::size_t(r)];
    for (Eigen::Index i = 0; i < lay.num_local(); ++i)
      out[lay.local_to_global()[std::size_t(i)]] = parts[std::size_t(r)][i];
  }
  return out;
}

Eigen::VectorXd ParallelBackend::gather_global_sum(int level, const DistVec& v) const {
  std::vector<Eigen::VectorXd> parts = comm_->allgather(v.values());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(h_->mapper(level).num_dofs());
  for (int r = 0; r < part_.ranks; ++r) {
    const RankLayout& lay = layouts_[std::size_t(level)][std::size_t(r)];
    for (Eigen::Index i = 0; i < lay.num_local(); ++i)
      out[lay.local_to_global()[std::size_t(i)]] += parts[std::size_t(r)][i];
  }
  return out;
}

Eigen::VectorXd parallel_solve_rank(Communicator& comm, const MultiPatchDomain& domain,
                                    const RankPartition& partition, int degree, int levels,
                                    CycleParams params,
                                    const std::function<double(const Eigen::VectorXd&)>& rhs,
                                    double tol, int max_iter, SolveReport* report) {
  Hierarchy h(domain, degree, levels, params);
  ParallelBackend b(h, partition, comm);
  const int L = h.finest_level();
  Eigen::VectorXd f_global = assemble_rhs(h.mapper(L), rhs);
  DistributedVector f = b.to_distributed_owner(L, f_global);
  std::vector<double> history;
  auto t0 = std::chrono::steady_clock::now();
  AccumulatedVector u = pcg_generic(
      b, f, tol, max_iter,
      [&](const DistributedVector& res) { return mg_precondition(b, res); }, history);
  const double t_solve = seconds_since(t0);
  Eigen::VectorXd gathered = b.gather_global(L, u);
  if (report) {
    report->iterations = int(history.size()) - 1;
    report->residual_history = std::move(history);
    report->t_setup = h.setup_seconds();
    report->t_assemble = h.assemble_seconds();
    report->t_solve = t_solve;
  }
  return gathered;
}

Eigen::VectorXd parallel_pcg_solve(const MultiPatchDomain& domain, int degree, int levels,
                                   CycleParams params,
                                   const std::function<double(const Eigen::VectorXd&)>& rhs,
                                   int ranks, double tol, int max_iter, ParallelReport* report) {
  const RankPartition partition = contiguous_partition(domain.num_patches(), ranks);
  InProcHub hub(ranks);
  Eigen::VectorXd u_global;
  ParallelReport rep;
  rep.ranks = ranks;
  run_ranks(hub, [&](int r, Communicator& comm) {
    SolveReport sr;
    Eigen::VectorXd gathered = parallel_solve_rank(comm, domain, partition, degree, levels,
                                                   params, rhs, tol, max_iter, &sr);
    if (r == 0) {
      u_global = std::move(gathered);
      rep.solve = std::move(sr);
    }
  });
  rep.comm_bytes = hub.total_bytes();
  if (report) *report = rep;
  return u_global;
}

}  // namespace patchmg
