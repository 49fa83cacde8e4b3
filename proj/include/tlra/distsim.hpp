#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tlra/fro_lra.hpp"
#include "tlra/streaming.hpp"

namespace tlra {

/// A protocol message. Data words are the entries of `blocks`; a seed
/// message carries one root seed but is charged the words of the hash
/// coefficients it stands for.
struct Message {
  std::string phase;
  std::vector<Matrix> blocks;
  std::uint64_t seed = 0;
  std::size_t words = 0;

  static Message data(std::string phase, std::vector<Matrix> blocks);
  static Message seeds(std::uint64_t seed, std::size_t charged_words);
};

struct LedgerEntry {
  std::string phase;
  int machine = 0;
  bool uplink = false;  // machine -> coordinator
  std::size_t words = 0;
};

/// Word counts of every delivered message; a word is 64 bits.
class CommLedger {
 public:
  void record(const std::string& phase, int machine, bool uplink, std::size_t words);
  std::size_t total() const;
  std::map<std::string, std::size_t> by_phase() const;
  /// Words on the link to `machine` in one direction.
  std::size_t link(int machine, bool uplink) const;
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::string to_json(int indent = 2) const;

 private:
  std::vector<LedgerEntry> entries_;
};

/// One machine of the protocol. Its state is reachable only through handle().
class Machine {
 public:
  Machine(Tensor3 local, const AlgoParams& resolved);
  /// Processes one message; returns the reply, if any.
  std::optional<Message> handle(const Message& in);

 private:
  Tensor3 local_;
  AlgoParams params_;
  std::optional<PipelineSketches> sketches_;
  std::array<Matrix, 3> v_;
  FactorTriple share_;
};

/// Transport between the coordinator and the machines: every delivered
/// message passes through exchange() and is recorded in the ledger.
class Network {
 public:
  explicit Network(std::vector<Machine> machines) : machines_(std::move(machines)) {}
  int machines() const { return static_cast<int>(machines_.size()); }
  std::optional<Message> exchange(int machine, const Message& msg);
  const CommLedger& ledger() const { return ledger_; }

 private:
  std::vector<Machine> machines_;
  CommLedger ledger_;
};

struct DistOptions {
  StreamMode mode = StreamMode::rank_k;
  /// Leave factor shares on the machines instead of uploading them.
  bool skip_upload = false;
};

struct DistResult {
  /// Empty (rank 0) when the upload was skipped.
  FactorTriple factors;
  std::optional<TuckerForm> tucker;
  CommLedger ledger;
};

/// Runs the protocol on A = sum of partitions with trial-0 sketches of the root seed.
/// Throws ShapeError on mismatched dims, InvalidParams on an empty list.
DistResult distsim_run(const std::vector<Tensor3>& partitions, const AlgoParams& params, std::uint64_t seed,
                       const DistOptions& opts = {});

/// Exact ledger total the protocol produces for these shapes.
std::size_t protocol_words(Dims dims, const AlgoParams& resolved, int machines, const DistOptions& opts = {});
/// Hash-coefficient words charged for the seed broadcast: w1 + w2.
std::size_t seed_message_words(const AlgoParams& resolved);

/// Sends each nonzero of `a` to a random machine. With `split_values` each
/// value is instead spread over all machines as random shares summing to it.
std::vector<Tensor3> random_partition(const Tensor3& a, int machines, std::uint64_t seed, bool split_values = false);

}  // namespace tlra
