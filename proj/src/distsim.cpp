#include "tlra/distsim.hpp"

#include <json.hpp>

#include "tlra/random.hpp"

namespace tlra {

namespace {

constexpr const char* kSeedPhase = "seeds";
constexpr const char* kSketchPhase = "sketch_upload";
constexpr const char* kSolutionPhase = "solution";
constexpr const char* kFactorPhase = "factor_upload";

Matrix as_row(const Tensor3& t) {
  return Eigen::Map<const Matrix>(t.values().data(), 1, static_cast<Index>(t.values().size()));
}

Tensor3 from_row(Dims d, const Matrix& row) {
  return Tensor3::from_dense(d, std::vector<double>(row.data(), row.data() + row.size()));
}

}  // namespace

Message Message::data(std::string phase, std::vector<Matrix> blocks) {
  Message m;
  m.phase = std::move(phase);
  for (const Matrix& b : blocks) m.words += static_cast<std::size_t>(b.size());
  m.blocks = std::move(blocks);
  return m;
}

Message Message::seeds(std::uint64_t seed, std::size_t charged_words) {
  Message m;
  m.phase = kSeedPhase;
  m.seed = seed;
  m.words = charged_words;
  return m;
}

// ---------------------------------------------------------------- ledger

void CommLedger::record(const std::string& phase, int machine, bool uplink, std::size_t words) {
  entries_.push_back({phase, machine, uplink, words});
}

std::size_t CommLedger::total() const {
  std::size_t s = 0;
  for (const LedgerEntry& e : entries_) s += e.words;
  return s;
}

std::map<std::string, std::size_t> CommLedger::by_phase() const {
  std::map<std::string, std::size_t> out;
  for (const LedgerEntry& e : entries_) out[e.phase] += e.words;
  return out;
}

std::size_t CommLedger::link(int machine, bool uplink) const {
  std::size_t s = 0;
  for (const LedgerEntry& e : entries_)
    if (e.machine == machine && e.uplink == uplink) s += e.words;
  return s;
}

std::string CommLedger::to_json(int indent) const {
  nlohmann::json j;
  j["word_bits"] = 64;
  j["total_words"] = total();
  j["phases"] = by_phase();
  int machines = 0;
  for (const LedgerEntry& e : entries_) machines = std::max(machines, e.machine + 1);
  j["links"] = nlohmann::json::array();
  for (int m = 0; m < machines; ++m) j["links"].push_back({{"machine", m}, {"up", link(m, true)}, {"down", link(m, false)}});
  j["messages"] = nlohmann::json::array();
  for (const LedgerEntry& e : entries_)
    j["messages"].push_back({{"phase", e.phase}, {"machine", e.machine}, {"direction", e.uplink ? "up" : "down"}, {"words", e.words}});
  return j.dump(indent);
}

// ---------------------------------------------------------------- machine

Machine::Machine(Tensor3 local, const AlgoParams& resolved) : local_(std::move(local)), params_(resolved) {}

std::optional<Message> Machine::handle(const Message& in) {
  if (in.phase == kSeedPhase) {
    sketches_ = make_pipeline_sketches(local_.dims(), params_, trial_seed(in.seed, 0));
    for (std::size_t m = 0; m < 3; ++m)
      v_[m] = sketch_flattening(local_, static_cast<int>(m) + 1, SketchOp(sketches_->S[m]));
    ReducedProblem rp = reduce_problem(local_, v_, sketches_->T);
    return Message::data(kSketchPhase, {rp.Y[0], rp.Y[1], rp.Y[2], as_row(rp.C)});
  }
  if (!sketches_) throw InvalidParams("machine received '" + in.phase + "' before the seeds");
  if (in.phase == kSolutionPhase) {
    // Rank-k: local shares V_i X_i. Bicriteria: no solution is broadcast, the
    // coordinator asks for the V_i themselves (empty block list).
    if (in.blocks.empty()) {
      share_ = {v_[0], v_[1], v_[2]};
    } else {
      if (in.blocks.size() != 3) throw ShapeError("solution message must carry three blocks");
      share_ = expand_rank_k(v_, {in.blocks[0], in.blocks[1], in.blocks[2]});
    }
    return std::nullopt;
  }
  if (in.phase == kFactorPhase) return Message::data(kFactorPhase, {share_.U, share_.V, share_.W});
  throw InvalidParams("machine received unknown phase '" + in.phase + "'");
}

std::optional<Message> Network::exchange(int machine, const Message& msg) {
  Machine& m = machines_.at(static_cast<std::size_t>(machine));
  ledger_.record(msg.phase, machine, false, msg.words);
  std::optional<Message> reply = m.handle(msg);
  if (reply) ledger_.record(reply->phase, machine, true, reply->words);
  return reply;
}

// ---------------------------------------------------------------- coordinator

std::size_t seed_message_words(const AlgoParams& p) { return static_cast<std::size_t>(p.w1 + p.w2); }

DistResult distsim_run(const std::vector<Tensor3>& partitions, const AlgoParams& params, std::uint64_t seed,
                       const DistOptions& opts) {
  if (partitions.empty()) throw InvalidParams("distsim needs at least one partition");
  AlgoParams p = params.resolved();
  p.seed = seed;
  Dims d = partitions.front().dims();
  std::vector<Machine> machines;
  for (const Tensor3& part : partitions) {
    if (!(part.dims() == d)) throw ShapeError("partitions have different dimensions");
    machines.emplace_back(part, p);
  }
  Network net(std::move(machines));
  const int s = net.machines();

  // Round 1: seeds down, sketches up, summed by the coordinator.
  PipelineSketches shapes = make_pipeline_sketches(d, p, trial_seed(seed, 0));
  Dims cd{shapes.T[0].output_dim, shapes.T[1].output_dim, shapes.T[2].output_dim};
  ReducedProblem rp;
  Matrix csum;
  for (int m = 0; m < s; ++m) {
    std::optional<Message> up = net.exchange(m, Message::seeds(seed, seed_message_words(p)));
    if (!up || up->blocks.size() != 4) throw NumericalError("machine returned a malformed sketch message");
    for (std::size_t i = 0; i < 3; ++i) rp.Y[i] = m == 0 ? up->blocks[i] : Matrix(rp.Y[i] + up->blocks[i]);
    csum = m == 0 ? up->blocks[3] : Matrix(csum + up->blocks[3]);
  }
  rp.C = from_row(cd, csum);

  // Round 2: solve and broadcast.
  DistResult out;
  Message solution = Message::data(kSolutionPhase, {});
  bool rank_k = opts.mode == StreamMode::rank_k;
  if (rank_k) {
    std::array<Matrix, 3> x;
    if (p.k == 0) {
      for (std::size_t i = 0; i < 3; ++i) x[i] = Matrix::Zero(rp.Y[i].cols(), 0);
    } else {
      x = rank_k_for_trial(rp, p, trial_seed(seed, 0)).X;
    }
    solution = Message::data(kSolutionPhase, {x[0], x[1], x[2]});
  }
  for (int m = 0; m < s; ++m) net.exchange(m, solution);

  // Round 3: factor shares up.
  if (!opts.skip_upload) {
    FactorTriple sum;
    for (int m = 0; m < s; ++m) {
      std::optional<Message> up = net.exchange(m, Message::data(kFactorPhase, {}));
      if (!up || up->blocks.size() != 3) throw NumericalError("machine returned a malformed factor message");
      if (m == 0) {
        sum = {up->blocks[0], up->blocks[1], up->blocks[2]};
      } else {
        sum.U += up->blocks[0];
        sum.V += up->blocks[1];
        sum.W += up->blocks[2];
      }
    }
    if (rank_k) {
      out.factors = std::move(sum);
    } else {
      out.tucker = cubic_from_reduced({sum.U, sum.V, sum.W}, rp);
      out.factors = out.tucker->compress();
    }
  } else {
    out.factors = FactorTriple::zeros(d, 0);
  }
  out.ledger = net.ledger();
  return out;
}

std::size_t protocol_words(Dims d, const AlgoParams& p, int machines, const DistOptions& opts) {
  PipelineSketches sh = make_pipeline_sketches(d, p, 0);
  std::size_t up = 1, per = seed_message_words(p);
  for (std::size_t m = 0; m < 3; ++m) {
    auto t = static_cast<std::size_t>(sh.T[m].output_dim), s = static_cast<std::size_t>(sh.S[m].output_dim);
    per += t * s;
    up *= t;
  }
  per += up;
  bool rank_k = opts.mode == StreamMode::rank_k;
  for (std::size_t m = 0; m < 3; ++m) {
    auto s = static_cast<std::size_t>(sh.S[m].output_dim), n = static_cast<std::size_t>(d[static_cast<int>(m) + 1]);
    auto k = static_cast<std::size_t>(p.k);
    if (rank_k) per += s * k;
    if (!opts.skip_upload) per += n * (rank_k ? k : s);
  }
  return per * static_cast<std::size_t>(machines);
}

std::vector<Tensor3> random_partition(const Tensor3& a, int machines, std::uint64_t seed, bool split_values) {
  if (machines < 1) throw InvalidParams("need at least one machine");
  auto count = static_cast<std::size_t>(machines);
  std::vector<std::vector<Entry>> parts(count);
  Rng rng(seed);
  a.for_each_nonzero([&](Index i, Index j, Index l, double v) {
    if (!split_values) {
      parts[rng.below(count)].push_back({i, j, l, v});
      return;
    }
    double rest = v;
    for (std::size_t m = 0; m + 1 < count; ++m) {
      double share = rng.normal() * std::abs(v);
      parts[m].push_back({i, j, l, share});
      rest -= share;
    }
    parts[count - 1].push_back({i, j, l, rest});
  });
  std::vector<Tensor3> out;
  for (auto& e : parts) out.push_back(Tensor3::from_entries(a.dims(), std::move(e)));
  return out;
}

}  // namespace tlra
