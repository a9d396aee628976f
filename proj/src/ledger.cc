// Copyright 2026 The vflchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vflchain/ledger.h"

#include <algorithm>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace vflchain {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

void AppendLe64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

json DigestsToJson(std::span<const Digest> digests) {
  json arr = json::array();
  for (const auto& d : digests) arr.push_back(ToHex(d));
  return arr;
}

QuantizedBatch BatchFromJson(const json& j, const char* rows_key,
                             const char* cols_key, const char* values_key) {
  return QuantizedBatch(j.at(rows_key).get<std::size_t>(),
                        j.at(cols_key).get<std::size_t>(),
                        j.at(values_key).get<std::vector<std::int64_t>>());
}

}  // namespace

Digest Sha256(std::span<const std::uint8_t> bytes) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != d.size()) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return d;
}

std::string ToHex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t byte : d) {
    s.push_back(kHex[byte >> 4]);
    s.push_back(kHex[byte & 0xf]);
  }
  return s;
}

Digest DigestFromHex(std::string_view hex) {
  if (hex.size() != 64) throw ValidationError("digest must be 64 hex characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ValidationError(std::string("bad hex character '") + c + "'");
  };
  Digest d{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return d;
}

Digest TransactionDigest(std::int64_t round, std::string_view client_id,
                         const QuantizedBatch& payload) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + client_id.size() + 8 * payload.size());
  AppendLe64(bytes, static_cast<std::uint64_t>(round));
  bytes.insert(bytes.end(), client_id.begin(), client_id.end());
  for (std::int64_t v : payload.values()) AppendLe64(bytes, static_cast<std::uint64_t>(v));
  return Sha256(bytes);
}

Digest BlockDigest(std::int64_t height, const Digest& prev_hash,
                   std::span<const Digest> tx_hashes) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + 32 * (1 + tx_hashes.size()));
  AppendLe64(bytes, static_cast<std::uint64_t>(height));
  bytes.insert(bytes.end(), prev_hash.begin(), prev_hash.end());
  for (const auto& h : tx_hashes) bytes.insert(bytes.end(), h.begin(), h.end());
  return Sha256(bytes);
}

std::string_view ToString(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::kOk:
      return "ok";
    case VerdictKind::kMismatch:
      return "mismatch";
    case VerdictKind::kChainBroken:
      return "chain-broken";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// TokenLedger

TokenLedger::TokenLedger(std::int64_t reward_per_submission)
    : reward_(reward_per_submission) {
  if (reward_ < 0) throw ValidationError("reward per submission must be >= 0");
}

void TokenLedger::RewardSubmission(const std::string& client) {
  balances_[client] += reward_;
  accepted_[client] += 1;
  total_supply_ += reward_;
}

void TokenLedger::Transfer(const std::string& from, const std::string& to,
                           std::int64_t amount) {
  if (amount < 0) throw ValidationError("transfer amount must be >= 0");
  if (amount == 0) return;
  const std::int64_t have = BalanceOf(from);
  if (have < amount) {
    throw InsufficientBalance("transfer of " + std::to_string(amount) + " from " +
                              from + " exceeds balance " + std::to_string(have));
  }
  balances_[from] -= amount;
  balances_[to] += amount;
  transfers_.push_back({from, to, amount});
}

std::int64_t TokenLedger::BalanceOf(const std::string& client) const {
  auto it = balances_.find(client);
  return it == balances_.end() ? 0 : it->second;
}

std::int64_t TokenLedger::AcceptedSubmissions(const std::string& client) const {
  auto it = accepted_.find(client);
  return it == accepted_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Ledger

Ledger::Ledger(std::int64_t reward_per_submission) : tokens_(reward_per_submission) {}

Ledger::Ledger(Ledger&& other) noexcept : tokens_(0) { *this = std::move(other); }

Ledger& Ledger::operator=(Ledger&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  tokens_ = std::move(other.tokens_);
  latency_ = other.latency_;
  open_ = std::move(other.open_);
  blocks_ = std::move(other.blocks_);
  round_to_block_ = std::move(other.round_to_block_);
  timings_ = std::move(other.timings_);
  nonces_ = std::move(other.nonces_);
  return *this;
}

void Ledger::OpenRound(std::int64_t round, const RoundSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0 || spec.b < 1 || spec.clients < 1) {
    throw ValidationError("OpenRound: invalid round spec");
  }
  std::lock_guard lock(mu_);
  if (open_.contains(round) || round_to_block_.contains(round)) {
    throw ValidationError("round " + std::to_string(round) + " already exists");
  }
  open_[round].spec = spec;
}

Digest Ledger::Submit(std::int64_t round, const std::string& client_id,
                      QuantizedBatch payload) {
  const auto start = Clock::now();
  std::lock_guard lock(mu_);
  auto it = open_.find(round);
  if (it == open_.end()) {
    throw SubmissionRejected(SubmissionRejected::Reason::kRoundClosed,
                             "round " + std::to_string(round) + " is not open");
  }
  OpenRoundState& state = it->second;
  if (state.txs.contains(client_id)) {
    throw SubmissionRejected(SubmissionRejected::Reason::kDuplicate,
                             client_id + " already submitted in round " +
                                 std::to_string(round));
  }
  if (payload.rows() != state.spec.rows || payload.cols() != state.spec.cols) {
    throw SubmissionRejected(
        SubmissionRejected::Reason::kShape,
        "payload is " + std::to_string(payload.rows()) + "x" +
            std::to_string(payload.cols()) + ", round expects " +
            std::to_string(state.spec.rows) + "x" + std::to_string(state.spec.cols));
  }
  if (!payload.InRange(state.spec.b)) {
    throw SubmissionRejected(SubmissionRejected::Reason::kRange,
                             "payload entries must lie in [0, " +
                                 std::to_string(state.spec.b) + "]");
  }
  if (static_cast<int>(state.txs.size()) >= state.spec.clients) {
    throw SubmissionRejected(SubmissionRejected::Reason::kRoundClosed,
                             "round " + std::to_string(round) + " is full");
  }
  Transaction tx;
  tx.round = round;
  tx.client_id = client_id;
  tx.nonce = nonces_[client_id]++;
  tx.tx_hash = TransactionDigest(round, client_id, payload);
  tx.payload = std::move(payload);
  const Digest hash = tx.tx_hash;
  state.txs.emplace(client_id, std::move(tx));
  tokens_.RewardSubmission(client_id);
  state.measured += Clock::now() - start;
  return hash;
}

AggregateRecord Ledger::Aggregate(std::int64_t round) {
  const auto start = Clock::now();
  std::lock_guard lock(mu_);
  auto it = open_.find(round);
  if (it == open_.end()) {
    throw ValidationError("round " + std::to_string(round) + " is not open");
  }
  OpenRoundState& state = it->second;
  if (static_cast<int>(state.txs.size()) != state.spec.clients) {
    throw RoundIncompleteError("round " + std::to_string(round) + " has " +
                               std::to_string(state.txs.size()) + " of " +
                               std::to_string(state.spec.clients) +
                               " submissions");
  }

  Block block;
  block.height = static_cast<std::int64_t>(blocks_.size());
  block.prev_hash = blocks_.empty() ? Digest{} : blocks_.back().block_hash;
  block.record.round = round;
  block.record.client_count = state.spec.clients;
  block.record.b = state.spec.b;
  block.record.sum = QuantizedBatch(state.spec.rows, state.spec.cols);
  for (auto& [client, tx] : state.txs) {
    block.record.sum += tx.payload;
    block.record.contributing_tx.push_back(tx.tx_hash);
    block.txs.push_back(std::move(tx));
  }
  block.block_hash =
      BlockDigest(block.height, block.prev_hash, block.record.contributing_tx);

  RoundTiming timing;
  timing.measured = state.measured;
  timing.injected = latency_.per_tx * state.spec.clients + latency_.per_block;
  open_.erase(it);

  round_to_block_[round] = blocks_.size();
  blocks_.push_back(std::move(block));
  timing.measured += Clock::now() - start;
  timings_[round] = timing;
  return blocks_.back().record;
}

RoundVerdict Ledger::VerifyRound(std::int64_t round) const {
  std::lock_guard lock(mu_);
  RoundVerdict verdict;
  auto it = round_to_block_.find(round);
  if (it == round_to_block_.end()) {
    verdict.kind = VerdictKind::kChainBroken;
    verdict.detail = "round " + std::to_string(round) + " is not sealed";
    return verdict;
  }
  const Block& block = blocks_[it->second];
  const AggregateRecord& record = block.record;

  // Replay the sum from stored payloads.
  const std::size_t rows = record.sum.rows();
  const std::size_t cols = record.sum.cols();
  QuantizedBatch replay(rows, cols);
  for (const auto& tx : block.txs) {
    if (tx.payload.rows() != rows || tx.payload.cols() != cols) {
      verdict.kind = VerdictKind::kChainBroken;
      verdict.height = block.height;
      verdict.detail = "payload of " + tx.client_id + " has the wrong shape";
      return verdict;
    }
    replay += tx.payload;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (replay(r, c) != record.sum(r, c)) verdict.coordinates.emplace_back(r, c);
    }
  }
  if (!verdict.coordinates.empty()) {
    verdict.kind = VerdictKind::kMismatch;
    verdict.height = block.height;
    verdict.detail = std::to_string(verdict.coordinates.size()) +
                     " aggregate entries differ from the replayed sum";
    return verdict;
  }

  // Walk the chain from genesis through this block.
  Digest prev{};
  for (std::size_t h = 0; h <= it->second; ++h) {
    const Block& b = blocks_[h];
    auto broken = [&](std::string why) {
      verdict.kind = VerdictKind::kChainBroken;
      verdict.height = b.height;
      verdict.detail = std::move(why);
      return verdict;
    };
    if (b.height != static_cast<std::int64_t>(h)) return broken("height out of sequence");
    if (b.prev_hash != prev) return broken("prev_hash does not link to the previous block");
    std::vector<Digest> hashes;
    for (const auto& tx : b.txs) {
      if (tx.round != b.record.round) return broken("transaction from another round");
      if (TransactionDigest(tx.round, tx.client_id, tx.payload) != tx.tx_hash) {
        return broken("transaction of " + tx.client_id + " does not match its hash");
      }
      if (!tx.payload.InRange(b.record.b)) {
        return broken("payload of " + tx.client_id + " is outside [0, b]");
      }
      hashes.push_back(tx.tx_hash);
    }
    if (hashes != b.record.contributing_tx) {
      return broken("aggregate record lists different transactions");
    }
    if (static_cast<int>(b.txs.size()) != b.record.client_count) {
      return broken("client count does not match the transaction list");
    }
    if (BlockDigest(b.height, b.prev_hash, hashes) != b.block_hash) {
      return broken("block hash does not match its contents");
    }
    prev = b.block_hash;
  }
  if (!record.sum.InRange(record.b * record.client_count)) {
    verdict.kind = VerdictKind::kMismatch;
    verdict.height = block.height;
    verdict.detail = "aggregate outside [0, b*M]";
  }
  return verdict;
}

std::int64_t Ledger::BalanceOf(const std::string& client) const {
  std::lock_guard lock(mu_);
  return tokens_.BalanceOf(client);
}

void Ledger::Transfer(const std::string& from, const std::string& to,
                      std::int64_t amount) {
  std::lock_guard lock(mu_);
  tokens_.Transfer(from, to, amount);
}

std::int64_t Ledger::TotalSupply() const {
  std::lock_guard lock(mu_);
  return tokens_.TotalSupply();
}

void Ledger::SetLatencyModel(const LatencyModel& model) {
  if (model.per_tx.count() < 0 || model.per_block.count() < 0) {
    throw ValidationError("latency delays must be non-negative");
  }
  std::lock_guard lock(mu_);
  latency_ = model;
}

RoundTiming Ledger::TimingOf(std::int64_t round) const {
  std::lock_guard lock(mu_);
  auto it = timings_.find(round);
  if (it == timings_.end()) {
    throw ValidationError("no timing for round " + std::to_string(round));
  }
  return it->second;
}

const Block* Ledger::FindBlock(std::int64_t round) const {
  std::lock_guard lock(mu_);
  auto it = round_to_block_.find(round);
  return it == round_to_block_.end() ? nullptr : &blocks_[it->second];
}

void Ledger::WriteLog(std::ostream& out) const {
  std::lock_guard lock(mu_);
  out << json{{"kind", "ledger"},
              {"version", 1},
              {"reward_per_submission", tokens_.reward_per_submission()}}
             .dump()
      << '\n';
  for (const Block& block : blocks_) {
    for (const Transaction& tx : block.txs) {
      out << json{{"kind", "tx"},
                  {"round", tx.round},
                  {"client", tx.client_id},
                  {"nonce", tx.nonce},
                  {"rows", tx.payload.rows()},
                  {"cols", tx.payload.cols()},
                  {"payload", tx.payload.values()},
                  {"tx_hash", ToHex(tx.tx_hash)}}
                 .dump()
          << '\n';
    }
    const AggregateRecord& r = block.record;
    out << json{{"kind", "block"},
                {"height", block.height},
                {"round", r.round},
                {"prev_hash", ToHex(block.prev_hash)},
                {"clients", r.client_count},
                {"b", r.b},
                {"rows", r.sum.rows()},
                {"cols", r.sum.cols()},
                {"sum", r.sum.values()},
                {"contributing_tx", DigestsToJson(r.contributing_tx)},
                {"block_hash", ToHex(block.block_hash)}}
               .dump()
        << '\n';
  }
  for (const auto& t : tokens_.transfers()) {
    out << json{{"kind", "transfer"}, {"from", t.from}, {"to", t.to}, {"amount", t.amount}}
               .dump()
        << '\n';
  }
}

Ledger Ledger::ReadLog(std::istream& in) {
  Ledger ledger;
  std::vector<Transaction> pending;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "ledger") {
        if (line_no != 1 || !pending.empty()) {
          throw LedgerLogError("header must be the first record");
        }
        ledger.tokens_ = TokenLedger(j.at("reward_per_submission").get<std::int64_t>());
      } else if (kind == "tx") {
        Transaction tx;
        tx.round = j.at("round").get<std::int64_t>();
        tx.client_id = j.at("client").get<std::string>();
        tx.nonce = j.at("nonce").get<std::uint64_t>();
        tx.payload = BatchFromJson(j, "rows", "cols", "payload");
        tx.tx_hash = DigestFromHex(j.at("tx_hash").get<std::string>());
        ledger.tokens_.RewardSubmission(tx.client_id);
        ledger.nonces_[tx.client_id] = std::max(ledger.nonces_[tx.client_id], tx.nonce + 1);
        pending.push_back(std::move(tx));
      } else if (kind == "block") {
        Block block;
        block.height = j.at("height").get<std::int64_t>();
        block.prev_hash = DigestFromHex(j.at("prev_hash").get<std::string>());
        block.block_hash = DigestFromHex(j.at("block_hash").get<std::string>());
        block.record.round = j.at("round").get<std::int64_t>();
        block.record.client_count = j.at("clients").get<int>();
        block.record.b = j.at("b").get<std::int64_t>();
        block.record.sum = BatchFromJson(j, "rows", "cols", "sum");
        for (const auto& h : j.at("contributing_tx")) {
          block.record.contributing_tx.push_back(DigestFromHex(h.get<std::string>()));
        }
        block.txs = std::move(pending);
        pending.clear();
        if (ledger.round_to_block_.contains(block.record.round)) {
          throw LedgerLogError("round " + std::to_string(block.record.round) +
                               " sealed twice");
        }
        ledger.round_to_block_[block.record.round] = ledger.blocks_.size();
        ledger.blocks_.push_back(std::move(block));
      } else if (kind == "transfer") {
        ledger.tokens_.Transfer(j.at("from").get<std::string>(),
                                j.at("to").get<std::string>(),
                                j.at("amount").get<std::int64_t>());
      } else {
        throw LedgerLogError("unknown record kind '" + kind + "'");
      }
    } catch (const LedgerLogError& e) {
      throw LedgerLogError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw LedgerLogError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!pending.empty()) {
    throw LedgerLogError("log ends with " + std::to_string(pending.size()) +
                         " transactions outside any block");
  }
  return ledger;
}

}  // namespace vflchain
