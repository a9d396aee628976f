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

// In-process ledger hosting the embedding aggregator contract.
//
// Clients submit quantized embedding batches as transactions. Sealing a round
// sums the payloads exactly, stores the sum with the contributing transaction
// hashes, and appends one hash-chained block. Every accepted submission mints
// a flat token reward. Any later edit to stored state is
// caught by VerifyRound, which replays the round from stored state.
//
// Hash encodings (SHA-256, all integers 8-byte little endian):
//   tx:    round || client_id bytes || payload values (row-major)
//   block: height || prev_hash || tx hashes in block order

#ifndef VFLCHAIN_LEDGER_H_
#define VFLCHAIN_LEDGER_H_

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vflchain/errors.h"
#include "vflchain/pbm.h"

namespace vflchain {

using Digest = std::array<std::uint8_t, 32>;

Digest Sha256(std::span<const std::uint8_t> bytes);
std::string ToHex(const Digest& d);
// Throws ValidationError on malformed input.
Digest DigestFromHex(std::string_view hex);

struct Transaction {
  std::int64_t round = 0;
  std::string client_id;
  std::uint64_t nonce = 0;
  QuantizedBatch payload;
  Digest tx_hash{};
};

Digest TransactionDigest(std::int64_t round, std::string_view client_id,
                         const QuantizedBatch& payload);
Digest BlockDigest(std::int64_t height, const Digest& prev_hash,
                   std::span<const Digest> tx_hashes);

struct AggregateRecord {
  std::int64_t round = 0;
  QuantizedBatch sum;
  std::vector<Digest> contributing_tx;
  int client_count = 0;
  std::int64_t b = 0;
};

struct Block {
  std::int64_t height = 0;
  Digest prev_hash{};
  std::vector<Transaction> txs;  // sorted by client_id
  AggregateRecord record;
  Digest block_hash{};
};

// Expected shape and participants of one round.
struct RoundSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::int64_t b = 0;
  int clients = 0;
};

// Emulated consensus cost, added to reported round timings.
struct LatencyModel {
  std::chrono::nanoseconds per_tx{0};
  std::chrono::nanoseconds per_block{0};
};

struct RoundTiming {
  std::chrono::nanoseconds measured{0};  // wall time of submit + seal work
  std::chrono::nanoseconds injected{0};  // from the latency model
  std::chrono::nanoseconds total() const { return measured + injected; }
};

enum class VerdictKind { kOk, kMismatch, kChainBroken };

struct RoundVerdict {
  VerdictKind kind = VerdictKind::kOk;
  // kMismatch: coordinates where the replayed sum differs from the record.
  std::vector<std::pair<std::size_t, std::size_t>> coordinates;
  // kChainBroken: first height whose links or hashes do not check out.
  std::int64_t height = -1;
  std::string detail;

  bool ok() const { return kind == VerdictKind::kOk; }
};

std::string_view ToString(VerdictKind kind);

class SubmissionRejected : public std::runtime_error {
 public:
  enum class Reason { kRoundClosed, kDuplicate, kShape, kRange };
  SubmissionRejected(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

class RoundIncompleteError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class InsufficientBalance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed chain log.
class LedgerLogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ERC-20 style balances: mint on accepted submission, transfer, balance.
class TokenLedger {
 public:
  explicit TokenLedger(std::int64_t reward_per_submission = 1);

  void RewardSubmission(const std::string& client);
  void Transfer(const std::string& from, const std::string& to, std::int64_t amount);
  std::int64_t BalanceOf(const std::string& client) const;
  std::int64_t TotalSupply() const { return total_supply_; }
  std::int64_t AcceptedSubmissions(const std::string& client) const;
  std::int64_t reward_per_submission() const { return reward_; }

  struct TransferRecord {
    std::string from;
    std::string to;
    std::int64_t amount = 0;
  };
  const std::vector<TransferRecord>& transfers() const { return transfers_; }

 private:
  std::int64_t reward_;
  std::int64_t total_supply_ = 0;
  std::map<std::string, std::int64_t> balances_;
  std::map<std::string, std::int64_t> accepted_;
  std::vector<TransferRecord> transfers_;
};

class Ledger {
 public:
  explicit Ledger(std::int64_t reward_per_submission = 1);

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;
  Ledger(Ledger&& other) noexcept;
  Ledger& operator=(Ledger&& other) noexcept;

  // Opens a round for submissions. Reopening an open or sealed round throws.
  void OpenRound(std::int64_t round, const RoundSpec& spec);

  // Thread-safe. Throws SubmissionRejected; a rejected submission changes
  // nothing.
  Digest Submit(std::int64_t round, const std::string& client_id,
                QuantizedBatch payload);

  // Seals the round once all expected clients have submitted. Throws
  // RoundIncompleteError otherwise; the round stays open.
  AggregateRecord Aggregate(std::int64_t round);

  RoundVerdict VerifyRound(std::int64_t round) const;

  std::int64_t BalanceOf(const std::string& client) const;
  void Transfer(const std::string& from, const std::string& to, std::int64_t amount);
  std::int64_t TotalSupply() const;
  const TokenLedger& tokens() const { return tokens_; }

  void SetLatencyModel(const LatencyModel& model);
  RoundTiming TimingOf(std::int64_t round) const;

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block* FindBlock(std::int64_t round) const;
  bool IsSealed(std::int64_t round) const { return FindBlock(round) != nullptr; }

  // Newline-delimited JSON, one record per line.
  void WriteLog(std::ostream& out) const;
  // Rebuilds stored state as-is; integrity is checked by VerifyRound, not here.
  static Ledger ReadLog(std::istream& in);

  // Direct access to stored blocks, for tamper tests.
  std::vector<Block>& MutableBlocksForTesting() { return blocks_; }

 private:
  struct OpenRoundState {
    RoundSpec spec;
    std::map<std::string, Transaction> txs;
    std::chrono::nanoseconds measured{0};
  };

  mutable std::mutex mu_;
  TokenLedger tokens_;
  LatencyModel latency_;
  std::map<std::int64_t, OpenRoundState> open_;
  std::vector<Block> blocks_;
  std::map<std::int64_t, std::size_t> round_to_block_;
  std::map<std::int64_t, RoundTiming> timings_;
  std::map<std::string, std::uint64_t> nonces_;
};

}  // namespace vflchain

#endif  // VFLCHAIN_LEDGER_H_
