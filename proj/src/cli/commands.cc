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

#include "vflchain/cli.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vflchain/privacy.h"

namespace vflchain::cli {
namespace {

using nlohmann::json;

std::string_view ToString(Mode m) { return m == Mode::kDp ? "dp" : "npq"; }

std::string Fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json ConfigToJson(const ExperimentConfig& config, const TrainingConfig& t,
                  std::uint64_t seed) {
  return json{
      {"dataset", config.dataset},
      {"label_column", config.label_column},
      {"split", config.split},
      {"standardize", config.standardize},
      {"partition", std::string(ToString(config.scheme))},
      {"mode", std::string(ToString(config.mode))},
      {"seed", seed},
      {"clients", t.clients},
      {"active_client", t.active_client},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"embedding_dim", t.embedding_dim},
      {"lr", t.lr},
      {"pbm_b", t.pbm.b},
      {"pbm_beta", t.pbm.beta},
      {"pbm_c", t.pbm.c},
      {"mechanism", std::string(ToString(t.mechanism))},
      {"ledger", std::string(ToString(t.ledger_mode))},
      {"hidden_activation", std::string(ToString(t.local_model.hidden))},
      {"output_activation", std::string(ToString(t.local_model.output))},
      {"noisy_eval", t.noisy_eval},
      {"reward_per_submission", t.reward_per_submission},
  };
}

json TensorToJson(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

void WriteMetricsCsv(const std::filesystem::path& path,
                     const std::vector<MetricReport>& metrics) {
  std::ofstream f(path);
  f << "epoch,auroc,f1,test_loss,train_loss\n";
  for (const auto& m : metrics) {
    f << m.epoch << ',' << Fixed(m.auroc, 6) << ',' << Fixed(m.f1, 6) << ','
      << Fixed(m.loss, 6) << ',' << Fixed(m.train_loss, 6) << '\n';
  }
  if (!f) throw std::runtime_error("failed to write " + path.string());
}

int TrainOneSeed(const ExperimentConfig& config, std::uint64_t seed,
                 const std::filesystem::path& dir, std::ostream& out, json& seed_summary) {
  const VerticalDataset data = LoadExperimentData(config, seed);
  const TrainingConfig training = ResolveTraining(config, seed);
  std::filesystem::create_directories(dir);

  std::ofstream trace_file;
  RunOptions options;
  options.keep_traces = false;
  if (config.write_trace) {
    trace_file.open(dir / "trace.ndjson");
    options.on_round = [&trace_file](const RoundTrace& tr) {
      trace_file << json{{"t", tr.t},
                         {"epoch", tr.epoch},
                         {"minibatch_ids", tr.minibatch_ids},
                         {"tx_hashes", tr.tx_hashes},
                         {"loss", tr.loss},
                         {"h_hat", TensorToJson(tr.h_hat)},
                         {"avg_grad", TensorToJson(tr.avg_grad)}}
                        .dump()
                 << '\n';
    };
  }
  const TrainingResult result = RunTraining(training, data, options);
  WriteMetricsCsv(dir / "metrics.csv", result.metrics);

  json summary;
  summary["config"] = ConfigToJson(config, training, seed);
  summary["n_train"] = result.n_train;
  summary["n_test"] = data.split.test.size();
  summary["rounds"] = result.rounds;
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    summary["final"] = {{"epoch", last.epoch}, {"auroc", last.auroc},
                        {"f1", last.f1},       {"test_loss", last.loss}};
  }
  if (config.mode == Mode::kDp) {
    json budgets = json::array();
    for (double alpha : config.alphas) {
      const RdpBudget b = TotalEpsilon(RealizedPrivacyQuery(training, result, alpha, config.c0));
      budgets.push_back({{"alpha", b.alpha},
                         {"epsilon", b.epsilon},
                         {"epsilon_over_c0", b.epsilon_over_c0},
                         {"per_round_epsilon", b.per_round_epsilon},
                         {"sampling_rate", b.sampling_rate},
                         {"iterations", b.iterations}});
    }
    summary["privacy"] = {{"c0", config.c0}, {"budgets", budgets}};
  } else {
    summary["privacy"] = nullptr;
  }
  if (result.ledger) {
    const Ledger& ledger = *result.ledger;
    std::ofstream chain(dir / "chain.ndjson");
    ledger.WriteLog(chain);
    json balances = json::object();
    for (int m = 0; m < training.clients; ++m) {
      balances[ClientAddress(m)] = ledger.BalanceOf(ClientAddress(m));
    }
    summary["chain"] = {{"blocks", ledger.blocks().size()},
                        {"head_hash", ledger.blocks().empty()
                                          ? std::string()
                                          : ToHex(ledger.blocks().back().block_hash)},
                        {"total_supply", ledger.TotalSupply()},
                        {"balances", balances}};
  } else {
    summary["chain"] = nullptr;
  }
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';

  out << "seed " << seed << ": " << result.rounds << " rounds";
  if (!result.metrics.empty()) {
    out << ", final AUROC " << Fixed(result.metrics.back().auroc, 4) << ", F1 "
        << Fixed(result.metrics.back().f1, 4);
  }
  out << '\n';
  if (config.mode == Mode::kDp) {
    for (const auto& b : summary["privacy"]["budgets"]) {
      out << "  RDP epsilon(alpha=" << b["alpha"].get<double>()
          << ") = " << Fixed(b["epsilon"].get<double>(), 6) << "  (" << Fixed(b["epsilon_over_c0"].get<double>(), 6)
          << " x C0)\n";
    }
  }
  seed_summary = summary;
  return kExitOk;
}

template <typename Fn>
int Guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const LedgerLogError& e) {
    err << "error: corrupt chain log: " << e.what() << '\n';
    return kExitVerification;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

VerticalDataset LoadExperimentData(const ExperimentConfig& config, std::uint64_t seed) {
  RawDataset raw = LoadCsv(config.dataset, config.label_column);
  PrepareOptions prep;
  prep.clients = config.training.clients;
  prep.train_fraction = config.split;
  prep.standardize = config.standardize;
  prep.scheme = config.scheme;
  prep.seed = seed;
  return PrepareVerticalDataset(std::move(raw), prep);
}

TrainingConfig ResolveTraining(const ExperimentConfig& config, std::uint64_t seed) {
  TrainingConfig t = config.training;
  t.seed = seed;
  t.mechanism = config.mode == Mode::kNpq ? Mechanism::kIdentity : Mechanism::kPbm;
  return t;
}

int CmdTrain(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  return Guarded(err, [&] {
    if (config.seeds.empty()) throw ValidationError("at least one seed is required");
    if (config.mode == Mode::kDp && config.alphas.empty()) {
      throw ValidationError("dp mode needs at least one --alpha for accounting");
    }
    for (double a : config.alphas) {
      if (!(a > 1.0)) throw ValidationError("every alpha must exceed 1");
    }
    if (!(config.c0 > 0.0)) throw ValidationError("C0 must be positive");
    const bool many = config.seeds.size() > 1;
    std::ofstream seeds_csv;
    if (many) {
      std::filesystem::create_directories(config.out_dir);
      seeds_csv.open(config.out_dir / "seeds.csv");
      seeds_csv << "seed,final_auroc,final_f1\n";
    }
    for (std::uint64_t seed : config.seeds) {
      const auto dir = many ? config.out_dir / ("seed-" + std::to_string(seed)) : config.out_dir;
      json summary;
      TrainOneSeed(config, seed, dir, out, summary);
      if (many && summary.contains("final")) {
        seeds_csv << seed << ',' << Fixed(summary["final"]["auroc"].get<double>(), 6) << ','
                  << Fixed(summary["final"]["f1"].get<double>(), 6) << '\n';
      }
    }
    return static_cast<int>(kExitOk);
  });
}

int CmdVerify(const std::filesystem::path& chain_log, std::ostream& out,
              std::ostream& err) {
  return Guarded(err, [&] {
    std::ifstream in(chain_log);
    if (!in) throw ValidationError("cannot open chain log " + chain_log.string());
    const Ledger ledger = Ledger::ReadLog(in);
    if (ledger.blocks().empty()) {
      out << "0 rounds in log; nothing to verify\n";
      return static_cast<int>(kExitOk);
    }
    std::int64_t txs = 0;
    for (const Block& block : ledger.blocks()) {
      const RoundVerdict v = ledger.VerifyRound(block.record.round);
      if (!v.ok()) {
        out << "round " << block.record.round << " FAILED: " << ToString(v.kind);
        if (v.height >= 0) out << " at height " << v.height;
        out << " (" << v.detail << ")\n";
        return static_cast<int>(kExitVerification);
      }
      txs += static_cast<std::int64_t>(block.txs.size());
    }
    const std::int64_t expected_supply = txs * ledger.tokens().reward_per_submission();
    if (ledger.TotalSupply() != expected_supply) {
      out << "token supply " << ledger.TotalSupply() << " does not match "
          << expected_supply << " rewarded submissions\n";
      return static_cast<int>(kExitVerification);
    }
    out << ledger.blocks().size() << " rounds verified ok (" << txs
        << " transactions, head " << ToHex(ledger.blocks().back().block_hash) << ")\n";
    return static_cast<int>(kExitOk);
  });
}

int CmdBudget(const BudgetArgs& args, std::ostream& out, std::ostream& err) {
  return Guarded(err, [&] {
    if (args.alphas.empty()) throw ValidationError("at least one --alpha is required");
    RdpQuery q;
    q.batch_size = args.batch_size;
    q.embedding_dim = args.embedding_dim;
    q.num_samples = args.num_samples;
    q.b = args.b;
    q.beta = args.beta;
    q.c0 = args.c0;
    q.iterations = args.iterations
                       ? *args.iterations
                       : IterationsForEpochs(args.epochs, args.num_samples, args.batch_size);
    json rows = json::array();
    std::ostringstream table;
    table << "# T=" << q.iterations << " B=" << q.batch_size << " P=" << q.embedding_dim
          << " N=" << q.num_samples << " b=" << q.b << " beta=" << q.beta << " C0=" << q.c0
          << '\n';
    table << std::left << std::setw(10) << "alpha" << std::setw(18) << "per_round_eps"
          << std::setw(18) << "total_eps" << std::setw(18) << "eps_over_c0";
    if (args.delta) table << "eps_dp(delta=" << *args.delta << ")";
    table << '\n';
    for (double alpha : args.alphas) {
      q.alpha = alpha;
      const RdpBudget b = TotalEpsilon(q);
      json row{{"alpha", alpha},
               {"per_round_epsilon", b.per_round_epsilon},
               {"epsilon", b.epsilon},
               {"epsilon_over_c0", b.epsilon_over_c0},
               {"iterations", b.iterations},
               {"sampling_rate", b.sampling_rate}};
      std::ostringstream a;
      a << alpha;
      table << std::left << std::setw(10) << a.str() << std::setw(18)
            << Fixed(b.per_round_epsilon, 6) << std::setw(18) << Fixed(b.epsilon, 6)
            << std::setw(18) << Fixed(b.epsilon_over_c0, 6);
      if (args.delta) {
        const double dp = RdpToDp(alpha, b.epsilon, *args.delta);
        row["epsilon_dp"] = dp;
        row["delta"] = *args.delta;
        table << Fixed(dp, 6);
      }
      table << '\n';
      rows.push_back(row);
    }
    if (args.json) {
      out << rows.dump(2) << '\n';
    } else {
      out << table.str();
    }
    return static_cast<int>(kExitOk);
  });
}

std::vector<BenchRow> RunBench(const BenchArgs& args) {
  std::vector<BenchRow> rows;
  const std::uint64_t seed = args.base.seeds.empty() ? 0 : args.base.seeds.front();
  for (int clients : args.clients) {
    ExperimentConfig cfg = args.base;
    cfg.mode = Mode::kDp;
    cfg.training.clients = clients;
    const VerticalDataset data = LoadExperimentData(cfg, seed);
    for (std::int64_t b : args.b_values) {
      TrainingConfig t = ResolveTraining(cfg, seed);
      t.pbm.b = b;
      RunOptions options;
      options.max_epochs = args.epochs;
      options.evaluate = false;

      t.ledger_mode = LedgerMode::kDirect;
      const TrainingResult direct = RunTraining(t, data, options);
      t.ledger_mode = LedgerMode::kOnChain;
      const TrainingResult chain = RunTraining(t, data, options);

      auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      };
      BenchRow row;
      row.clients = clients;
      row.b = b;
      row.direct_seconds = mean(direct.epoch_aggregation_seconds);
      row.on_chain_seconds = mean(chain.epoch_aggregation_seconds);
      row.sums_identical = direct.traces.size() == chain.traces.size();
      for (std::size_t i = 0; row.sums_identical && i < direct.traces.size(); ++i) {
        row.sums_identical = direct.traces[i].h_hat == chain.traces[i].h_hat;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

int CmdBench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  return Guarded(err, [&] {
    if (args.epochs < 1) throw ValidationError("bench needs at least one epoch");
    const auto rows = RunBench(args);
    const auto& lat = args.base.training.latency;
    out << "Average aggregation time per epoch, first " << args.epochs
        << " epochs (beta=" << args.base.training.pbm.beta
        << ", injected per-tx " << std::chrono::duration<double, std::milli>(lat.per_tx).count()
        << " ms, per-block "
        << std::chrono::duration<double, std::milli>(lat.per_block).count() << " ms)\n";
    out << std::left << std::setw(10) << "clients" << std::setw(6) << "b" << std::setw(28)
        << "off-chain time (seconds)" << std::setw(28) << "on-chain time (seconds)"
        << "sums identical\n";
    for (const auto& r : rows) {
      out << std::left << std::setw(10) << r.clients << std::setw(6) << r.b << std::setw(28)
          << Fixed(r.direct_seconds, 5) << std::setw(28) << Fixed(r.on_chain_seconds, 3)
          << (r.sums_identical ? "yes" : "NO") << '\n';
    }
    if (!args.base.out_dir.empty()) {
      std::filesystem::create_directories(args.base.out_dir);
      std::ofstream csv(args.base.out_dir / "bench.csv");
      csv << "clients,b,off_chain_seconds,on_chain_seconds,sums_identical\n";
      for (const auto& r : rows) {
        csv << r.clients << ',' << r.b << ',' << Fixed(r.direct_seconds, 9) << ','
            << Fixed(r.on_chain_seconds, 9) << ',' << (r.sums_identical ? 1 : 0) << '\n';
      }
    }
    for (const auto& r : rows) {
      if (!r.sums_identical) return static_cast<int>(kExitRuntime);
    }
    return static_cast<int>(kExitOk);
  });
}

int Main(int argc, char** argv) {
  CLI::App app{"Vertical federated learning with PBM-noised embeddings and a ledger aggregator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value config file (CLI flags override)");

  ExperimentConfig exp;
  TrainingConfig& t = exp.training;
  std::string mode = "dp";
  std::string ledger = "on_chain";
  std::string hidden_act = "tanh";
  std::string output_act = "tanh";
  std::string partition = "contiguous";
  double tx_delay_ms = 0.0;
  double block_delay_ms = 0.0;
  bool no_standardize = false;
  bool clean_eval = false;
  bool serial = false;
  bool no_trace = false;
  bool lenient = false;

  app.add_option("--dataset", exp.dataset, "CSV file with a header row")->capture_default_str();
  app.add_option("--label-col", exp.label_column, "Binary label column")->capture_default_str();
  app.add_option("--clients", t.clients, "Number of clients M")->capture_default_str();
  app.add_option("--active-client", t.active_client, "Index of the active client")
      ->capture_default_str();
  app.add_option("--batch", t.batch_size, "Minibatch size B")->capture_default_str();
  app.add_option("--embed-dim", t.embedding_dim, "Embedding size P")->capture_default_str();
  app.add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  app.add_option("--lr", t.lr, "SGD learning rate")->capture_default_str();
  app.add_option("--pbm-b", t.pbm.b, "PBM binomial trials b")->capture_default_str();
  app.add_option("--pbm-beta", t.pbm.beta, "PBM beta in (0, 1/4]")->capture_default_str();
  app.add_option("--mode", mode, "dp or npq")
      ->check(CLI::IsMember({"dp", "npq"}))
      ->capture_default_str();
  app.add_option("--ledger", ledger, "on_chain or direct")
      ->check(CLI::IsMember({"on_chain", "direct"}))
      ->capture_default_str();
  app.add_option("--seed", exp.seeds, "Experiment seed (repeatable)")->capture_default_str();
  app.add_option("--split", exp.split, "Training fraction")->capture_default_str();
  app.add_option("--out", exp.out_dir, "Output directory")->capture_default_str();
  app.add_option("--alpha", exp.alphas, "Renyi order (repeatable)")->capture_default_str();
  app.add_option("--c0", exp.c0, "Universal constant C0")->capture_default_str();
  app.add_option("--tx-delay-ms", tx_delay_ms, "Injected delay per transaction")
      ->capture_default_str();
  app.add_option("--block-delay-ms", block_delay_ms, "Injected delay per block")
      ->capture_default_str();
  app.add_option("--hidden-act", hidden_act, "Local hidden activation")->capture_default_str();
  app.add_option("--output-act", output_act, "Local output activation (tanh or hardtanh)")
      ->capture_default_str();
  app.add_option("--partition", partition, "contiguous or round_robin")->capture_default_str();
  app.add_option("--reward", t.reward_per_submission, "Tokens per accepted submission")
      ->capture_default_str();
  app.add_flag("--no-standardize", no_standardize, "Keep raw feature scales");
  app.add_flag("--clean-eval", clean_eval, "Evaluate without PBM noise");
  app.add_flag("--serial", serial, "Run client phases on one thread");
  app.add_flag("--no-trace", no_trace, "Skip trace.ndjson");
  app.add_flag("--lenient-range", lenient, "Clamp out-of-range PBM inputs instead of failing");

  auto* train = app.add_subcommand("train", "Run the federated training protocol");
  auto* verify = app.add_subcommand("verify", "Replay and verify a chain log");
  std::string chain_path;
  verify->add_option("chain", chain_path, "chain.ndjson written by train")->required();

  auto* budget = app.add_subcommand("budget", "Print the RDP budget table");
  BudgetArgs budget_args;
  std::int64_t iterations = -1;
  std::int64_t samples = 0;
  double delta = 0.0;
  budget->add_option("--iterations", iterations, "Rounds T (overrides --epochs)");
  budget->add_option("--samples", samples,
                     "Training samples N (default: training split of --dataset)");
  budget->add_option("--delta", delta, "Also convert to (epsilon, delta)-DP");
  budget->add_flag("--json", budget_args.json, "JSON output");

  auto* bench = app.add_subcommand("bench", "Time on-chain vs direct aggregation");
  BenchArgs bench_args;
  bench->add_option("--bench-clients", bench_args.clients, "Client counts to time")
      ->capture_default_str();
  bench->add_option("--bench-b", bench_args.b_values, "PBM b values to time")
      ->capture_default_str();
  bench->add_option("--bench-epochs", bench_args.epochs, "Epochs to time")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    exp.mode = mode == "npq" ? Mode::kNpq : Mode::kDp;
    t.ledger_mode = ParseLedgerMode(ledger);
    t.local_model.hidden = ParseActivation(hidden_act);
    t.local_model.output = ParseActivation(output_act);
    if (t.local_model.output != Activation::kTanh &&
        t.local_model.output != Activation::kHardTanh) {
      throw ValidationError("local output activation must be tanh or hardtanh");
    }
    exp.scheme = ParsePartitionScheme(partition);
    if (tx_delay_ms < 0 || block_delay_ms < 0) {
      throw ValidationError("delays must be non-negative");
    }
    t.latency.per_tx = std::chrono::nanoseconds(static_cast<std::int64_t>(tx_delay_ms * 1e6));
    t.latency.per_block =
        std::chrono::nanoseconds(static_cast<std::int64_t>(block_delay_ms * 1e6));
    exp.standardize = !no_standardize;
    t.noisy_eval = !clean_eval;
    t.parallel_clients = !serial;
    t.range_policy = lenient ? RangePolicy::kClamp : RangePolicy::kStrict;
    exp.write_trace = !no_trace;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  if (*train) return CmdTrain(exp, std::cout, std::cerr);
  if (*verify) return CmdVerify(chain_path, std::cout, std::cerr);
  if (*budget) {
    return Guarded(std::cerr, [&] {
      budget_args.epochs = t.epochs;
      budget_args.batch_size = static_cast<std::int64_t>(t.batch_size);
      budget_args.embedding_dim = static_cast<std::int64_t>(t.embedding_dim);
      budget_args.b = t.pbm.b;
      budget_args.beta = t.pbm.beta;
      budget_args.alphas = exp.alphas;
      budget_args.c0 = exp.c0;
      if (iterations >= 0) budget_args.iterations = iterations;
      if (budget->count("--delta") > 0) budget_args.delta = delta;
      if (samples > 0) {
        budget_args.num_samples = samples;
      } else {
        const RawDataset raw = LoadCsv(exp.dataset, exp.label_column);
        const std::uint64_t seed = exp.seeds.empty() ? 0 : exp.seeds.front();
        budget_args.num_samples = static_cast<std::int64_t>(
            TrainTestSplit(raw.labels, exp.split, seed).train.size());
      }
      return CmdBudget(budget_args, std::cout, std::cerr);
    });
  }
  if (*bench) {
    bench_args.base = exp;
    return CmdBench(bench_args, std::cout, std::cerr);
  }
  return kExitValidation;
}

}  // namespace vflchain::cli
