#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ppbai/audit.hpp"
#include "ppbai/environment.hpp"
#include "ppbai/estimation.hpp"
#include "ppbai/random.hpp"

namespace ppbai {

enum class Strategy { pp_lucb, proxy_only, audit_only, naive_selective };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct RunConfig {
    double delta = 0.05;
    std::uint64_t t_max = 20000;  // pull budget
    double cost_proxy = 1.0;
    double cost_audit = 20.0;
    double pi_min = 0.05;
    AuditPolicyKind auditor{AuditVariant::uniform, 0.1, 0.05};
    DelayModel delay;
    Strategy strategy = Strategy::pp_lucb;
    std::uint64_t seed = 42;
    BudgetSplit budget = BudgetSplit::appendix;
    bool record_trace = false;
    // Per-segment propensities are averaged over pulls with index > late_window * t_max.
    double late_window = 0.5;

    // Throws std::invalid_argument naming the violated rule.
    void validate(std::size_t arm_count) const;
};

struct PendingAudit {
    std::size_t arm = 0;
    std::uint64_t request_round = 0;
    std::uint64_t return_round = 0;
    std::uint64_t sequence = 0;
    double propensity = 1.0;
    double residual = 0.0;
    std::size_t segment = 0;
    double proxy = 0.0;
};

// Audits in flight, delivered in (return_round, request order).
class PendingAuditQueue {
public:
    void push(PendingAudit entry);
    std::vector<PendingAudit> pop_due(std::uint64_t round);
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::multimap<std::pair<std::uint64_t, std::uint64_t>, PendingAudit> entries_;
    std::uint64_t next_sequence_ = 0;
};

struct CostLedger {
    double proxy_cost = 0.0;
    double audit_cost = 0.0;
    std::uint64_t pulls = 0;
    std::uint64_t audits_requested = 0;

    double total() const { return proxy_cost + audit_cost; }
};

struct TracePull {
    std::size_t arm = 0;
    std::size_t segment = 0;
    double proxy = 0.0;
    double propensity = 0.0;
    bool audited = false;
    std::int64_t delay = -1;  // -1 when no audit was requested
};

struct TraceArm {
    std::uint64_t pulls = 0;
    std::uint64_t pending = 0;
    double proxy_sum = 0.0;
    double residual_ipw_sum = 0.0;
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct TraceRound {
    std::uint64_t round = 0;
    std::vector<std::size_t> returned_arms;
    std::vector<TraceArm> arms;
    std::size_t leader = 0;
    std::size_t challenger = 0;
    bool stopped = false;
    std::vector<TracePull> pulls;
    double cumulative_cost = 0.0;
};

struct RunResult {
    std::optional<std::size_t> selected_arm;
    bool certified = false;   // selection backed by the stopping rule
    bool proxy_only = false;  // no audits were ever allowed
    std::size_t leader = 0;   // leader at the end, also on budget exhaustion
    std::uint64_t stop_round = 0;
    std::uint64_t pulls = 0;
    CostLedger cost;
    double total_cost = 0.0;
    double audit_rate = 0.0;
    bool correct = false;
    std::vector<double> estimates;
    std::uint64_t returns_delivered = 0;
    std::uint64_t pending = 0;
    // Emitted propensities per segment over pulls with index > late_window * t_max.
    std::vector<double> late_propensity_sum;
    std::vector<std::uint64_t> late_propensity_count;
    std::vector<TraceRound> trace;
};

// Leader = argmax point estimate, challenger = argmax upper bound among the rest; ties to the
// lowest index.
std::pair<std::size_t, std::size_t> select_leader_challenger(std::span<const ConfidenceInterval> intervals);

// L_leader > max_{k != leader} U_k, strictly.
bool check_stop(std::span<const ConfidenceInterval> intervals, std::size_t leader);

/// One PP-LUCB run. Construction performs the initialization round (each arm once, audited with
/// probability pi_min); step() executes one outer round.
class RunState {
public:
    RunState(const RunConfig& config, const EnvironmentSpec& env);

    // Returns false once the run has stopped or exhausted its budget.
    bool step();
    bool finished() const { return finished_; }
    RunResult result() const;

    std::uint64_t round() const { return round_; }
    std::uint64_t pulls() const { return ledger_.pulls; }
    const CostLedger& ledger() const { return ledger_; }
    const std::vector<ArmAccumulator>& accumulators() const { return acc_; }
    std::vector<ConfidenceInterval> intervals() const;
    const BoundaryParams& boundary() const { return boundary_; }
    const Auditor& auditor() const { return auditor_; }
    std::size_t pending_audits() const { return queue_.size(); }
    std::uint64_t returns_delivered() const { return delivered_; }

private:
    void pull(std::size_t arm, const IntervalView& leader, const IntervalView& challenger, bool initial);
    void deliver_due();

    RunConfig config_;
    const EnvironmentSpec* env_;
    BoundaryParams boundary_;
    Auditor auditor_;
    std::vector<ArmAccumulator> acc_;
    std::vector<RandomStream> instance_rng_;
    std::vector<RandomStream> audit_rng_;
    std::vector<RandomStream> delay_rng_;
    PendingAuditQueue queue_;
    CostLedger ledger_;
    std::uint64_t round_ = 0;
    std::uint64_t delivered_ = 0;
    bool finished_ = false;
    bool stopped_ = false;
    std::size_t leader_ = 0;
    std::vector<double> late_sum_;
    std::vector<std::uint64_t> late_count_;
    std::vector<TraceRound> trace_;
};

// Dispatches on config.strategy.
RunResult run(const RunConfig& config, const EnvironmentSpec& env);

// proxy_only, audit_only and naive_selective.
RunResult run_baseline(const RunConfig& config, const EnvironmentSpec& env);

}  // namespace ppbai
