#include "ppbai/bai.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ppbai {
namespace {

enum StreamPurpose : std::uint32_t { kInstances = 1, kAuditCoins = 2, kDelays = 3 };

std::vector<RandomStream> arm_streams(std::uint64_t seed, std::uint32_t purpose, std::size_t arms) {
    std::vector<RandomStream> out;
    out.reserve(arms);
    for (std::size_t k = 0; k < arms; ++k) out.push_back(RandomStream::derive(seed, purpose, static_cast<std::uint32_t>(k)));
    return out;
}

AuditPolicyKind effective_auditor(const RunConfig& config) {
    AuditPolicyKind kind = config.auditor;
    kind.pi_min = config.pi_min;
    if (config.strategy == Strategy::audit_only) kind = {AuditVariant::always, 1.0, 1.0};
    return kind;
}

RunConfig effective_config(const RunConfig& config) {
    RunConfig c = config;
    if (c.strategy == Strategy::audit_only) c.pi_min = 1.0;
    c.auditor = effective_auditor(config);
    return c;
}

std::size_t argmax_first(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::pp_lucb: return "pp_lucb";
        case Strategy::proxy_only: return "proxy_only";
        case Strategy::audit_only: return "audit_only";
        case Strategy::naive_selective: return "naive_selective";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (auto s : {Strategy::pp_lucb, Strategy::proxy_only, Strategy::audit_only, Strategy::naive_selective}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

void RunConfig::validate(std::size_t arm_count) const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (t_max < 2 * arm_count) throw std::invalid_argument("t_max must be at least 2*K");
    if (!(cost_proxy > 0.0) || !(cost_audit > 0.0)) throw std::invalid_argument("costs must be positive");
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
    if (pi_min > auditor.target_rate) throw std::invalid_argument("pi_min must not exceed target_rate");
    if (!(late_window >= 0.0 && late_window < 1.0)) throw std::invalid_argument("late_window must lie in [0,1)");
    delay.validate();
}

void PendingAuditQueue::push(PendingAudit entry) {
    if (entry.return_round < entry.request_round) throw std::invalid_argument("audit returns before its request");
    entry.sequence = next_sequence_++;
    entries_.emplace(std::make_pair(entry.return_round, entry.sequence), entry);
}

std::vector<PendingAudit> PendingAuditQueue::pop_due(std::uint64_t round) {
    std::vector<PendingAudit> due;
    auto it = entries_.begin();
    while (it != entries_.end() && it->first.first <= round) {
        due.push_back(it->second);
        it = entries_.erase(it);
    }
    return due;
}

std::pair<std::size_t, std::size_t> select_leader_challenger(std::span<const ConfidenceInterval> intervals) {
    if (intervals.size() < 2) throw std::invalid_argument("leader/challenger needs at least 2 arms");
    std::size_t leader = 0;
    for (std::size_t k = 1; k < intervals.size(); ++k) {
        if (intervals[k].point > intervals[leader].point) leader = k;
    }
    std::size_t challenger = leader == 0 ? 1 : 0;
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        if (k != leader && intervals[k].upper > intervals[challenger].upper) challenger = k;
    }
    return {leader, challenger};
}

bool check_stop(std::span<const ConfidenceInterval> intervals, std::size_t leader) {
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        if (k != leader && !(intervals[leader].lower > intervals[k].upper)) return false;
    }
    return true;
}

RunState::RunState(const RunConfig& config, const EnvironmentSpec& env)
    : config_(effective_config(config)),
      env_(&env),
      boundary_(BoundaryParams::make(config_.delta, env.arm_count, config_.pi_min, config_.budget)),
      auditor_(config_.auditor, env.arm_count, env.segment_count(), config_.cost_proxy, config_.cost_audit),
      acc_(env.arm_count, ArmAccumulator(config_.pi_min)),
      instance_rng_(arm_streams(config_.seed, kInstances, env.arm_count)),
      audit_rng_(arm_streams(config_.seed, kAuditCoins, env.arm_count)),
      delay_rng_(arm_streams(config_.seed, kDelays, env.arm_count)),
      late_sum_(env.segment_count(), 0.0),
      late_count_(env.segment_count(), 0) {
    config_.validate(env.arm_count);
    if (config_.record_trace) trace_.push_back(TraceRound{});
    for (std::size_t k = 0; k < env.arm_count; ++k) pull(k, {}, {}, true);
    if (config_.record_trace) trace_.back().cumulative_cost = ledger_.total();
}

std::vector<ConfidenceInterval> RunState::intervals() const {
    std::vector<ConfidenceInterval> out;
    out.reserve(acc_.size());
    for (const auto& a : acc_) out.push_back(interval(a, boundary_));
    return out;
}

void RunState::deliver_due() {
    for (const auto& e : queue_.pop_due(round_)) {
        acc_[e.arm].record_audit_return(e.propensity, e.residual);
        auditor_.observe_return(e.arm, e.segment, e.proxy, e.residual);
        ++delivered_;
        if (config_.record_trace) trace_.back().returned_arms.push_back(e.arm);
    }
}

void RunState::pull(std::size_t arm, const IntervalView& leader, const IntervalView& challenger, bool initial) {
    const Observation obs = sample_instance(*env_, arm, instance_rng_[arm]);
    acc_[arm].record_pull(obs.proxy);
    ledger_.pulls += 1;
    ledger_.proxy_cost += config_.cost_proxy;

    double propensity = 0.0;
    if (initial) {
        propensity = auditor_.proxy_only() ? 0.0 : config_.pi_min;
    } else {
        DecisionContext ctx{arm, obs.segment_index, obs.proxy, leader, challenger, std::nullopt};
        if (auditor_.needs_true_g()) ctx.true_g = obs.true_g;
        propensity = auditor_.probability(ctx);
    }
    if (!initial && static_cast<double>(ledger_.pulls) > config_.late_window * static_cast<double>(config_.t_max)) {
        late_sum_[obs.segment_index] += propensity;
        late_count_[obs.segment_index] += 1;
    }

    const bool audited = audit_rng_[arm].bernoulli(propensity);
    std::int64_t delay = -1;
    if (audited) {
        acc_[arm].record_audit_request(propensity);
        ledger_.audits_requested += 1;
        ledger_.audit_cost += config_.cost_audit;
        delay = sample_delay(config_.delay, delay_rng_[arm]);
        PendingAudit entry;
        entry.arm = arm;
        entry.request_round = round_;
        entry.return_round = round_ + 1 + static_cast<std::uint64_t>(delay);
        entry.propensity = propensity;
        entry.residual = obs.latent_outcome - obs.proxy;
        entry.segment = obs.segment_index;
        entry.proxy = obs.proxy;
        queue_.push(entry);
    }
    if (config_.record_trace) {
        trace_.back().pulls.push_back({arm, obs.segment_index, obs.proxy, propensity, audited, delay});
    }
}

bool RunState::step() {
    if (finished_) return false;
    ++round_;
    if (config_.record_trace) {
        trace_.push_back(TraceRound{});
        trace_.back().round = round_;
    }
    deliver_due();

    const auto cis = intervals();
    const auto [leader, challenger] = select_leader_challenger(cis);
    leader_ = leader;
    const bool stop = check_stop(cis, leader);
    if (config_.record_trace) {
        auto& tr = trace_.back();
        tr.leader = leader;
        tr.challenger = challenger;
        tr.stopped = stop;
        for (std::size_t k = 0; k < acc_.size(); ++k) {
            tr.arms.push_back({acc_[k].pulls(), acc_[k].pending_count(), acc_[k].proxy_sum(),
                               acc_[k].residual_ipw_sum(), cis[k].point, cis[k].lower, cis[k].upper});
        }
    }
    if (stop) {
        stopped_ = finished_ = true;
        if (config_.record_trace) trace_.back().cumulative_cost = ledger_.total();
        return false;
    }
    if (ledger_.pulls + 2 > config_.t_max) {
        finished_ = true;
        if (config_.record_trace) trace_.back().cumulative_cost = ledger_.total();
        return false;
    }
    const IntervalView lv{cis[leader].lower, cis[leader].upper};
    const IntervalView cv{cis[challenger].lower, cis[challenger].upper};
    pull(leader, lv, cv, false);
    pull(challenger, lv, cv, false);
    if (config_.record_trace) trace_.back().cumulative_cost = ledger_.total();
    return true;
}

RunResult RunState::result() const {
    RunResult r;
    r.leader = leader_;
    r.certified = stopped_;
    if (stopped_) r.selected_arm = leader_;
    r.proxy_only = auditor_.proxy_only();
    r.stop_round = round_;
    r.pulls = ledger_.pulls;
    r.cost = ledger_;
    r.total_cost = ledger_.total();
    r.audit_rate = ledger_.pulls ? static_cast<double>(ledger_.audits_requested) / static_cast<double>(ledger_.pulls) : 0.0;
    r.correct = r.selected_arm && *r.selected_arm == env_->best_arm();
    for (const auto& a : acc_) r.estimates.push_back(theta_hat(a));
    r.returns_delivered = delivered_;
    r.pending = queue_.size();
    r.late_propensity_sum = late_sum_;
    r.late_propensity_count = late_count_;
    r.trace = trace_;
    return r;
}

RunResult run(const RunConfig& config, const EnvironmentSpec& env) {
    if (config.strategy == Strategy::proxy_only || config.strategy == Strategy::naive_selective) {
        return run_baseline(config, env);
    }
    RunState state(config, env);
    while (state.step()) {
    }
    return state.result();
}

RunResult run_baseline(const RunConfig& config, const EnvironmentSpec& env) {
    if (config.strategy == Strategy::audit_only) {
        RunState state(config, env);
        while (state.step()) {
        }
        return state.result();
    }
    if (config.strategy == Strategy::pp_lucb) throw std::invalid_argument("run_baseline needs a baseline strategy");
    if (config.strategy == Strategy::naive_selective && env.kind != EnvKind::naive_bias_pair) {
        throw std::invalid_argument("naive_selective requires the naive-bias environment");
    }
    config.validate(env.arm_count);

    const std::size_t k_arms = env.arm_count;
    auto instance_rng = arm_streams(config.seed, kInstances, k_arms);
    auto audit_rng = arm_streams(config.seed, kAuditCoins, k_arms);
    std::vector<CompensatedSum> proxy_sum(k_arms), audited_sum(k_arms);
    std::vector<std::uint64_t> pulls(k_arms, 0), audits(k_arms, 0);
    CostLedger ledger;

    // Round-robin until the pull budget is spent.
    const bool naive = config.strategy == Strategy::naive_selective;
    for (std::uint64_t t = 0; t < config.t_max; ++t) {
        const std::size_t k = t % k_arms;
        const Observation obs = sample_instance(env, k, instance_rng[k]);
        proxy_sum[k].add(obs.proxy);
        ++pulls[k];
        ledger.pulls += 1;
        ledger.proxy_cost += config.cost_proxy;
        if (naive) {
            const double p = obs.proxy > 0.5 ? 1.0 : env.naive_pi_min;
            if (audit_rng[k].bernoulli(p)) {
                audited_sum[k].add(obs.latent_outcome);
                ++audits[k];
                ledger.audits_requested += 1;
                ledger.audit_cost += config.cost_audit;
            }
        }
    }

    RunResult r;
    r.proxy_only = !naive;
    r.stop_round = (config.t_max + k_arms - 1) / k_arms;
    r.pulls = ledger.pulls;
    r.cost = ledger;
    r.total_cost = ledger.total();
    r.audit_rate = static_cast<double>(ledger.audits_requested) / static_cast<double>(ledger.pulls);
    for (std::size_t k = 0; k < k_arms; ++k) {
        if (naive) {
            r.estimates.push_back(audits[k] ? audited_sum[k].value() / static_cast<double>(audits[k]) : 0.0);
        } else {
            r.estimates.push_back(pulls[k] ? proxy_sum[k].value() / static_cast<double>(pulls[k]) : 0.0);
        }
    }
    r.leader = argmax_first(r.estimates);
    r.selected_arm = r.leader;
    r.certified = false;
    r.correct = r.leader == env.best_arm();
    r.late_propensity_sum.assign(env.segment_count(), 0.0);
    r.late_propensity_count.assign(env.segment_count(), 0);
    return r;
}

}  // namespace ppbai
