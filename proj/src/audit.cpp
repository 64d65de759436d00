#include "ppbai/audit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ppbai {
namespace {

double clip(double x, double lo, double hi) { return std::clamp(x, lo, hi); }

}  // namespace

std::string_view to_string(AuditVariant v) {
    switch (v) {
        case AuditVariant::uniform: return "uniform";
        case AuditVariant::price_of_precision: return "pop";
        case AuditVariant::uncertainty_weighted: return "uncertainty";
        case AuditVariant::neyman: return "neyman";
        case AuditVariant::oracle: return "oracle";
        case AuditVariant::fixed_threshold: return "threshold";
        case AuditVariant::never: return "never";
        case AuditVariant::always: return "always";
    }
    return "unknown";
}

AuditVariant parse_audit_variant(std::string_view name) {
    for (auto v : {AuditVariant::uniform, AuditVariant::price_of_precision, AuditVariant::uncertainty_weighted,
                   AuditVariant::neyman, AuditVariant::oracle, AuditVariant::fixed_threshold,
                   AuditVariant::never, AuditVariant::always}) {
        if (to_string(v) == name) return v;
    }
    throw std::invalid_argument("unknown auditor '" + std::string(name) + "'");
}

void AuditPolicyKind::validate() const {
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
    if (!(target_rate > 0.0 && target_rate <= 1.0)) throw std::invalid_argument("target_rate must lie in (0,1]");
    if (pi_min > target_rate) throw std::invalid_argument("pi_min must not exceed target_rate");
}

ResidualScaleModel::ResidualScaleModel(std::size_t segments, double prior_second_moment, double prior_weight)
    : segments_(std::max<std::size_t>(segments, 1)),
      prior_(prior_second_moment),
      prior_weight_(prior_weight),
      counts_(segments_ * kDeciles, 0),
      sum_sq_(segments_ * kDeciles, 0.0) {
    if (!(prior_second_moment > 0.0)) throw std::invalid_argument("prior second moment must be positive");
    if (!(prior_weight > 0.0)) throw std::invalid_argument("prior weight must be positive");
}

std::size_t ResidualScaleModel::decile(double proxy) {
    if (!(proxy >= 0.0 && proxy <= 1.0)) throw std::invalid_argument("proxy score must lie in [0,1]");
    return std::min<std::size_t>(kDeciles - 1, static_cast<std::size_t>(proxy * kDeciles));
}

std::size_t ResidualScaleModel::bin(std::size_t segment, double proxy) const {
    if (segment >= segments_) throw std::out_of_range("segment index out of range");
    return segment * kDeciles + decile(proxy);
}

void ResidualScaleModel::update(std::size_t segment, double proxy, double residual) {
    if (!(residual >= -1.0 && residual <= 1.0)) throw std::invalid_argument("residual must lie in [-1,1]");
    const std::size_t b = bin(segment, proxy);
    ++counts_[b];
    sum_sq_[b] += residual * residual;
}

double ResidualScaleModel::g_hat_bin(std::size_t b) const {
    return (prior_weight_ * prior_ + sum_sq_.at(b)) / (prior_weight_ + static_cast<double>(counts_.at(b)));
}

double ResidualScaleModel::s_hat(std::size_t segment, double proxy) const { return std::sqrt(g_hat(segment, proxy)); }

LambdaFit calibrate_lambda(std::span<const ScoredContext> contexts, double target_rate, double pi_min) {
    double total = 0.0;
    for (const auto& c : contexts) total += c.weight;
    if (contexts.empty() || total <= 0.0) return {1.0, clip(target_rate, pi_min, 1.0), false};

    auto mean_at = [&](double lambda) {
        double acc = 0.0;
        for (const auto& c : contexts) acc += c.weight * clip(lambda * c.score, pi_min, 1.0);
        return acc / total;
    };

    double lo = std::log(1e-6), hi = std::log(1e6);
    if (mean_at(std::exp(hi)) < target_rate - 1e-12) {
        return {std::exp(hi), mean_at(std::exp(hi)), true};
    }
    if (mean_at(std::exp(lo)) > target_rate + 1e-12) {
        return {std::exp(lo), mean_at(std::exp(lo)), true};
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mean_at(std::exp(mid)) < target_rate) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double lambda = std::exp(hi);
    return {lambda, mean_at(lambda), false};
}

double neyman_target_ratio(double g_high, double g_low) {
    if (!(g_high > 0.0 && g_low > 0.0)) throw std::invalid_argument("second moments must be positive");
    return std::sqrt(g_high / g_low);
}

Auditor::Auditor(AuditPolicyKind kind, std::size_t arms, std::size_t segments, double cost_proxy, double cost_audit)
    : kind_(kind), cost_ratio_sqrt_(std::sqrt(cost_proxy / cost_audit)) {
    kind_.validate();
    if (arms == 0) throw std::invalid_argument("auditor needs at least one arm");
    scale_.assign(arms, ResidualScaleModel(segments));
    bin_weight_.assign(arms, std::vector<double>(scale_.front().bin_count(), 0.0));
    arm_weight_.assign(arms, 0.0);
    level_weight_.assign(kOracleLevels + 1, 0.0);
    proxy_stats_.assign(arms, {});
    residual_stats_.assign(arms, {});
    // Prior score is sqrt(0.25) = 0.5, so the first pulls emit exactly rho.
    calib_.set_lambda(kind_.target_rate / 0.5);
}

double Auditor::pop_score(std::size_t arm) const {
    constexpr double prior_var = 0.25, prior_weight = 10.0;
    const auto& r = residual_stats_[arm];
    const auto& f = proxy_stats_[arm];
    const double var_r = (prior_weight * prior_var + r.m2) / (prior_weight + static_cast<double>(r.n));
    const double var_f = (1.0 * prior_var + f.m2) / (1.0 + static_cast<double>(f.n));
    return std::sqrt(var_r) / std::max(std::sqrt(var_f), 1e-3) * cost_ratio_sqrt_;
}

double Auditor::score(const DecisionContext& ctx) const {
    switch (kind_.variant) {
        case AuditVariant::neyman: return scale_.at(ctx.arm).s_hat(ctx.segment_index, ctx.proxy);
        case AuditVariant::oracle:
            if (!ctx.true_g) throw std::invalid_argument("oracle policy needs true_g");
            return std::sqrt(std::max(*ctx.true_g, 0.0));
        case AuditVariant::price_of_precision: return pop_score(ctx.arm);
        default: return 1.0;
    }
}

void Auditor::note_context(const DecisionContext& ctx) {
    switch (kind_.variant) {
        case AuditVariant::neyman:
            bin_weight_.at(ctx.arm)[scale_.at(ctx.arm).bin(ctx.segment_index, ctx.proxy)] += 1.0;
            break;
        case AuditVariant::oracle: {
            const double s = std::min(score(ctx), 1.0);
            level_weight_[static_cast<std::size_t>(std::lround(s * kOracleLevels))] += 1.0;
            break;
        }
        case AuditVariant::price_of_precision: arm_weight_.at(ctx.arm) += 1.0; break;
        default: break;
    }
}

void Auditor::recalibrate() {
    std::vector<ScoredContext> contexts;
    switch (kind_.variant) {
        case AuditVariant::neyman:
            for (std::size_t k = 0; k < bin_weight_.size(); ++k) {
                for (std::size_t b = 0; b < bin_weight_[k].size(); ++b) {
                    if (bin_weight_[k][b] > 0.0) {
                        contexts.push_back({bin_weight_[k][b], std::sqrt(scale_[k].g_hat_bin(b))});
                    }
                }
            }
            break;
        case AuditVariant::oracle:
            for (std::size_t l = 0; l < level_weight_.size(); ++l) {
                if (level_weight_[l] > 0.0) {
                    contexts.push_back({level_weight_[l], static_cast<double>(l) / kOracleLevels});
                }
            }
            break;
        case AuditVariant::price_of_precision:
            for (std::size_t k = 0; k < arm_weight_.size(); ++k) {
                if (arm_weight_[k] > 0.0) contexts.push_back({arm_weight_[k], pop_score(k)});
            }
            break;
        default: return;
    }
    calib_.set_lambda(calibrate_lambda(contexts, kind_.target_rate, kind_.pi_min).lambda);
}

double Auditor::probability(const DecisionContext& ctx) {
    const double rho = kind_.target_rate;
    const double pm = kind_.pi_min;
    double p = 0.0;
    switch (kind_.variant) {
        case AuditVariant::uniform: p = clip(rho, pm, 1.0); break;
        case AuditVariant::always: p = 1.0; break;
        case AuditVariant::never: p = 0.0; break;
        case AuditVariant::fixed_threshold: p = ctx.proxy > 0.5 ? 1.0 : pm; break;
        case AuditVariant::uncertainty_weighted: {
            const double width = ctx.leader.upper - ctx.leader.lower;
            const double overlap = std::max(0.0, ctx.challenger.upper - ctx.leader.lower);
            p = clip(rho * (1.0 + (width > 0.0 ? overlap / width : 0.0)), pm, 1.0);
            break;
        }
        case AuditVariant::neyman:
        case AuditVariant::oracle:
        case AuditVariant::price_of_precision: {
            if (kind_.variant == AuditVariant::price_of_precision) proxy_stats_.at(ctx.arm).add(ctx.proxy);
            note_context(ctx);
            const std::size_t seen = calib_.eligible_pulls() + 1;
            if (seen <= kRecalibrateEvery || seen % kRecalibrateEvery == 0) recalibrate();
            p = clip(calib_.lambda() * score(ctx), pm, 1.0);
            break;
        }
    }
    calib_.record(p);
    return p;
}

void Auditor::observe_return(std::size_t arm, std::size_t segment, double proxy, double residual) {
    scale_.at(arm).update(segment, proxy, residual);
    residual_stats_.at(arm).add(residual);
}

}  // namespace ppbai
