// Property-check suites behind the `verify` command: the unbiasedness of
// each mark module, the statistical-difference lower bound under partial
// key recall, and the spike-entropy bound on the green-token rate of
// logits_add sampling.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "waterpool/mark.hpp"
#include "waterpool/parallel.hpp"
#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

/// Random test distributions: softmax of hashed standard-normal logits
/// scaled by 1/temperature, the same family the toy model emits.
inline std::vector<ProbVec> random_dists(std::size_t count, std::int32_t vocab_size,
                                         double temperature, std::uint64_t seed) {
    LmParams params;
    params.vocab_size = vocab_size;
    params.temperature = temperature;
    std::vector<ProbVec> dists(count);
    for (std::size_t d = 0; d < count; ++d) {
        params.model_seed = derive_u64(seed, d);
        dists[d] = next_dist(params, {});
    }
    return dists;
}

/// Total-variation distance between the Monte-Carlo mean of F(k, p) over
/// `trials` independent keys and p itself. Zero exactly for the identity
/// mark; degenerate marks contribute one-hot samples.
inline double unbiasedness_tv(const MarkModule& mark, const ProbVec& p, std::size_t trials,
                              std::uint64_t seed, int threads = 1) {
    if (mark.kind == MarkKind::none) return 0.0;

    const std::size_t vocab = p.size();
    const int shards = resolve_threads(threads);
    std::vector<std::vector<double>> shard_mean(static_cast<std::size_t>(shards),
                                                std::vector<double>(vocab, 0.0));
    parallel_for_shards(trials, shards, [&](std::size_t shard, std::size_t begin, std::size_t end) {
        std::vector<double>& mean = shard_mean[shard];
        for (std::size_t trial = begin; trial < end; ++trial) {
            const SubKey key{derive_u64(seed, trial)};
            switch (mark.kind) {
                case MarkKind::inverse_sample:
                    mean[static_cast<std::size_t>(its_transform(key, p))] += 1.0;
                    break;
                case MarkKind::gumbel_sample:
                    mean[static_cast<std::size_t>(exp_transform(key, p))] += 1.0;
                    break;
                case MarkKind::logits_add: {
                    const ProbVec q = kgw_reweight(key, p, mark.delta, mark.gamma);
                    for (std::size_t t = 0; t < vocab; ++t) mean[t] += q[t];
                    break;
                }
                case MarkKind::prob_scale: {
                    const ProbVec q = gamma_reweight(key, p);
                    for (std::size_t t = 0; t < vocab; ++t) mean[t] += q[t];
                    break;
                }
                default: break;
            }
        }
    });

    double tv = 0.0;
    for (std::size_t t = 0; t < vocab; ++t) {
        double mean_t = 0.0;
        for (const auto& m : shard_mean) mean_t += m[t];
        tv += std::abs(mean_t / static_cast<double>(trials) - p[t]);
    }
    return 0.5 * tv;
}

/// Watermark potential of the inverse_sample statistic: phi_its = C0 * phi,
/// C0 = (|V|+1) / (12 (|V|-1)).
inline double its_potential_constant(std::size_t vocab_size) {
    return (static_cast<double>(vocab_size) + 1.0) /
           (12.0 * (static_cast<double>(vocab_size) - 1.0));
}

/// Spike entropy sum_t p_t / (1 + c p_t).
inline double spike_entropy(const ProbVec& p, double c) {
    double s = 0.0;
    for (double v : p) s += v / (1.0 + c * v);
    return s;
}

/// Lower bound on the green-token sampling rate of logits_add generation:
/// (gamma a / (1 + (a-1) gamma)) * Spike(p, (1-gamma)(a-1)/(1+(a-1)gamma)),
/// a = e^delta. Strictly larger than gamma.
inline double kgw_green_rate_bound(const ProbVec& p, double delta, double gamma) {
    const double alpha = std::exp(delta);
    const double denom = 1.0 + (alpha - 1.0) * gamma;
    return (gamma * alpha / denom) * spike_entropy(p, (1.0 - gamma) * (alpha - 1.0) / denom);
}

struct StatDiffResult {
    double empirical = 0.0;  // mean(S | H1, recall) - mean(S | H0)
    double bound = 0.0;      // p_recall * phi(p)
    double sigma = 0.0;      // Monte-Carlo standard error of `empirical`
};

/// Estimates the statistical difference of a mark module when the detector
/// restores the correct key only with probability p_recall (a wrong
/// restoration is simulated by an independent key).
inline StatDiffResult statdiff(const MarkModule& mark, const ProbVec& p, double p_recall,
                               std::size_t trials, std::uint64_t seed) {
    const std::size_t vocab = p.size();
    double sum1 = 0.0, sumsq1 = 0.0, sum0 = 0.0, sumsq0 = 0.0;
    double phi_golden = 0.0;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        SplitMix64 rng(derive_u64(seed, trial));
        const SubKey gen_key{rng.next()};
        const SubKey other_key{rng.next()};
        const bool recalled = rng.next_unit() < p_recall;
        const SubKey restored = recalled ? gen_key : other_key;

        double s1, s0;
        switch (mark.kind) {
            case MarkKind::gumbel_sample: {
                const Token y1 = exp_transform(gen_key, p);
                s1 = exp_statistic(restored, y1);
                s0 = exp_statistic(SubKey{rng.next()}, sample_token(p, rng.next_unit()));
                break;
            }
            case MarkKind::inverse_sample: {
                const Token y1 = its_transform(gen_key, p);
                s1 = its_statistic(restored, y1, vocab);
                s0 = its_statistic(SubKey{rng.next()}, sample_token(p, rng.next_unit()), vocab);
                break;
            }
            case MarkKind::logits_add: {
                const ProbVec q = kgw_reweight(gen_key, p, mark.delta, mark.gamma);
                const Token y1 = sample_token(q, rng.next_unit());
                s1 = in_green_list(restored, y1, vocab, mark.gamma) ? 1.0 : 0.0;
                s0 = in_green_list(SubKey{rng.next()}, sample_token(p, rng.next_unit()), vocab,
                                   mark.gamma)
                         ? 1.0
                         : 0.0;
                break;
            }
            default:
                throw std::invalid_argument("statdiff: unsupported mark kind");
        }
        sum1 += s1;
        sumsq1 += s1 * s1;
        sum0 += s0;
        sumsq0 += s0 * s0;
    }

    const double n = static_cast<double>(trials);
    const double mean1 = sum1 / n;
    const double mean0 = sum0 / n;
    const double var1 = sumsq1 / n - mean1 * mean1;
    const double var0 = sumsq0 / n - mean0 * mean0;

    switch (mark.kind) {
        case MarkKind::gumbel_sample: phi_golden = watermark_potential(p); break;
        case MarkKind::inverse_sample:
            phi_golden = its_potential_constant(vocab) * watermark_potential(p);
            break;
        case MarkKind::logits_add:
            phi_golden = kgw_green_rate_bound(p, mark.delta, mark.gamma) - mark.gamma;
            break;
        default: break;
    }

    StatDiffResult r;
    r.empirical = mean1 - mean0;
    r.bound = p_recall * phi_golden;
    r.sigma = std::sqrt((var1 + var0) / n);
    return r;
}

/// Empirical green-token rate of logits_add generation under golden keys.
inline double kgw_green_rate(const ProbVec& p, double delta, double gamma, std::size_t trials,
                             std::uint64_t seed) {
    std::size_t greens = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        SplitMix64 rng(derive_u64(seed, trial));
        const SubKey key{rng.next()};
        const Token y = sample_token(kgw_reweight(key, p, delta, gamma), rng.next_unit());
        if (in_green_list(key, y, p.size(), gamma)) ++greens;
    }
    return static_cast<double>(greens) / static_cast<double>(trials);
}

}  // namespace waterpool
