#pragma once
// Causal-model variables and the paired significance statistics built on them:
// individual causal effects, discordance counts, McNemar's chi-square
// statistic, its chi-square(1) tail probability, and the signed unified
// causal significance (UCS).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "bicausal/errors.hpp"

namespace bicausal {

// ---------------------------------------------------------------------------
// Bias state (node B)

enum class BiasState : std::uint8_t { Pro, Anti, Non };

inline constexpr BiasState kAllBiasStates[] = {BiasState::Pro, BiasState::Anti, BiasState::Non};

constexpr std::string_view to_string(BiasState s) noexcept {
    switch (s) {
        case BiasState::Pro: return "Pro";
        case BiasState::Anti: return "Anti";
        case BiasState::Non: return "Non";
    }
    return "?";
}

inline BiasState parse_bias_state(std::string_view s) {
    if (s == "Pro") return BiasState::Pro;
    if (s == "Anti") return BiasState::Anti;
    if (s == "Non") return BiasState::Non;
    throw ValidationError("unknown bias state '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Hallucination state (node H): 1 = hallucination present.

class HallucinationState {
public:
    constexpr HallucinationState() noexcept = default;
    explicit constexpr HallucinationState(bool present) noexcept : present_(present) {}

    static HallucinationState from_int(int v) {
        if (v != 0 && v != 1) {
            throw DomainError("hallucination state must be 0 or 1, got " + std::to_string(v));
        }
        return HallucinationState(v == 1);
    }

    constexpr bool present() const noexcept { return present_; }
    constexpr int value() const noexcept { return present_ ? 1 : 0; }

    friend constexpr bool operator==(HallucinationState, HallucinationState) noexcept = default;

private:
    bool present_ = false;
};

// ---------------------------------------------------------------------------
// Ordered pair of interventions compared by one ICE.

enum class PairType : std::uint8_t { ProAnti, NonPro, NonAnti };

inline constexpr PairType kAllPairTypes[] = {PairType::ProAnti, PairType::NonPro, PairType::NonAnti};

// (treatment applied to the first member, treatment applied to the second)
constexpr std::pair<BiasState, BiasState> states_of(PairType t) noexcept {
    switch (t) {
        case PairType::ProAnti: return {BiasState::Pro, BiasState::Anti};
        case PairType::NonPro: return {BiasState::Non, BiasState::Pro};
        case PairType::NonAnti: return {BiasState::Non, BiasState::Anti};
    }
    return {BiasState::Pro, BiasState::Anti};
}

constexpr std::string_view to_string(PairType t) noexcept {
    switch (t) {
        case PairType::ProAnti: return "ProAnti";
        case PairType::NonPro: return "NonPro";
        case PairType::NonAnti: return "NonAnti";
    }
    return "?";
}

// Display form used in report tables ("Pro-Anti").
constexpr std::string_view display_name(PairType t) noexcept {
    switch (t) {
        case PairType::ProAnti: return "Pro-Anti";
        case PairType::NonPro: return "Non-Pro";
        case PairType::NonAnti: return "Non-Anti";
    }
    return "?";
}

inline PairType parse_pair_type(std::string_view s) {
    if (s == "ProAnti" || s == "Pro-Anti") return PairType::ProAnti;
    if (s == "NonPro" || s == "Non-Pro") return PairType::NonPro;
    if (s == "NonAnti" || s == "Non-Anti") return PairType::NonAnti;
    throw ValidationError("unknown pair type '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Individual causal effect, H(first) - H(second).

class IceValue {
public:
    constexpr IceValue() noexcept = default;

    static IceValue from_int(int v) {
        if (v < -1 || v > 1) throw DomainError("ICE must be -1, 0 or 1, got " + std::to_string(v));
        return IceValue(static_cast<std::int8_t>(v));
    }

    constexpr int value() const noexcept { return value_; }

    friend constexpr bool operator==(IceValue, IceValue) noexcept = default;

private:
    friend constexpr IceValue compute_ice(HallucinationState, HallucinationState) noexcept;
    explicit constexpr IceValue(std::int8_t v) noexcept : value_(v) {}
    std::int8_t value_ = 0;
};

constexpr IceValue compute_ice(HallucinationState h_first, HallucinationState h_second) noexcept {
    return IceValue(static_cast<std::int8_t>(h_first.value() - h_second.value()));
}

// ---------------------------------------------------------------------------
// Discordance counts: b = #(ICE=+1), c = #(ICE=-1).

struct DiscordanceCounts {
    std::uint64_t b = 0;
    std::uint64_t c = 0;
    std::uint64_t n_zero = 0;
    std::uint64_t n_total = 0;

    // Same counts seen from the opposite ordering of the pair.
    constexpr DiscordanceCounts reversed() const noexcept { return {c, b, n_zero, n_total}; }

    constexpr bool consistent() const noexcept { return b + c + n_zero == n_total; }

    friend constexpr bool operator==(const DiscordanceCounts&, const DiscordanceCounts&) noexcept = default;
};

inline DiscordanceCounts tally_discordance(std::span<const IceValue> ices) noexcept {
    DiscordanceCounts out;
    for (IceValue v : ices) {
        switch (v.value()) {
            case 1: ++out.b; break;
            case -1: ++out.c; break;
            default: ++out.n_zero; break;
        }
    }
    out.n_total = ices.size();
    return out;
}

// ---------------------------------------------------------------------------
// McNemar statistic

enum class Correction : std::uint8_t {
    None,     // (b-c)^2 / (b+c)
    Edwards,  // (|b-c|-1)^2 / (b+c), floored at zero
};

// Returns 0 when there are no discordant pairs.
inline double mcnemar_statistic(const DiscordanceCounts& counts,
                                Correction correction = Correction::None) noexcept {
    const std::uint64_t discordant = counts.b + counts.c;
    if (discordant == 0) return 0.0;
    const double diff = counts.b > counts.c ? static_cast<double>(counts.b - counts.c)
                                            : static_cast<double>(counts.c - counts.b);
    double num = diff;
    if (correction == Correction::Edwards) num = diff > 1.0 ? diff - 1.0 : 0.0;
    return num * num / static_cast<double>(discordant);
}

// ---------------------------------------------------------------------------
// Complementary error function.
//
// x < 2.5: erf from the positive-term series
//     erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))
// x >= 2.5: Lentz evaluation of
//     erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// Absolute error is below 1e-15 on [0, inf).

namespace detail {

inline double erf_series(double x) noexcept {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < 500; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x2) * sum;
}

inline double erfc_continued_fraction(double x) noexcept {
    constexpr double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 500; ++n) {
        const double a = 0.5 * n;
        d = x + a * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x * x) / std::sqrt(std::numbers::pi) / f;
}

}  // namespace detail

inline double erfc(double x) noexcept {
    if (std::isnan(x)) return x;
    if (x < 0.0) return 2.0 - erfc(-x);
    if (x > 27.3) return 0.0;  // below the smallest subnormal
    if (x < 2.5) return 1.0 - detail::erf_series(x);
    return detail::erfc_continued_fraction(x);
}

// P(chi^2_1 > x) = erfc(sqrt(x/2)).
inline double chi_square_1df_survival(double x) {
    if (std::isnan(x) || x < 0.0) {
        throw DomainError("chi-square survival needs x >= 0");
    }
    if (std::isinf(x)) return 0.0;
    const double p = erfc(std::sqrt(0.5 * x));
    return p > 1.0 ? 1.0 : (p < 0.0 ? 0.0 : p);
}

// ---------------------------------------------------------------------------
// Full causal test of one cell.

enum class Direction : std::uint8_t { Positive, Negative, NoEffect };

constexpr std::string_view to_string(Direction d) noexcept {
    switch (d) {
        case Direction::Positive: return "Positive";
        case Direction::Negative: return "Negative";
        case Direction::NoEffect: return "NoEffect";
    }
    return "?";
}

inline constexpr double kDefaultAlpha = 0.05;

struct CausalTestResult {
    double statistic_x = 0.0;
    double p_two_tailed = 1.0;
    double p_one_tailed = 1.0;  // in the direction of sign(b - c)
    double ucs = 0.0;           // sign(b - c) * statistic_x
    Direction direction = Direction::NoEffect;
    bool significant = false;   // p_two_tailed < alpha
    double alpha = kDefaultAlpha;

    friend bool operator==(const CausalTestResult&, const CausalTestResult&) = default;
};

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
}

inline CausalTestResult causal_test(const DiscordanceCounts& counts, double alpha = kDefaultAlpha,
                                    Correction correction = Correction::None) {
    check_alpha(alpha);
    CausalTestResult r;
    r.alpha = alpha;
    r.statistic_x = mcnemar_statistic(counts, correction);
    r.p_two_tailed = chi_square_1df_survival(r.statistic_x);
    if (counts.b > counts.c) {
        r.direction = Direction::Positive;
        r.ucs = r.statistic_x;
    } else if (counts.b < counts.c) {
        r.direction = Direction::Negative;
        r.ucs = -r.statistic_x;
    } else {
        r.direction = Direction::NoEffect;
        r.ucs = 0.0;
    }
    r.p_one_tailed = r.direction == Direction::NoEffect ? 1.0 : 0.5 * r.p_two_tailed;
    r.significant = r.p_two_tailed < alpha;
    return r;
}

inline CausalTestResult causal_test(std::span<const IceValue> ices, double alpha = kDefaultAlpha,
                                    Correction correction = Correction::None) {
    return causal_test(tally_discordance(ices), alpha, correction);
}

// ---------------------------------------------------------------------------

inline double hallucination_rate(std::span<const HallucinationState> trials) {
    if (trials.empty()) throw DomainError("hallucination rate of an empty sample");
    std::uint64_t hits = 0;
    for (auto h : trials) hits += h.present() ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(trials.size());
}

}  // namespace bicausal
