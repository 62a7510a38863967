#pragma once

// Counter-based random streams.
//
// Every draw in the library is addressed by (stream key, counter words), so
// an increment for (particle, interval, step) can be regenerated without
// replaying anything before it. The block cipher is Philox4x32-10.

#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace mlpf {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) noexcept {
        for (int r = 0; r < 10; ++r) {
            ctr = round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile (Wichura, AS 241, PPND16). Relative accuracy
/// about 1e-16 over (0, 1).
inline double normal_quantile(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

/// Logical consumer of a stream. Distinct purposes never share draws.
enum class Purpose : std::uint32_t {
    Dynamics = 1,        // initial-law draws and Brownian increments
    Resampling = 2,
    Observations = 3,    // synthetic data: latent path and observation noise
    Auxiliary = 4,       // tests and diagnostics
};

/// Seed material identifying one stream.
struct StreamId {
    std::uint64_t seed = 0;
    std::uint32_t series = 0;
    std::uint32_t repeat = 0;
    std::uint32_t level = 0;
    std::uint32_t estimator = 0;  // which filter in a multilevel estimate
    Purpose purpose = Purpose::Dynamics;

    friend bool operator<(const StreamId& a, const StreamId& b) {
        return std::tie(a.seed, a.series, a.repeat, a.level, a.estimator, a.purpose) <
               std::tie(b.seed, b.series, b.repeat, b.level, b.estimator, b.purpose);
    }
    friend bool operator==(const StreamId&, const StreamId&) = default;

    std::string str() const {
        std::ostringstream os;
        os << "seed=" << seed << " series=" << series << " repeat=" << repeat
           << " level=" << level << " estimator=" << estimator
           << " purpose=" << static_cast<std::uint32_t>(purpose);
        return os.str();
    }
};

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// An addressable source of uniforms and standard normals.
///
/// Counter words: (a, b, c, lane). Callers use a = particle, b = interval or
/// observation index, c = step-pair or block index, and lane to separate
/// kinds of draws inside one stream.
class RandomStream {
public:
    RandomStream() : RandomStream(StreamId{}) {}
    explicit RandomStream(const StreamId& id) : id_(id) {
        std::uint64_t h = detail::mix64(id.seed);
        h = detail::mix64(h ^ id.series);
        h = detail::mix64(h ^ (std::uint64_t{id.repeat} << 20));
        h = detail::mix64(h ^ (std::uint64_t{id.level} << 40));
        h = detail::mix64(h ^ (std::uint64_t{id.estimator} << 8));
        h = detail::mix64(h ^ static_cast<std::uint64_t>(id.purpose));
        key_ = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    }

    const StreamId& id() const noexcept { return id_; }

    Philox4x32::Counter raw(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                            std::uint32_t lane) const noexcept {
        return Philox4x32::generate({a, b, c, lane}, key_);
    }

    std::array<double, 2> uniform_pair(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                                       std::uint32_t lane) const noexcept {
        const auto r = raw(a, b, c, lane);
        return {to_open_unit((std::uint64_t{r[0]} << 32) | r[1]),
                to_open_unit((std::uint64_t{r[2]} << 32) | r[3])};
    }

    std::array<double, 2> normal_pair(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                                      std::uint32_t lane) const noexcept {
        const auto u = uniform_pair(a, b, c, lane);
        return {normal_quantile(u[0]), normal_quantile(u[1])};
    }

private:
    StreamId id_;
    Philox4x32::Key key_{};
};

/// Sequential view over one lane of a stream, for serial consumers such as
/// data synthesis and Monte Carlo checks.
class SequentialDraws {
public:
    explicit SequentialDraws(RandomStream stream, std::uint32_t lane = 0, std::uint32_t a = 0)
        : stream_(std::move(stream)), lane_(lane), a_(a) {}

    double uniform() {
        refill();
        return buffer_[used_++];
    }
    double normal() { return normal_quantile(uniform()); }

private:
    void refill() {
        if (used_ < 2) return;
        buffer_ = stream_.uniform_pair(a_, static_cast<std::uint32_t>(counter_ >> 32),
                                       static_cast<std::uint32_t>(counter_), lane_);
        ++counter_;
        used_ = 0;
    }

    RandomStream stream_;
    std::uint32_t lane_;
    std::uint32_t a_;
    std::uint64_t counter_ = 0;
    std::array<double, 2> buffer_{};
    int used_ = 2;
};

/// Debug audit: records every stream claimed by an orchestrator and rejects a
/// second claim of the same identifier.
class StreamAudit {
public:
    explicit StreamAudit(bool enabled = false) : enabled_(enabled) {}

    bool enabled() const noexcept { return enabled_; }

    RandomStream claim(const StreamId& id) {
        if (enabled_) {
            std::lock_guard lock(mutex_);
            if (!claimed_.insert(id).second)
                throw std::logic_error("random stream claimed twice: " + id.str());
        }
        return RandomStream(id);
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return claimed_.size();
    }

private:
    bool enabled_;
    mutable std::mutex mutex_;
    std::set<StreamId> claimed_;
};

}  // namespace mlpf
