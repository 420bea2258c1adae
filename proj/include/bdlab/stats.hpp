#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "bdlab/errors.hpp"

namespace bdlab {

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // unbiased
    double se = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

inline double sample_mean(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m += v;
    return m / static_cast<double>(a.size());
}

inline double sample_variance(std::span<const double> a, double mean) {
    if (a.size() < 2) return 0.0;
    double acc = 0.0;
    for (double v : a) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(a.size() - 1);
}

inline SampleSummary summarize(std::span<const double> a) {
    if (a.empty()) throw DomainError("summarize requires at least one sample");
    SampleSummary s;
    s.n = a.size();
    s.mean = sample_mean(a);
    s.stddev = std::sqrt(sample_variance(a, s.mean));
    s.se = s.stddev / std::sqrt(static_cast<double>(s.n));
    s.ci95_low = s.mean - 1.96 * s.se;
    s.ci95_high = s.mean + 1.96 * s.se;
    return s;
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

// Two-sided tail probability of Student's t.
inline double t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw DomainError("t-distribution requires df > 0");
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Welch's unequal-variance t-test with Welch-Satterthwaite df.
inline TTestResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("welch_t requires n >= 2 per group");
    const double ma = sample_mean(a), mb = sample_mean(b);
    const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
    if (va == 0.0 && vb == 0.0)
        throw DegenerateInputError("welch_t: zero variance in both groups");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double qa = va / na, qb = vb / nb;
    TTestResult r;
    r.t = (ma - mb) / std::sqrt(qa + qb);
    r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

// One-sample t-test of mean against mu0. A zero-variance sample with mean
// exactly mu0 reports t = 0, p = 1; zero variance elsewhere is degenerate.
inline TTestResult one_sample_t(std::span<const double> a, double mu0) {
    if (a.size() < 2) throw DomainError("one_sample_t requires n >= 2");
    const double m = sample_mean(a);
    const double v = sample_variance(a, m);
    const double n = static_cast<double>(a.size());
    TTestResult r;
    r.df = n - 1.0;
    if (v == 0.0) {
        if (m == mu0) {
            r.t = 0.0;
            r.p = 1.0;
            return r;
        }
        throw DegenerateInputError("one_sample_t: zero variance away from mu0");
    }
    r.t = (m - mu0) / std::sqrt(v / n);
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

// Classical pooled-variance Cohen's d.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("cohens_d requires n >= 2 per group");
    const double ma = sample_mean(a), mb = sample_mean(b);
    const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
    if (pooled == 0.0) {
        if (ma == mb) return 0.0;
        throw DegenerateInputError("cohens_d: zero pooled variance with distinct means");
    }
    return (ma - mb) / pooled;
}

}  // namespace bdlab
