#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bdlab/errors.hpp"

namespace bdlab {

struct Segment {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;  // half-open

    std::size_t size() const { return end - begin; }
};

// An ordered set of named, contiguous, non-overlapping ranges that partitions
// a flat vector exactly.
class SegmentMap {
public:
    SegmentMap() = default;

    explicit SegmentMap(std::vector<Segment> segments) : segments_(std::move(segments)) {
        std::size_t cursor = 0;
        for (const Segment& s : segments_) {
            if (s.begin != cursor || s.end < s.begin)
                throw DomainError("segment map has a gap or overlap at " + s.name);
            cursor = s.end;
        }
        total_ = cursor;
    }

    const std::vector<Segment>& segments() const { return segments_; }
    std::size_t total_size() const { return total_; }

    const Segment& at(const std::string& name) const {
        for (const Segment& s : segments_)
            if (s.name == name) return s;
        throw DomainError("no segment named " + name);
    }

    bool operator==(const SegmentMap& other) const {
        if (total_ != other.total_ || segments_.size() != other.segments_.size()) return false;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            if (segments_[i].name != other.segments_[i].name ||
                segments_[i].begin != other.segments_[i].begin ||
                segments_[i].end != other.segments_[i].end)
                return false;
        }
        return true;
    }

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
};

using SegmentMapPtr = std::shared_ptr<const SegmentMap>;

// Flat parameter-gradient vector with a per-layer segmentation map and a lazy
// L2-norm cache. Mutating access invalidates the cache.
class GradientVector {
public:
    GradientVector() = default;

    explicit GradientVector(SegmentMapPtr map)
        : map_(std::move(map)), values_(map_->total_size(), 0.0) {}

    GradientVector(SegmentMapPtr map, std::vector<double> values)
        : map_(std::move(map)), values_(std::move(values)) {
        if (values_.size() != map_->total_size())
            throw DomainError("gradient values do not match segmentation map size");
    }

    const SegmentMapPtr& map() const { return map_; }
    std::size_t size() const { return values_.size(); }

    std::span<const double> values() const { return values_; }
    std::span<double> mutable_values() {
        norm_valid_ = false;
        return values_;
    }

    double operator[](std::size_t i) const { return values_[i]; }

    std::span<const double> segment(const std::string& name) const {
        const Segment& s = map_->at(name);
        return {values_.data() + s.begin, s.size()};
    }
    std::span<double> mutable_segment(const std::string& name) {
        norm_valid_ = false;
        const Segment& s = map_->at(name);
        return {values_.data() + s.begin, s.size()};
    }

    void set_zero() {
        norm_valid_ = false;
        std::fill(values_.begin(), values_.end(), 0.0);
    }

    void scale(double k) {
        norm_valid_ = false;
        for (double& v : values_) v *= k;
    }

    // this += alpha * other
    void axpy(double alpha, const GradientVector& other) {
        require_same_map(other);
        norm_valid_ = false;
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * other.values_[i];
    }

    double norm() const {
        if (!norm_valid_) {
            double acc = 0.0;
            for (double v : values_) acc += v * v;
            norm_cache_ = std::sqrt(acc);
            norm_valid_ = true;
        }
        return norm_cache_;
    }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // New vector holding only the named segments, with a fresh map.
    GradientVector subvector(const std::vector<std::string>& names) const {
        std::vector<Segment> segs;
        std::vector<double> vals;
        std::size_t cursor = 0;
        for (const std::string& n : names) {
            const Segment& s = map_->at(n);
            segs.push_back({n, cursor, cursor + s.size()});
            cursor += s.size();
            vals.insert(vals.end(), values_.begin() + static_cast<std::ptrdiff_t>(s.begin),
                        values_.begin() + static_cast<std::ptrdiff_t>(s.end));
        }
        return GradientVector(std::make_shared<SegmentMap>(std::move(segs)), std::move(vals));
    }

    void require_same_map(const GradientVector& other) const {
        if (map_ == other.map_) return;
        if (!map_ || !other.map_ || !(*map_ == *other.map_))
            throw DomainError("gradient segmentation maps do not match");
    }

private:
    SegmentMapPtr map_;
    std::vector<double> values_;
    mutable double norm_cache_ = 0.0;
    mutable bool norm_valid_ = false;
};

inline double dot(const GradientVector& a, const GradientVector& b) {
    a.require_same_map(b);
    double acc = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    return acc;
}

// c = alpha*a + beta*b as a new vector.
inline GradientVector linear_combination(double alpha, const GradientVector& a, double beta,
                                         const GradientVector& b) {
    a.require_same_map(b);
    GradientVector out(a.map());
    auto vo = out.mutable_values();
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = alpha * va[i] + beta * vb[i];
    return out;
}

}  // namespace bdlab
