#pragma once

// Ensemble statistics: occupation histograms, peak detection on P(n),
// bifurcation bracketing, log-log power-law fits and KS distances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace monfermi {

inline constexpr int kDefaultBins = 100;

/// Fixed-bin histogram of values in [0, 1]. Values outside are clamped to the
/// end bins, and 1.0 falls in the last bin.
class Histogram {
public:
    explicit Histogram(int bin_count = kDefaultBins) : counts_(checked(bin_count), 0) {}

    void add(double value) {
        const int bins = bin_count();
        int k = static_cast<int>(std::floor(value * bins));
        k = std::clamp(k, 0, bins - 1);
        ++counts_[static_cast<std::size_t>(k)];
        ++total_;
    }

    template <class Range>
    void add_all(const Range& values) {
        for (double v : values) add(v);
    }

    int bin_count() const { return static_cast<int>(counts_.size()); }
    double bin_width() const { return 1.0 / bin_count(); }
    double bin_center(int k) const { return (k + 0.5) * bin_width(); }
    std::int64_t total() const { return total_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }

    /// Builds a histogram from explicit counts (total is their sum).
    static Histogram from_counts(std::vector<std::int64_t> counts) {
        Histogram h(static_cast<int>(counts.size()));
        h.counts_ = std::move(counts);
        h.total_ = 0;
        for (auto c : h.counts_) {
            if (c < 0) throw std::invalid_argument("Histogram: negative count");
            h.total_ += c;
        }
        return h;
    }

    /// Bin k <-> bin (bins - 1 - k), i.e. n <-> 1 - n.
    Histogram mirrored() const {
        std::vector<std::int64_t> c(counts_.rbegin(), counts_.rend());
        return from_counts(std::move(c));
    }

    /// Mean of bin centers weighted by counts.
    double binned_mean() const {
        if (total_ == 0) throw std::invalid_argument("Histogram: empty");
        double s = 0.0;
        for (int k = 0; k < bin_count(); ++k) s += bin_center(k) * counts_[k];
        return s / static_cast<double>(total_);
    }

    bool operator==(const Histogram&) const = default;

private:
    static std::size_t checked(int bins) {
        if (bins < 1) throw std::invalid_argument("Histogram: bin count must be >= 1");
        return static_cast<std::size_t>(bins);
    }

    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
};

inline Histogram merge(const Histogram& a, const Histogram& b) {
    if (a.bin_count() != b.bin_count()) {
        throw std::invalid_argument("merge: bin count mismatch (" +
                                    std::to_string(a.bin_count()) + " vs " +
                                    std::to_string(b.bin_count()) + ")");
    }
    std::vector<std::int64_t> c(a.counts());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += b.counts()[k];
    return Histogram::from_counts(std::move(c));
}

/// counts / (total * bin_width); integrates to one over [0, 1].
inline std::vector<double> normalized_density(const Histogram& h) {
    if (h.total() == 0) throw std::invalid_argument("normalized_density: empty histogram");
    std::vector<double> d(static_cast<std::size_t>(h.bin_count()));
    const double scale = 1.0 / (static_cast<double>(h.total()) * h.bin_width());
    for (int k = 0; k < h.bin_count(); ++k) d[k] = static_cast<double>(h.counts()[k]) * scale;
    return d;
}

enum class Modality { unimodal, bimodal };

inline const char* to_string(Modality m) {
    return m == Modality::bimodal ? "bimodal" : "unimodal";
}

struct MaximaReport {
    double n_plus = 0.5;
    std::optional<double> n_minus;
    double p_plus = 0.0;
    std::optional<double> p_minus;
    Modality modality = Modality::unimodal;
};

struct MaximaOptions {
    int smooth_window = 5;    // odd number of bins
    double prominence = 0.05; // fraction of the global peak height
};

/// Centered moving average; the window is truncated at the ends.
inline std::vector<double> moving_average(const std::vector<double>& x, int window) {
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("moving_average: window must be odd and >= 1");
    }
    const int n = static_cast<int>(x.size());
    const int half = window / 2;
    std::vector<double> out(x.size());
    for (int k = 0; k < n; ++k) {
        const int lo = std::max(0, k - half);
        const int hi = std::min(n - 1, k + half);
        double s = 0.0;
        for (int i = lo; i <= hi; ++i) s += x[i];
        out[k] = s / (hi - lo + 1);
    }
    return out;
}

namespace detail {

struct Peak {
    double position;  // in n-space
    double height;
    double prominence;
};

// Plateaus are collapsed to a single peak located at the plateau's middle.
// End bins count as peaks when they exceed their only neighbour.
inline std::vector<Peak> local_maxima(const std::vector<double>& s) {
    const int n = static_cast<int>(s.size());
    std::vector<Peak> peaks;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && s[j + 1] == s[i]) ++j;
        const bool rises_in = (i == 0) || s[i - 1] < s[i];
        const bool falls_out = (j == n - 1) || s[j + 1] < s[j];
        const bool whole = (i == 0 && j == n - 1);
        if (rises_in && falls_out && !whole) {
            const double v = s[i];
            // Topographic prominence: walk outwards until a strictly higher bin,
            // tracking the lowest value passed. A side with no bins is ignored.
            std::optional<double> left_min;
            for (int a = i - 1; a >= 0 && s[a] <= v; --a) {
                left_min = left_min ? std::min(*left_min, s[a]) : s[a];
            }
            std::optional<double> right_min;
            for (int b = j + 1; b < n && s[b] <= v; ++b) {
                right_min = right_min ? std::min(*right_min, s[b]) : s[b];
            }
            // A side that stopped at a higher bin immediately contributes v itself.
            if (!left_min && i > 0) left_min = v;
            if (!right_min && j < n - 1) right_min = v;
            double key = -1.0;
            if (left_min) key = std::max(key, *left_min);
            if (right_min) key = std::max(key, *right_min);
            const double pos = 0.5 * (i + j + 1) / static_cast<double>(n);
            peaks.push_back({pos, v, v - key});
        }
        i = j + 1;
    }
    return peaks;
}

}  // namespace detail

/// Locates the global and (if present) secondary maximum of a density on
/// uniform bins over [0, 1].
inline MaximaReport find_maxima_density(const std::vector<double>& density,
                                        const MaximaOptions& opt = {}) {
    if (density.empty()) throw std::invalid_argument("find_maxima: empty density");
    const int n = static_cast<int>(density.size());
    const std::vector<double> s = moving_average(density, opt.smooth_window);

    auto closer_to_half = [](double a, double b) {
        return std::abs(a - 0.5) < std::abs(b - 0.5);
    };
    auto taller = [&](const detail::Peak& a, const detail::Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        return closer_to_half(a.position, b.position);
    };

    std::vector<detail::Peak> peaks = detail::local_maxima(s);
    MaximaReport r;
    if (peaks.empty()) {
        // Flat: global argmax with ties resolved towards n = 1/2.
        int best = 0;
        for (int k = 1; k < n; ++k) {
            const double ck = (k + 0.5) / n;
            const double cb = (best + 0.5) / n;
            if (s[k] > s[best] || (s[k] == s[best] && closer_to_half(ck, cb))) best = k;
        }
        r.n_plus = (best + 0.5) / n;
        r.p_plus = s[best];
        return r;
    }
    std::sort(peaks.begin(), peaks.end(), taller);
    const double threshold = opt.prominence * peaks.front().height;
    std::vector<detail::Peak> kept{peaks.front()};
    for (std::size_t k = 1; k < peaks.size(); ++k) {
        if (peaks[k].prominence >= threshold && peaks[k].prominence > 0.0) kept.push_back(peaks[k]);
    }
    r.n_plus = kept[0].position;
    r.p_plus = kept[0].height;
    if (kept.size() >= 2) {
        r.n_minus = kept[1].position;
        r.p_minus = kept[1].height;
        r.modality = Modality::bimodal;
    }
    return r;
}

inline MaximaReport find_maxima(const Histogram& h, const MaximaOptions& opt = {}) {
    return find_maxima_density(normalized_density(h), opt);
}

struct BifurcationEstimate {
    bool found = false;
    double threshold = 0.0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    std::string message;
};

/// Midpoint between the largest unimodal gamma and the smallest bimodal gamma
/// above it. Input must be sorted by gamma.
inline BifurcationEstimate bifurcation_scan(
    const std::vector<std::pair<double, MaximaReport>>& reports) {
    for (std::size_t k = 1; k < reports.size(); ++k) {
        if (reports[k].first < reports[k - 1].first) {
            throw std::invalid_argument("bifurcation_scan: reports must be sorted by gamma");
        }
    }
    BifurcationEstimate out;
    std::optional<double> low;
    for (const auto& [g, rep] : reports) {
        if (rep.modality == Modality::unimodal) low = g;
    }
    std::optional<double> high;
    if (low) {
        for (const auto& [g, rep] : reports) {
            if (rep.modality == Modality::bimodal && g > *low) {
                high = g;
                break;
            }
        }
    }
    if (!low || !high) {
        out.message = "no bifurcation in scanned range";
        return out;
    }
    out.found = true;
    out.bracket_low = *low;
    out.bracket_high = *high;
    out.threshold = 0.5 * (*low + *high);
    return out;
}

struct PowerLawPoint {
    double size = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct PowerLawFit {
    double alpha = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<PowerLawPoint> points;
};

/// Least squares of ln(value) against ln(size); alpha = -slope.
///
/// With `weighted`, each point gets weight 1 / (stderr / value)^2, the variance
/// of ln(value) to first order. Points with zero stderr then make the fit
/// ill-defined and are rejected.
inline PowerLawFit fit_power_law(const std::vector<PowerLawPoint>& points, bool weighted = false) {
    std::vector<double> sizes;
    for (const auto& p : points) {
        if (!(p.value > 0.0)) throw std::invalid_argument("fit_power_law: values must be positive");
        if (!(p.size > 0.0)) throw std::invalid_argument("fit_power_law: sizes must be positive");
        if (std::find(sizes.begin(), sizes.end(), p.size) == sizes.end()) sizes.push_back(p.size);
    }
    if (sizes.size() < 3) {
        throw std::invalid_argument("fit_power_law: need at least 3 distinct sizes");
    }
    double sw = 0, sx = 0, sy = 0;
    std::vector<double> w(points.size(), 1.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (weighted) {
            const double rel = points[i].std_error / points[i].value;
            if (!(rel > 0.0)) throw std::invalid_argument("fit_power_law: weighted fit needs stderr > 0");
            w[i] = 1.0 / (rel * rel);
        }
        const double x = std::log(points[i].size);
        const double y = std::log(points[i].value);
        sw += w[i];
        sx += w[i] * x;
        sy += w[i] * y;
    }
    const double mx = sx / sw;
    const double my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double dx = std::log(points[i].size) - mx;
        const double dy = std::log(points[i].value) - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    const double slope = sxy / sxx;
    PowerLawFit fit;
    fit.alpha = -slope;
    fit.intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double r = std::log(points[i].value) - (fit.intercept + slope * std::log(points[i].size));
        ss_res += w[i] * r * r;
    }
    // A constant series is fitted exactly by a flat line.
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.points = points;
    return fit;
}

/// Largest absolute gap between the two empirical CDFs at the bin edges.
inline double ks_distance(const Histogram& a, const Histogram& b) {
    if (a.bin_count() != b.bin_count()) {
        throw std::invalid_argument("ks_distance: bin count mismatch");
    }
    if (a.total() == 0 || b.total() == 0) {
        throw std::invalid_argument("ks_distance: empty histogram");
    }
    double ca = 0.0, cb = 0.0, d = 0.0;
    const double ta = static_cast<double>(a.total());
    const double tb = static_cast<double>(b.total());
    for (int k = 0; k < a.bin_count(); ++k) {
        ca += a.counts()[k] / ta;
        cb += b.counts()[k] / tb;
        d = std::max(d, std::abs(ca - cb));
    }
    return std::min(d, 1.0);
}

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Sample mean and standard error of the mean (n - 1 normalization).
inline MeanStderr mean_stderr(const std::vector<double>& x) {
    MeanStderr m;
    m.count = x.size();
    if (x.empty()) return m;
    double s = 0.0;
    for (double v : x) s += v;
    m.mean = s / static_cast<double>(x.size());
    if (x.size() > 1) {
        double q = 0.0;
        for (double v : x) q += (v - m.mean) * (v - m.mean);
        m.std_error = std::sqrt(q / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    }
    return m;
}

}  // namespace monfermi
