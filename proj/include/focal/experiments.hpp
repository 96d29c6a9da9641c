#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "focal/errors.hpp"
#include "focal/idx.hpp"
#include "focal/minimizer.hpp"
#include "focal/pmf.hpp"
#include "focal/rng.hpp"
#include "focal/scalar.hpp"

// Desk-scale empirical validation. A two-feature binary-class world with
// known ground truth is generated (or ingested from MNIST), a minimal
// one-hidden-layer softmax network is trained on it with the focal loss,
// and the learned posterior is compared per feature bin against the
// theoretical minimizer of the population focal risk.

namespace focal {

// 16 bins, indexed f1 * 4 + f2. Rows with zero samples carry NaN.
using PosteriorTable = std::array<std::array<double, 2>, 16>;

struct SyntheticSpec {
    std::array<double, 2> class_prior{0.95, 0.05};
    std::array<std::array<double, 4>, 2> f1_given_c{{{0.65, 0.20, 0.10, 0.05}, {0.10, 0.25, 0.45, 0.20}}};
    std::array<std::array<double, 4>, 2> f2_given_c{{{0.50, 0.30, 0.15, 0.05}, {0.20, 0.50, 0.20, 0.10}}};
    std::size_t sample_count = 10000;
    std::uint64_t seed = 0;
};

struct BinnedSample {
    std::uint8_t f1;
    std::uint8_t f2;
    std::uint8_t c;
};

struct BinnedDataset {
    std::vector<BinnedSample> rows;
    PosteriorTable posterior;       // empirical
    std::array<long, 16> counts;
};

namespace detail {

inline void validate_rows_sum_to_one(const std::array<std::array<double, 4>, 2>& table,
                                     const char* name) {
    for (const auto& row : table) {
        double s = 0.0;
        for (double v : row) {
            if (!(std::isfinite(v) && v >= 0.0)) {
                throw std::invalid_argument(std::string(name) + ": entries must be non-negative");
            }
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-12) {
            throw std::invalid_argument(std::string(name) + ": rows must sum to 1");
        }
    }
}

inline void validate_spec(const SyntheticSpec& spec) {
    if (std::fabs(spec.class_prior[0] + spec.class_prior[1] - 1.0) > 1e-12) {
        throw std::invalid_argument("SyntheticSpec: class prior must sum to 1");
    }
    validate_rows_sum_to_one(spec.f1_given_c, "f1_given_c");
    validate_rows_sum_to_one(spec.f2_given_c, "f2_given_c");
}

inline PosteriorTable empirical_posterior(const std::vector<BinnedSample>& rows,
                                          std::array<long, 16>& counts) {
    std::array<std::array<long, 2>, 16> hits{};
    counts.fill(0);
    for (const auto& s : rows) {
        int bin = s.f1 * 4 + s.f2;
        ++counts[bin];
        ++hits[bin][s.c];
    }
    PosteriorTable post{};
    for (int b = 0; b < 16; ++b) {
        if (counts[b] == 0) {
            post[b] = {std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
        } else {
            post[b] = {static_cast<double>(hits[b][0]) / counts[b],
                       static_cast<double>(hits[b][1]) / counts[b]};
        }
    }
    return post;
}

}  // namespace detail

/// Exact posterior P[C | F1, F2] for every bin, from the factorized joint
/// P[C] P[F1|C] P[F2|C].
inline PosteriorTable synthetic_posterior(const SyntheticSpec& spec) {
    detail::validate_spec(spec);
    PosteriorTable post{};
    for (int f1 = 0; f1 < 4; ++f1) {
        for (int f2 = 0; f2 < 4; ++f2) {
            double j0 = spec.class_prior[0] * spec.f1_given_c[0][f1] * spec.f2_given_c[0][f2];
            double j1 = spec.class_prior[1] * spec.f1_given_c[1][f1] * spec.f2_given_c[1][f2];
            double z = j0 + j1;
            int b = f1 * 4 + f2;
            if (z == 0.0) {
                post[b] = {std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()};
            } else {
                post[b] = {j0 / z, j1 / z};
            }
        }
    }
    return post;
}

/// The population focal-risk optimum for one posterior row: the classifier
/// trained with focus gamma should converge to this, not to the posterior
/// itself.
inline Pmf theory_target(FocusParam gamma, const Pmf& posterior_row) {
    return solve_minimizer(gamma, posterior_row).p_star;
}

/// Draws (C, F1, F2) i.i.d. from the joint a SyntheticSpec describes. Per
/// sample the class is drawn first, then each feature conditionally; bins
/// are the raw categorical values.
inline BinnedDataset sample_synthetic(const SyntheticSpec& spec) {
    detail::validate_spec(spec);
    Rng rng(spec.seed);
    BinnedDataset data{};
    data.rows.reserve(spec.sample_count);
    for (std::size_t i = 0; i < spec.sample_count; ++i) {
        std::uint8_t c = rng.unit() < spec.class_prior[0] ? 0 : 1;
        std::uint8_t f1 = static_cast<std::uint8_t>(rng.categorical(spec.f1_given_c[c].data(), 4));
        std::uint8_t f2 = static_cast<std::uint8_t>(rng.categorical(spec.f2_given_c[c].data(), 4));
        data.rows.push_back(BinnedSample{f1, f2, c});
    }
    data.posterior = detail::empirical_posterior(data.rows, data.counts);
    return data;
}

/// MNIST ingestion. Class 1 is the digit "1", class 0 everything else.
/// F1 is the upper-half share of total pixel intensity, F2 the left-half
/// share, each quantized into 4 bins at its empirical 25/50/75 nearest-rank
/// percentiles over the whole set; values equal to a cut point go to the
/// lower bin.
inline BinnedDataset ingest_mnist(const std::string& images_path, const std::string& labels_path) {
    IdxImages images = read_idx_images(images_path);
    IdxLabels labels = read_idx_labels(labels_path);
    if (images.rows != 28 || images.cols != 28) {
        throw std::runtime_error("ingest_mnist: expected 28x28 images");
    }
    if (images.count != labels.count) {
        throw std::runtime_error("ingest_mnist: image/label counts differ");
    }

    std::size_t n = images.count;
    std::vector<double> f1(n), f2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* px = images.image(i);
        double total = 0.0, upper = 0.0, left = 0.0;
        for (std::uint32_t r = 0; r < 28; ++r) {
            for (std::uint32_t c = 0; c < 28; ++c) {
                double v = px[r * 28 + c];
                total += v;
                if (r < 14) upper += v;
                if (c < 14) left += v;
            }
        }
        f1[i] = upper / (total + 1e-9);
        f2[i] = left / (total + 1e-9);
    }

    auto cuts_of = [&](const std::vector<double>& v) {
        std::vector<double> sorted(v);
        std::sort(sorted.begin(), sorted.end());
        std::array<double, 3> cuts{};
        for (int k = 1; k <= 3; ++k) {
            std::size_t rank = (v.size() * static_cast<std::size_t>(25 * k) + 99) / 100;  // ceil
            cuts[k - 1] = sorted[rank - 1];
        }
        return cuts;
    };
    auto bin_of = [](double v, const std::array<double, 3>& cuts) {
        if (v <= cuts[0]) return std::uint8_t{0};
        if (v <= cuts[1]) return std::uint8_t{1};
        if (v <= cuts[2]) return std::uint8_t{2};
        return std::uint8_t{3};
    };
    auto c1 = cuts_of(f1), c2 = cuts_of(f2);

    BinnedDataset data{};
    data.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        data.rows.push_back(BinnedSample{bin_of(f1[i], c1), bin_of(f2[i], c2),
                                         static_cast<std::uint8_t>(labels.labels[i] == 1 ? 1 : 0)});
    }
    data.posterior = detail::empirical_posterior(data.rows, data.counts);
    return data;
}

struct TrainConfig {
    double gamma = 1.0;
    int hidden_width = 64;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainRun {
    TrainConfig config;
    PosteriorTable learned;               // network output for all 16 bins
    std::vector<double> loss_trajectory;  // mean per-sample loss per epoch
};

namespace detail {

// One-hidden-layer softmax network on the 8-dimensional one-hot encoding
// of (F1, F2). The input structure is exploited: multiplying by a one-hot
// pair is a two-column gather, and its gradient touches two columns.
class BinNet {
public:
    BinNet(int hidden, std::uint64_t seed) : h_(hidden), w1_(8 * hidden), b1_(hidden), w2_(2 * hidden), b2_(2) {
        Rng rng(seed);
        double s1 = 1.0 / std::sqrt(8.0);
        for (double& w : w1_) w = rng.uniform(-s1, s1);
        double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (double& w : w2_) w = rng.uniform(-s2, s2);
    }

    // Returns the softmax output for one bin pair.
    std::array<double, 2> forward(int f1, int f2, std::vector<double>& hidden) const {
        for (int j = 0; j < h_; ++j) {
            double a = b1_[j] + w1_[f1 * h_ + j] + w1_[(4 + f2) * h_ + j];
            hidden[j] = a > 0.0 ? a : 0.0;
        }
        std::array<double, 2> z{b2_[0], b2_[1]};
        for (int j = 0; j < h_; ++j) {
            z[0] += w2_[j] * hidden[j];
            z[1] += w2_[h_ + j] * hidden[j];
        }
        double m = std::fmax(z[0], z[1]);
        double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
        double zsum = e0 + e1;
        return {e0 / zsum, e1 / zsum};
    }

    std::size_t parameter_count() const { return w1_.size() + b1_.size() + w2_.size() + b2_.size(); }

    template <typename F>
    void for_each_parameter(F&& f) {
        for (double& w : w1_) f(w);
        for (double& w : b1_) f(w);
        for (double& w : w2_) f(w);
        for (double& w : b2_) f(w);
    }

    int h_;
    std::vector<double> w1_;  // column-major: input index * hidden + j
    std::vector<double> b1_;
    std::vector<double> w2_;  // output index * hidden + j
    std::vector<double> b2_;
};

}  // namespace detail

/// Focal-loss gradient with respect to the logits: phi(p_c) (p_j - 1[j=c]).
/// At gamma = 0 phi is identically 1 and this is exactly the softmax
/// cross-entropy gradient.
inline std::array<double, 2> focal_logit_gradient(FocusParam gamma, const std::array<double, 2>& p, int c) {
    double scale = phi(gamma, std::fmax(p[c], 1e-300));
    std::array<double, 2> g{};
    for (int j = 0; j < 2; ++j) {
        g[j] = scale * (p[j] - (j == c ? 1.0 : 0.0));
    }
    return g;
}

/// Trains the bin classifier with adaptive-moment stochastic gradient on
/// the mean per-sample focal loss. Deterministic given (config.seed);
/// single-threaded.
inline TrainRun train_classifier(const BinnedDataset& data, const TrainConfig& config) {
    if (data.rows.empty()) throw std::invalid_argument("train_classifier: empty dataset");
    FocusParam gamma{config.gamma};

    detail::BinNet net(config.hidden_width, config.seed);
    int h = config.hidden_width;
    std::vector<double> gw1(8 * h), gb1(h), gw2(2 * h), gb2(2);
    std::vector<double> m(net.parameter_count(), 0.0), v(net.parameter_count(), 0.0);
    std::vector<double> hidden(h);

    std::vector<std::uint32_t> order(data.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng shuffler(config.seed + 0x9e3779b97f4a7c15ull);

    TrainRun run{};
    run.config = config;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + config.batch_size);
            double inv = 1.0 / static_cast<double>(end - start);
            std::fill(gw1.begin(), gw1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);

            for (std::size_t k = start; k < end; ++k) {
                const BinnedSample& s = data.rows[order[k]];
                std::array<double, 2> p = net.forward(s.f1, s.f2, hidden);
                double pc = std::fmax(p[s.c], 1e-300);
                epoch_loss += focal_loss(gamma, Prob{pc});
                std::array<double, 2> dz = focal_logit_gradient(gamma, p, s.c);

                for (int j = 0; j < h; ++j) {
                    double dh = 0.0;
                    if (hidden[j] > 0.0) {
                        dh = dz[0] * net.w2_[j] + dz[1] * net.w2_[h + j];
                    }
                    gw2[j] += inv * dz[0] * hidden[j];
                    gw2[h + j] += inv * dz[1] * hidden[j];
                    double d = inv * dh;
                    gb1[j] += d;
                    gw1[s.f1 * h + j] += d;
                    gw1[(4 + s.f2) * h + j] += d;
                }
                gb2[0] += inv * dz[0];
                gb2[1] += inv * dz[1];
            }

            ++step;
            double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            std::size_t idx = 0;
            auto adam = [&](double& w, double g) {
                m[idx] = config.beta1 * m[idx] + (1.0 - config.beta1) * g;
                v[idx] = config.beta2 * v[idx] + (1.0 - config.beta2) * g * g;
                w -= config.learning_rate * (m[idx] / c1) / (std::sqrt(v[idx] / c2) + config.epsilon);
                ++idx;
            };
            for (std::size_t i = 0; i < gw1.size(); ++i) adam(net.w1_[i], gw1[i]);
            for (std::size_t i = 0; i < gb1.size(); ++i) adam(net.b1_[i], gb1[i]);
            for (std::size_t i = 0; i < gw2.size(); ++i) adam(net.w2_[i], gw2[i]);
            for (std::size_t i = 0; i < gb2.size(); ++i) adam(net.b2_[i], gb2[i]);
        }
        epoch_loss /= static_cast<double>(data.rows.size());
        if (!std::isfinite(epoch_loss)) {
            throw ConvergenceError("train_classifier: non-finite loss at epoch " + std::to_string(epoch),
                                   epoch_loss, epoch);
        }
        run.loss_trajectory.push_back(epoch_loss);
    }

    for (int f1 = 0; f1 < 4; ++f1) {
        for (int f2 = 0; f2 < 4; ++f2) {
            run.learned[f1 * 4 + f2] = net.forward(f1, f2, hidden);
        }
    }
    return run;
}

struct CompareResult {
    double max_abs_gap;              // over bins meeting the count threshold
    std::array<double, 16> per_bin;  // NaN for excluded bins
    long threshold;
};

/// Entrywise comparison of two posterior tables over bins with enough
/// samples. Bins below the count threshold (or with undefined rows) are
/// excluded and reported as NaN.
inline CompareResult compare_posteriors(const PosteriorTable& learned, const PosteriorTable& theory,
                                        const std::array<long, 16>& counts, long threshold = 100) {
    CompareResult out{};
    out.threshold = threshold;
    out.max_abs_gap = 0.0;
    for (int b = 0; b < 16; ++b) {
        bool usable = counts[b] >= threshold && std::isfinite(learned[b][0]) && std::isfinite(theory[b][0]);
        if (!usable) {
            out.per_bin[b] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double gap = std::fmax(std::fabs(learned[b][0] - theory[b][0]),
                               std::fabs(learned[b][1] - theory[b][1]));
        out.per_bin[b] = gap;
        out.max_abs_gap = std::fmax(out.max_abs_gap, gap);
    }
    return out;
}

/// theory_target applied to every defined row of a posterior table.
inline PosteriorTable theory_table(FocusParam gamma, const PosteriorTable& posterior) {
    PosteriorTable out{};
    for (int b = 0; b < 16; ++b) {
        if (!std::isfinite(posterior[b][0])) {
            out[b] = {std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
            continue;
        }
        // A degenerate empirical row (all samples one class) is its own
        // fixed point: the minimizer is only defined on the support.
        if (posterior[b][0] <= 0.0 || posterior[b][1] <= 0.0) {
            out[b] = posterior[b];
            continue;
        }
        Pmf row({posterior[b][0], posterior[b][1]});
        Pmf star = theory_target(gamma, row);
        out[b] = {star.prob(0), star.prob(1)};
    }
    return out;
}

}  // namespace focal
