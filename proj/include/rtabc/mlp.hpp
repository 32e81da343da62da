#ifndef RTABC_MLP_HPP
#define RTABC_MLP_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rtabc/common.hpp"
#include "rtabc/mlp_amx.hpp"

namespace rtabc {

struct weight_file_error : io_error {
    enum class Kind { bad_magic, bad_version, truncated, malformed };
    Kind kind;
    weight_file_error(Kind k, const std::string& msg) : io_error(msg), kind(k) {}
};

// Feed-forward surrogate: tanh hidden layers, identity output. Inputs and
// targets are linearly rescaled to [-1, 1] per dimension (bounds live in the
// net and in the weight file) so slack stays in original observation units.
struct Mlp {
    std::vector<int> sizes;                // input -> hidden... -> output
    std::vector<Eigen::MatrixXd> weights;  // weights[l]: sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;
    Vec in_lo, in_hi, out_lo, out_hi;      // rescaling bounds, identity by default

    Mlp() = default;

    explicit Mlp(std::vector<int> layer_sizes, std::uint64_t init_seed = 0) : sizes(std::move(layer_sizes)) {
        if (sizes.size() < 2) throw dimension_error("Mlp: need at least input and output layers");
        for (int s : sizes)
            if (s < 1) throw dimension_error("Mlp: layer sizes must be >= 1");
        std::mt19937_64 rng(init_seed);
        for (size_t l = 0; l + 1 < sizes.size(); ++l) {
            const double bound = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
            std::uniform_real_distribution<double> u(-bound, bound);
            Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
            for (int i = 0; i < w.rows(); ++i)
                for (int j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
            weights.push_back(std::move(w));
            biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
        }
        in_lo.assign(sizes.front(), -1.0);
        in_hi.assign(sizes.front(), 1.0);
        out_lo.assign(sizes.back(), -1.0);
        out_hi.assign(sizes.back(), 1.0);
    }

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }

    void set_scaling(Vec ilo, Vec ihi, Vec olo, Vec ohi) {
        if (static_cast<int>(ilo.size()) != input_dim() || ihi.size() != ilo.size() ||
            static_cast<int>(olo.size()) != output_dim() || ohi.size() != olo.size())
            throw dimension_error("Mlp::set_scaling: bound dims mismatch");
        for (size_t i = 0; i < ilo.size(); ++i)
            if (!(ihi[i] > ilo[i])) throw numeric_error("Mlp::set_scaling: input hi must exceed lo");
        for (size_t i = 0; i < olo.size(); ++i)
            if (!(ohi[i] > olo[i])) throw numeric_error("Mlp::set_scaling: output hi must exceed lo");
        in_lo = std::move(ilo);
        in_hi = std::move(ihi);
        out_lo = std::move(olo);
        out_hi = std::move(ohi);
    }

    // batch x input_dim, scaled to [-1,1]
    Eigen::MatrixXd scale_inputs(const std::vector<Vec>& xs) const {
        Eigen::MatrixXd X(xs.size(), input_dim());
        for (size_t r = 0; r < xs.size(); ++r) {
            if (static_cast<int>(xs[r].size()) != input_dim())
                throw dimension_error("Mlp: input dim mismatch");
            for (int c = 0; c < input_dim(); ++c)
                X(r, c) = 2.0 * (xs[r][c] - in_lo[c]) / (in_hi[c] - in_lo[c]) - 1.0;
        }
        return X;
    }

    // forward pass in scaled space
    Eigen::MatrixXd forward_scaled(const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd a = X;
        for (size_t l = 0; l < weights.size(); ++l) {
            a = (a * weights[l].transpose()).rowwise() + biases[l].transpose();
            if (l + 1 < weights.size()) a = a.array().tanh().matrix();
        }
        return a;
    }

    double unscale_output(double y, int c) const {
        return (y + 1.0) * 0.5 * (out_hi[c] - out_lo[c]) + out_lo[c];
    }
    double scale_output(double y, int c) const {
        return 2.0 * (y - out_lo[c]) / (out_hi[c] - out_lo[c]) - 1.0;
    }
};

#if RTABC_AMX_PATH
namespace detail {
namespace amx {

// Per-net packed form: first (narrow) layer kept in float32, the wide layers
// packed to bf16 tiles, keyed by a content fingerprint so mutated or reloaded
// weights repack automatically.
struct PackedNet {
    std::uint64_t key = 0;
    int h1p = 0;                              // sizes[1] padded to a multiple of 32
    std::vector<float> w0t, b0;               // layer 0 transposed [sizes[0]][h1p], bias [h1p]
    std::vector<PackedLayer> layers;          // layers 1..L-1
    std::vector<std::vector<float>> biases;   // layers 1..L-1, zero-padded to each np
    std::vector<double> oscale, ooff;         // unscale: y*oscale[c] + ooff[c]
};

inline std::uint64_t fingerprint(const Mlp& net) {
#if defined(__VAES__)
    constexpr auto digest = hash_bytes;
#else
    constexpr auto digest = crc_bytes;
#endif
    std::uint64_t h = 0xffffffffu;
    h = digest(h, net.sizes.data(), net.sizes.size() * sizeof(int));
    for (size_t l = 0; l < net.weights.size(); ++l) {
        h = digest(h, net.weights[l].data(), static_cast<size_t>(net.weights[l].size()) * sizeof(double));
        h = digest(h, net.biases[l].data(), static_cast<size_t>(net.biases[l].size()) * sizeof(double));
    }
    for (const Vec* v : {&net.in_lo, &net.in_hi, &net.out_lo, &net.out_hi})
        h = digest(h, v->data(), v->size() * sizeof(double));
    return h;
}

// the tile path pays off (and keeps bf16 rounding well-averaged) only when
// every tile-evaluated layer reads at least this many inputs
constexpr int kMinTileWidth = 48;

inline bool eligible(const Mlp& net) {
    if (net.sizes.size() < 3) return false;
    for (size_t l = 1; l + 1 < net.sizes.size(); ++l)
        if (net.sizes[l] < kMinTileWidth) return false;
    return true;
}

inline std::shared_ptr<const PackedNet> get_packed(const Mlp& net) {
    static std::mutex mu;
    static std::vector<std::shared_ptr<const PackedNet>> cache;  // tiny LRU
    const std::uint64_t key = fingerprint(net);
    std::lock_guard<std::mutex> lock(mu);
    for (size_t i = 0; i < cache.size(); ++i)
        if (cache[i]->key == key) {
            auto hit = cache[i];
            cache.erase(cache.begin() + i);
            cache.push_back(hit);
            return hit;
        }
    auto p = std::make_shared<PackedNet>();
    p->key = key;
    const int h0 = static_cast<int>(net.weights[0].rows()), k0 = static_cast<int>(net.weights[0].cols());
    p->h1p = (h0 + 31) / 32 * 32;
    p->w0t.assign(static_cast<size_t>(k0) * p->h1p, 0.0f);
    for (int j = 0; j < h0; ++j)
        for (int k = 0; k < k0; ++k)
            p->w0t[static_cast<size_t>(k) * p->h1p + j] = static_cast<float>(net.weights[0](j, k));
    p->b0.assign(p->h1p, 0.0f);
    for (int i = 0; i < h0; ++i) p->b0[i] = static_cast<float>(net.biases[0](i));
    for (size_t l = 1; l < net.weights.size(); ++l) {
        const auto& W = net.weights[l];
        p->layers.push_back(pack_layer(static_cast<int>(W.rows()), static_cast<int>(W.cols()),
                                       [&W](int n, int k) { return W(n, k); }));
        std::vector<float> b(p->layers.back().np, 0.0f);
        for (int i = 0; i < net.biases[l].size(); ++i) b[i] = static_cast<float>(net.biases[l](i));
        p->biases.push_back(std::move(b));
    }
    // the output layer's bias is folded into the unscale affine map:
    // out = (y + b)*s + o = y*s + (b*s + o)
    p->oscale.resize(net.output_dim());
    p->ooff.resize(net.output_dim());
    const auto& bl = net.biases.back();
    for (int c = 0; c < net.output_dim(); ++c) {
        p->oscale[c] = 0.5 * (net.out_hi[c] - net.out_lo[c]);
        p->ooff[c] = 0.5 * (net.out_hi[c] - net.out_lo[c]) + net.out_lo[c] + bl(c) * p->oscale[c];
    }
    cache.push_back(p);
    if (cache.size() > 4) cache.erase(cache.begin());
    return cache.back();
}

// Vectorized tanh on one 16-float packet: the Pade [5/4] approximant
// x*(945 + x^2*(105 + x^2)) / (945 + x^2*(420 + 15 x^2)) with the input
// clamped to [-4, 4], the divide replaced by rcp14, and the result
// clamped to [-1, 1] where the rational slightly overshoots near the
// input clamp. Max error ~1.1e-3 (near |x|=3.6) plus the 6e-5 relative
// error of rcp14 — well inside the bf16 rounding (half-quantum ~2e-3
// near 1) applied to every hidden activation downstream, and several
// multiplies shorter than a full-precision minimax rational.
inline __m512 ptanh16(__m512 x) {
    const __m512 one = _mm512_set1_ps(1.0f);
    const __m512 bound = _mm512_set1_ps(4.0f);
    x = _mm512_min_ps(_mm512_max_ps(x, _mm512_sub_ps(_mm512_setzero_ps(), bound)), bound);
    const __m512 x2 = _mm512_mul_ps(x, x);
    __m512 p = _mm512_add_ps(x2, _mm512_set1_ps(105.0f));
    p = _mm512_fmadd_ps(x2, p, _mm512_set1_ps(945.0f));
    p = _mm512_mul_ps(x, p);
    __m512 q = _mm512_fmadd_ps(x2, _mm512_set1_ps(15.0f), _mm512_set1_ps(420.0f));
    q = _mm512_fmadd_ps(x2, q, _mm512_set1_ps(945.0f));
    __m512 t = _mm512_mul_ps(p, _mm512_rcp14_ps(q));
    return _mm512_min_ps(_mm512_max_ps(t, _mm512_sub_ps(_mm512_setzero_ps(), one)), one);
}

// One row of layer 0 fused with the activation and the A-panel pack:
// reads the pre-scaled inputs, accumulates bias + x*W0^T per 32-column
// chunk, applies tanh, and emits bf16 directly in the tile layout.
inline void layer0_tanh_pack(const PackedNet& pk, const float* xv, int k0, int row,
                             std::uint16_t* ap) {
    const int h1p = pk.h1p, kc = h1p / 32;
    const int mb = row / 16, mr = row % 16;
    for (int c = 0; c < kc; ++c) {
        __m512 a0 = _mm512_loadu_ps(pk.b0.data() + c * 32);
        __m512 a1 = _mm512_loadu_ps(pk.b0.data() + c * 32 + 16);
        for (int k = 0; k < k0; ++k) {
            const __m512 xk = _mm512_set1_ps(xv[k]);
            const float* w = pk.w0t.data() + static_cast<size_t>(k) * h1p + c * 32;
            a0 = _mm512_fmadd_ps(xk, _mm512_loadu_ps(w), a0);
            a1 = _mm512_fmadd_ps(xk, _mm512_loadu_ps(w + 16), a1);
        }
        a0 = ptanh16(a0);
        a1 = ptanh16(a1);
        _mm512_storeu_si512(ap + (((static_cast<size_t>(mb) * kc + c) * 16) + mr) * 32,
                            reinterpret_cast<__m512i>(_mm512_cvtne2ps_pbh(a1, a0)));
    }
}

// Hidden-layer epilogue fused with the next pack: bias + tanh over the
// gemm output rows, emitted straight into the next bf16 A panel. Pad
// columns stay zero (zero gemm output + zero-padded bias -> tanh(0)).
inline void bias_tanh_pack(const float* src, const float* bias, int rows, int np,
                           std::uint16_t* ap) {
    const int kc = np / 32;
    for (int m = 0; m < rows; ++m) {
        const float* s = src + static_cast<size_t>(m) * np;
        const int mb = m / 16, mr = m % 16;
        for (int c = 0; c < kc; ++c) {
            __m512 a0 = _mm512_add_ps(_mm512_loadu_ps(s + c * 32), _mm512_loadu_ps(bias + c * 32));
            __m512 a1 =
                _mm512_add_ps(_mm512_loadu_ps(s + c * 32 + 16), _mm512_loadu_ps(bias + c * 32 + 16));
            a0 = ptanh16(a0);
            a1 = ptanh16(a1);
            _mm512_storeu_si512(ap + (((static_cast<size_t>(mb) * kc + c) * 16) + mr) * 32,
                                reinterpret_cast<__m512i>(_mm512_cvtne2ps_pbh(a1, a0)));
        }
    }
    zero_pad_panel(ap, rows, kc);
}

// Random-access iterator yielding (double)src[i] * oscale[i] + ooff[i].
// Range-constructing an output row through it fuses the f32 -> f64 unscale
// with the vector's element copy, so each fresh row is written in a single
// pass instead of converted to scratch and then copied.
struct UnscaleIt {
    using iterator_category = std::random_access_iterator_tag;
    using value_type = double;
    using difference_type = std::ptrdiff_t;
    using pointer = const double*;
    using reference = double;
    const float* src;
    const double* os;
    const double* oo;
    double operator*() const { return static_cast<double>(*src) * *os + *oo; }
    double operator[](difference_type n) const {
        return static_cast<double>(src[n]) * os[n] + oo[n];
    }
    UnscaleIt& operator++() { ++src, ++os, ++oo; return *this; }
    UnscaleIt operator++(int) { auto t = *this; ++*this; return t; }
    UnscaleIt& operator--() { --src, --os, --oo; return *this; }
    UnscaleIt& operator+=(difference_type n) { src += n, os += n, oo += n; return *this; }
    UnscaleIt operator+(difference_type n) const { auto t = *this; t += n; return t; }
    UnscaleIt operator-(difference_type n) const { auto t = *this; t += -n; return t; }
    difference_type operator-(const UnscaleIt& o) const { return src - o.src; }
    bool operator==(const UnscaleIt& o) const { return src == o.src; }
    bool operator!=(const UnscaleIt& o) const { return src != o.src; }
};

#ifdef RTABC_PROF
inline unsigned long long prof_t[8];
#define RTABC_TICK(i) prof_t[i] += __rdtsc() - prof_last, prof_last = __rdtsc()
#define RTABC_TICK_INIT() unsigned long long prof_last = __rdtsc()
#else
#define RTABC_TICK(i) (void)0
#define RTABC_TICK_INIT() (void)0
#endif

inline std::vector<Vec> forward_batch_tiles(const Mlp& net, const std::vector<Vec>& xs) {
    RTABC_TICK_INIT();
    const auto packed = get_packed(net);
    RTABC_TICK(0);
    const int M = static_cast<int>(xs.size());
    const int k0 = net.input_dim(), Mo = net.output_dim();
    for (const Vec& x : xs)
        if (static_cast<int>(x.size()) != k0) throw dimension_error("Mlp: input dim mismatch");
    constexpr int R = detail::amx::kPanelRows;
    int wmax = packed->h1p;
    for (const auto& L : packed->layers) wmax = std::max(wmax, L.np);
    static thread_local std::vector<float> buf, xv;
    static thread_local std::vector<std::uint16_t> panel;
    buf.resize(static_cast<size_t>(R) * wmax);
    panel.resize(static_cast<size_t>(R) * wmax);
    xv.resize(k0);
    const double* os = packed->oscale.data();
    const double* oo = packed->ooff.data();
    std::vector<Vec> out;
    out.reserve(xs.size());
    detail::amx::TileConfig tcfg;
    for (int t = 0; t < 8; ++t) {
        tcfg.rows[t] = 16;
        tcfg.colsb[t] = 64;
    }
    _tile_loadconfig(&tcfg);
    RTABC_TICK(1);
    for (int base = 0; base < M; base += R) {
        const int rows = std::min(R, M - base);
        const int mblocks = (rows + 31) / 32;
        for (int r = 0; r < rows; ++r) {
            const Vec& x = xs[base + r];
            for (int k = 0; k < k0; ++k)
                xv[k] = static_cast<float>(2.0 * (x[k] - net.in_lo[k]) / (net.in_hi[k] - net.in_lo[k]) -
                                           1.0);
            layer0_tanh_pack(*packed, xv.data(), k0, r, panel.data());
        }
        zero_pad_panel(panel.data(), rows, packed->h1p / 32);
        RTABC_TICK(2);
        for (size_t l = 0; l < packed->layers.size(); ++l) {
            const PackedLayer& W = packed->layers[l];
            panel_gemm(panel.data(), mblocks, W, buf.data());
            RTABC_TICK(3);
            if (l + 1 < packed->layers.size())  // hidden; the output layer's bias is folded below
                bias_tanh_pack(buf.data(), packed->biases[l].data(), rows, W.np, panel.data());
            RTABC_TICK(4);
        }
        const int ldo = packed->layers.back().np;
        for (int r = 0; r < rows; ++r) {
            const UnscaleIt b{buf.data() + static_cast<size_t>(r) * ldo, os, oo};
            out.emplace_back(b, b + Mo);
        }
        RTABC_TICK(5);
    }
    _tile_release();
    RTABC_TICK(6);
    return out;
}

}  // namespace amx
}  // namespace detail
#endif  // RTABC_AMX_PATH

inline std::vector<Vec> forward_batch(const Mlp& net, const std::vector<Vec>& xs) {
#if RTABC_AMX_PATH
    if (!xs.empty() && detail::amx::eligible(net) && detail::amx::available())
        return detail::amx::forward_batch_tiles(net, xs);
#endif
    const Eigen::MatrixXd Y = net.forward_scaled(net.scale_inputs(xs));
    std::vector<Vec> out(xs.size(), Vec(net.output_dim()));
    for (size_t r = 0; r < xs.size(); ++r)
        for (int c = 0; c < net.output_dim(); ++c)
            out[r][c] = net.unscale_output(Y(static_cast<int>(r), c), c);
    return out;
}

struct TrainConfig {
    double epsilon_star = 0.05;  // training-noise std, observation units
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(epsilon_star >= 0.0)) throw numeric_error("TrainConfig: epsilon_star must be >= 0");
        if (!(learning_rate > 0.0) || batch_size < 1 || epochs < 1)
            throw numeric_error("TrainConfig: learning_rate, batch_size, epochs must be positive");
    }
};

struct Dataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;

    void validate() const {
        if (inputs.empty() || inputs.size() != targets.size())
            throw dimension_error("Dataset: empty or mismatched inputs/targets");
    }
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;  // scaled-space squared-error per sample
    bool diverged = false;
    int diverged_epoch = -1;
};

namespace detail {

// Backpropagated gradient of the squared error ||f(x) - y||^2 for one sample,
// all in scaled space. Returns the loss.
inline double backprop_sample(const Mlp& net, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              std::vector<Eigen::MatrixXd>& grad_w, std::vector<Eigen::VectorXd>& grad_b) {
    const size_t L = net.weights.size();
    std::vector<Eigen::VectorXd> acts(L + 1);
    acts[0] = x;
    for (size_t l = 0; l < L; ++l) {
        acts[l + 1] = net.weights[l] * acts[l] + net.biases[l];
        if (l + 1 < L) acts[l + 1] = acts[l + 1].array().tanh().matrix();
    }
    const Eigen::VectorXd diff = acts[L] - y;
    const double loss = diff.squaredNorm();
    Eigen::VectorXd delta = 2.0 * diff;
    for (size_t l = L; l-- > 0;) {
        grad_w[l].noalias() += delta * acts[l].transpose();
        grad_b[l] += delta;
        if (l > 0) {
            delta = net.weights[l].transpose() * delta;
            delta = delta.cwiseProduct((1.0 - acts[l].array().square()).matrix());
        }
    }
    return loss;
}

}  // namespace detail

// Mini-batch SGD on noise-corrupted targets: every presentation of a sample
// draws a fresh Gaussian corruption of std epsilon_star (observation units),
// so the net regresses to the mean of the noisy predictive. Deterministic
// given cfg.seed.
inline TrainReport train_sgd(Mlp& net, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    const int n = static_cast<int>(data.inputs.size());
    const int M = net.output_dim();

    const Eigen::MatrixXd X = net.scale_inputs(data.inputs);
    Eigen::MatrixXd Y(n, M);
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(data.targets[r].size()) != M)
            throw dimension_error("train_sgd: target dim mismatch");
        for (int c = 0; c < M; ++c) Y(r, c) = net.scale_output(data.targets[r][c], c);
    }
    // noise std per output dim in scaled units
    Eigen::VectorXd noise_std(M);
    for (int c = 0; c < M; ++c) noise_std(c) = cfg.epsilon_star * 2.0 / (net.out_hi[c] - net.out_lo[c]);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    std::vector<Eigen::MatrixXd> grad_w;
    std::vector<Eigen::VectorXd> grad_b;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        grad_w.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        grad_b.emplace_back(net.biases[l].size());
    }

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, n - start);
            for (auto& g : grad_w) g.setZero();
            for (auto& g : grad_b) g.setZero();
            for (int i = 0; i < bs; ++i) {
                const int idx = order[start + i];
                Eigen::VectorXd target = Y.row(idx).transpose();
                if (cfg.epsilon_star > 0.0)
                    for (int c = 0; c < M; ++c) target(c) += noise_std(c) * gauss(rng);
                epoch_loss += detail::backprop_sample(net, X.row(idx).transpose(), target, grad_w, grad_b);
            }
            const double step = cfg.learning_rate / bs;
            for (size_t l = 0; l < net.weights.size(); ++l) {
                net.weights[l].noalias() -= step * grad_w[l];
                net.biases[l] -= step * grad_b[l];
            }
        }
        const double mean_loss = epoch_loss / n;
        report.epoch_mean_loss.push_back(mean_loss);
        if (!std::isfinite(mean_loss)) {
            report.diverged = true;
            report.diverged_epoch = epoch;
            return report;
        }
    }
    return report;
}

// ---- weight file: magic, version, layer sizes, scaling bounds, parameters
//      (row-major float64, little-endian) ----

constexpr char kWeightMagic[8] = {'R', 'T', 'A', 'B', 'C', 'N', 'E', 'T'};
constexpr std::uint32_t kWeightVersion = 1;

namespace detail {

inline void write_raw(std::ofstream& out, const void* p, size_t bytes) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}

inline void read_raw(std::ifstream& in, void* p, size_t bytes) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes)
        throw weight_file_error(weight_file_error::Kind::truncated, "weight file truncated");
}

}  // namespace detail

inline void save_weights(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_weights: cannot open " + path);
    detail::write_raw(out, kWeightMagic, sizeof(kWeightMagic));
    detail::write_raw(out, &kWeightVersion, sizeof(kWeightVersion));
    const std::uint32_t n_layers = static_cast<std::uint32_t>(net.sizes.size());
    detail::write_raw(out, &n_layers, sizeof(n_layers));
    for (int s : net.sizes) {
        const std::uint32_t u = static_cast<std::uint32_t>(s);
        detail::write_raw(out, &u, sizeof(u));
    }
    for (const Vec* v : {&net.in_lo, &net.in_hi, &net.out_lo, &net.out_hi})
        detail::write_raw(out, v->data(), v->size() * sizeof(double));
    for (size_t l = 0; l + 1 < net.sizes.size(); ++l) {
        for (int i = 0; i < net.weights[l].rows(); ++i)
            for (int j = 0; j < net.weights[l].cols(); ++j) {
                const double w = net.weights[l](i, j);
                detail::write_raw(out, &w, sizeof(w));
            }
        detail::write_raw(out, net.biases[l].data(), net.biases[l].size() * sizeof(double));
    }
    if (!out) throw io_error("save_weights: write failed for " + path);
}

inline Mlp load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_weights: cannot open " + path);
    char magic[8];
    detail::read_raw(in, magic, sizeof(magic));
    if (std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0)
        throw weight_file_error(weight_file_error::Kind::bad_magic, "not a weight file: " + path);
    std::uint32_t version = 0, n_layers = 0;
    detail::read_raw(in, &version, sizeof(version));
    if (version != kWeightVersion)
        throw weight_file_error(weight_file_error::Kind::bad_version,
                                "unsupported weight file version " + std::to_string(version));
    detail::read_raw(in, &n_layers, sizeof(n_layers));
    if (n_layers < 2 || n_layers > 64)
        throw weight_file_error(weight_file_error::Kind::malformed, "implausible layer count");
    std::vector<int> sizes(n_layers);
    for (auto& s : sizes) {
        std::uint32_t u = 0;
        detail::read_raw(in, &u, sizeof(u));
        if (u < 1 || u > 1000000) throw weight_file_error(weight_file_error::Kind::malformed, "implausible layer size");
        s = static_cast<int>(u);
    }
    Mlp net(sizes);
    net.in_lo.resize(sizes.front());
    net.in_hi.resize(sizes.front());
    net.out_lo.resize(sizes.back());
    net.out_hi.resize(sizes.back());
    for (Vec* v : {&net.in_lo, &net.in_hi, &net.out_lo, &net.out_hi})
        detail::read_raw(in, v->data(), v->size() * sizeof(double));
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        for (int i = 0; i < net.weights[l].rows(); ++i)
            for (int j = 0; j < net.weights[l].cols(); ++j) detail::read_raw(in, &net.weights[l](i, j), sizeof(double));
        detail::read_raw(in, net.biases[l].data(), net.biases[l].size() * sizeof(double));
    }
    return net;
}

}  // namespace rtabc

#endif
