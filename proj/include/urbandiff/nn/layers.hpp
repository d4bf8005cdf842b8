#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "urbandiff/nn/tensor.hpp"
#include "urbandiff/rng.hpp"

namespace urbandiff::nn {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Layers cache whatever the matching backward needs, so each instance handles
// one forward/backward pair at a time. Parameter gradients accumulate until
// zero_grads().

// ---------------------------------------------------------------------------
// Conv2d: square kernel, zero padding, im2col + GEMM.
// ---------------------------------------------------------------------------
template <typename S>
class Conv2d {
public:
    Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad)
        : cin_(in_ch), cout_(out_ch), k_(ksize), stride_(stride), pad_(pad) {
        w_ = Tensor<S>({cout_, cin_, k_, k_});
        b_ = Tensor<S>({cout_});
        gw_ = Tensor<S>({cout_, cin_, k_, k_});
        gb_ = Tensor<S>({cout_});
    }

    void init(Rng& rng, double scale = 1.0) {
        const double std = scale * std::sqrt(2.0 / (cin_ * k_ * k_));
        for (auto& v : w_.data) v = static_cast<S>(rng.normal() * std);
        b_.zero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        h_in_ = x.dim(1);
        w_in_ = x.dim(2);
        ho_ = (h_in_ + 2 * pad_ - k_) / stride_ + 1;
        wo_ = (w_in_ + 2 * pad_ - k_) / stride_ + 1;
        const int patch = cin_ * k_ * k_;
        const std::int64_t npos = static_cast<std::int64_t>(ho_) * wo_;

        cols_ = Tensor<S>({patch, static_cast<int>(npos)});
        im2col(x.ptr(), cols_.ptr());

        Tensor<S> y({cout_, ho_, wo_});
        ConstMatMap<S> wm(w_.ptr(), cout_, patch);
        ConstMatMap<S> cm(cols_.ptr(), patch, npos);
        MatMap<S> ym(y.ptr(), cout_, npos);
        ym.noalias() = wm * cm;
        for (int c = 0; c < cout_; ++c) ym.row(c).array() += b_[c];
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        const int patch = cin_ * k_ * k_;
        const std::int64_t npos = static_cast<std::int64_t>(ho_) * wo_;
        ConstMatMap<S> gym(gy.ptr(), cout_, npos);
        ConstMatMap<S> cm(cols_.ptr(), patch, npos);
        MatMap<S> gwm(gw_.ptr(), cout_, patch);
        gwm.noalias() += gym * cm.transpose();
        for (int c = 0; c < cout_; ++c) gb_[c] += gym.row(c).sum();

        Tensor<S> gcols({patch, static_cast<int>(npos)});
        ConstMatMap<S> wm(w_.ptr(), cout_, patch);
        MatMap<S> gcm(gcols.ptr(), patch, npos);
        gcm.noalias() = wm.transpose() * gym;

        Tensor<S> gx({cin_, h_in_, w_in_});
        col2im(gcols.ptr(), gx.ptr());
        return gx;
    }

    void params(std::vector<ParamRef<S>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &w_, &gw_});
        out.push_back({prefix + ".bias", &b_, &gb_});
    }

    int out_channels() const { return cout_; }

private:
    void im2col(const S* x, S* cols) const {
        const std::int64_t npos = static_cast<std::int64_t>(ho_) * wo_;
        for (int c = 0; c < cin_; ++c) {
            const S* xc = x + static_cast<std::int64_t>(c) * h_in_ * w_in_;
            for (int kr = 0; kr < k_; ++kr) {
                for (int kc = 0; kc < k_; ++kc) {
                    S* row = cols + (static_cast<std::int64_t>(c) * k_ * k_ + kr * k_ + kc) * npos;
                    for (int r = 0; r < ho_; ++r) {
                        const int ir = r * stride_ - pad_ + kr;
                        S* dst = row + static_cast<std::int64_t>(r) * wo_;
                        if (ir < 0 || ir >= h_in_) {
                            for (int cc = 0; cc < wo_; ++cc) dst[cc] = S(0);
                            continue;
                        }
                        const S* src = xc + static_cast<std::int64_t>(ir) * w_in_;
                        for (int cc = 0; cc < wo_; ++cc) {
                            const int ic = cc * stride_ - pad_ + kc;
                            dst[cc] = (ic >= 0 && ic < w_in_) ? src[ic] : S(0);
                        }
                    }
                }
            }
        }
    }

    void col2im(const S* cols, S* gx) const {
        const std::int64_t npos = static_cast<std::int64_t>(ho_) * wo_;
        for (int c = 0; c < cin_; ++c) {
            S* xc = gx + static_cast<std::int64_t>(c) * h_in_ * w_in_;
            for (int kr = 0; kr < k_; ++kr) {
                for (int kc = 0; kc < k_; ++kc) {
                    const S* row =
                        cols + (static_cast<std::int64_t>(c) * k_ * k_ + kr * k_ + kc) * npos;
                    for (int r = 0; r < ho_; ++r) {
                        const int ir = r * stride_ - pad_ + kr;
                        if (ir < 0 || ir >= h_in_) continue;
                        const S* src = row + static_cast<std::int64_t>(r) * wo_;
                        S* dst = xc + static_cast<std::int64_t>(ir) * w_in_;
                        for (int cc = 0; cc < wo_; ++cc) {
                            const int ic = cc * stride_ - pad_ + kc;
                            if (ic >= 0 && ic < w_in_) dst[ic] += src[cc];
                        }
                    }
                }
            }
        }
    }

    int cin_, cout_, k_, stride_, pad_;
    int h_in_ = 0, w_in_ = 0, ho_ = 0, wo_ = 0;
    Tensor<S> w_, b_, gw_, gb_;
    Tensor<S> cols_;
};

// ---------------------------------------------------------------------------
// GroupNorm over (C/G, H, W) blocks.
// ---------------------------------------------------------------------------
template <typename S>
class GroupNorm {
public:
    GroupNorm(int channels, int groups) : channels_(channels), groups_(groups) {
        if (channels % groups != 0)
            throw ParameterError("group count " + std::to_string(groups) +
                                 " does not divide channels " + std::to_string(channels));
        gamma_ = Tensor<S>({channels});
        beta_ = Tensor<S>({channels});
        ggamma_ = Tensor<S>({channels});
        gbeta_ = Tensor<S>({channels});
        for (auto& v : gamma_.data) v = S(1);
    }

    Tensor<S> forward(const Tensor<S>& x) {
        x_hat_ = Tensor<S>(x.shape);
        inv_std_.assign(groups_, S(0));
        const std::int64_t hw = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
        const int cg = channels_ / groups_;
        const std::int64_t m = cg * hw;

        Tensor<S> y(x.shape);
        for (int g = 0; g < groups_; ++g) {
            const S* xs = x.ptr() + static_cast<std::int64_t>(g) * m;
            double mean = 0.0;
            for (std::int64_t i = 0; i < m; ++i) mean += xs[i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::int64_t i = 0; i < m; ++i) {
                const double d = xs[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const S inv = static_cast<S>(1.0 / std::sqrt(var + 1e-5));
            inv_std_[g] = inv;

            S* xh = x_hat_.ptr() + static_cast<std::int64_t>(g) * m;
            S* ys = y.ptr() + static_cast<std::int64_t>(g) * m;
            for (int cc = 0; cc < cg; ++cc) {
                const int channel = g * cg + cc;
                const S ga = gamma_[channel];
                const S be = beta_[channel];
                for (std::int64_t i = 0; i < hw; ++i) {
                    const std::int64_t idx = static_cast<std::int64_t>(cc) * hw + i;
                    xh[idx] = static_cast<S>((xs[idx] - mean) * inv);
                    ys[idx] = ga * xh[idx] + be;
                }
            }
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        const std::int64_t hw = gy.size() / channels_;
        const int cg = channels_ / groups_;
        const std::int64_t m = cg * hw;

        Tensor<S> gx(x_hat_.shape);
        for (int g = 0; g < groups_; ++g) {
            const S* gys = gy.ptr() + static_cast<std::int64_t>(g) * m;
            const S* xh = x_hat_.ptr() + static_cast<std::int64_t>(g) * m;
            S* gxs = gx.ptr() + static_cast<std::int64_t>(g) * m;

            // h = gy * gamma; gx = inv std * (h - mean(h) - x_hat * mean(h x_hat))
            double sum_h = 0.0, sum_hx = 0.0;
            for (int cc = 0; cc < cg; ++cc) {
                const int channel = g * cg + cc;
                const S ga = gamma_[channel];
                double dg = 0.0, db = 0.0;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const std::int64_t idx = static_cast<std::int64_t>(cc) * hw + i;
                    const double h = static_cast<double>(gys[idx]) * ga;
                    sum_h += h;
                    sum_hx += h * xh[idx];
                    dg += static_cast<double>(gys[idx]) * xh[idx];
                    db += gys[idx];
                }
                ggamma_[channel] += static_cast<S>(dg);
                gbeta_[channel] += static_cast<S>(db);
            }
            const double mean_h = sum_h / static_cast<double>(m);
            const double mean_hx = sum_hx / static_cast<double>(m);
            const double inv = inv_std_[g];
            for (int cc = 0; cc < cg; ++cc) {
                const S ga = gamma_[g * cg + cc];
                for (std::int64_t i = 0; i < hw; ++i) {
                    const std::int64_t idx = static_cast<std::int64_t>(cc) * hw + i;
                    const double h = static_cast<double>(gys[idx]) * ga;
                    gxs[idx] = static_cast<S>(inv * (h - mean_h - xh[idx] * mean_hx));
                }
            }
        }
        return gx;
    }

    void params(std::vector<ParamRef<S>>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
        out.push_back({prefix + ".beta", &beta_, &gbeta_});
    }

private:
    int channels_, groups_;
    Tensor<S> gamma_, beta_, ggamma_, gbeta_;
    Tensor<S> x_hat_;
    std::vector<S> inv_std_;
};

// ---------------------------------------------------------------------------
// SiLU
// ---------------------------------------------------------------------------
template <typename S>
class SiLU {
public:
    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        Tensor<S> y(x.shape);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x[i])));
            y[i] = static_cast<S>(x[i] * s);
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        Tensor<S> gx(x_.shape);
        for (std::int64_t i = 0; i < x_.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x_[i])));
            gx[i] = static_cast<S>(gy[i] * s * (1.0 + x_[i] * (1.0 - s)));
        }
        return gx;
    }

private:
    Tensor<S> x_;
};

// ---------------------------------------------------------------------------
// Linear on flat vectors.
// ---------------------------------------------------------------------------
template <typename S>
class Linear {
public:
    Linear(int in_dim, int out_dim) : din_(in_dim), dout_(out_dim) {
        w_ = Tensor<S>({dout_, din_});
        b_ = Tensor<S>({dout_});
        gw_ = Tensor<S>({dout_, din_});
        gb_ = Tensor<S>({dout_});
    }

    void init(Rng& rng, double scale = 1.0) {
        const double std = scale * std::sqrt(2.0 / din_);
        for (auto& v : w_.data) v = static_cast<S>(rng.normal() * std);
        b_.zero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        Tensor<S> y({dout_});
        ConstMatMap<S> wm(w_.ptr(), dout_, din_);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> xv(x.ptr(), din_);
        Eigen::Map<Eigen::Vector<S, Eigen::Dynamic>> yv(y.ptr(), dout_);
        yv.noalias() = wm * xv;
        for (int i = 0; i < dout_; ++i) y[i] += b_[i];
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        ConstMatMap<S> wm(w_.ptr(), dout_, din_);
        MatMap<S> gwm(gw_.ptr(), dout_, din_);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> gyv(gy.ptr(), dout_);
        Eigen::Map<const Eigen::Vector<S, Eigen::Dynamic>> xv(x_.ptr(), din_);
        gwm.noalias() += gyv * xv.transpose();
        for (int i = 0; i < dout_; ++i) gb_[i] += gy[i];

        Tensor<S> gx({din_});
        Eigen::Map<Eigen::Vector<S, Eigen::Dynamic>> gxv(gx.ptr(), din_);
        gxv.noalias() = wm.transpose() * gyv;
        return gx;
    }

    void params(std::vector<ParamRef<S>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &w_, &gw_});
        out.push_back({prefix + ".bias", &b_, &gb_});
    }

private:
    int din_, dout_;
    Tensor<S> w_, b_, gw_, gb_, x_;
};

// ---------------------------------------------------------------------------
// Inverted dropout; identity when not training or p = 0.
// ---------------------------------------------------------------------------
template <typename S>
class Dropout {
public:
    explicit Dropout(double p) : p_(p) {}

    Tensor<S> forward(const Tensor<S>& x, bool training, Rng* rng) {
        if (!training || p_ <= 0.0 || rng == nullptr) {
            active_ = false;
            return x;
        }
        active_ = true;
        mask_ = Tensor<S>(x.shape);
        const S keep_inv = static_cast<S>(1.0 / (1.0 - p_));
        Tensor<S> y(x.shape);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const bool keep = rng->uniform() >= p_;
            mask_[i] = keep ? keep_inv : S(0);
            y[i] = x[i] * mask_[i];
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        if (!active_) return gy;
        Tensor<S> gx(gy.shape);
        for (std::int64_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * mask_[i];
        return gx;
    }

private:
    double p_;
    bool active_ = false;
    Tensor<S> mask_;
};

// ---------------------------------------------------------------------------
// Multi-head self-attention over spatial positions, with pre-norm and
// residual connection: out = x + proj(attn(norm(x))).
// ---------------------------------------------------------------------------
template <typename S>
class SelfAttention2d {
public:
    SelfAttention2d(int channels, int heads, int norm_groups, double dropout)
        : channels_(channels), heads_(heads), norm_(channels, norm_groups), drop_(dropout) {
        if (channels % heads != 0)
            throw ParameterError("attention heads " + std::to_string(heads) +
                                 " do not divide channels " + std::to_string(channels));
        dh_ = channels / heads;
        wq_ = Tensor<S>({channels, channels});
        wk_ = Tensor<S>({channels, channels});
        wv_ = Tensor<S>({channels, channels});
        wo_ = Tensor<S>({channels, channels});
        bq_ = Tensor<S>({channels});
        bk_ = Tensor<S>({channels});
        bv_ = Tensor<S>({channels});
        bo_ = Tensor<S>({channels});
        gwq_ = Tensor<S>({channels, channels});
        gwk_ = Tensor<S>({channels, channels});
        gwv_ = Tensor<S>({channels, channels});
        gwo_ = Tensor<S>({channels, channels});
        gbq_ = Tensor<S>({channels});
        gbk_ = Tensor<S>({channels});
        gbv_ = Tensor<S>({channels});
        gbo_ = Tensor<S>({channels});
    }

    void init(Rng& rng) {
        const double std = std::sqrt(1.0 / channels_);
        for (auto* w : {&wq_, &wk_, &wv_})
            for (auto& v : w->data) v = static_cast<S>(rng.normal() * std);
        // Residual tail starts at zero so a fresh block is an identity map.
        wo_.zero();
        bq_.zero();
        bk_.zero();
        bv_.zero();
        bo_.zero();
    }

    Tensor<S> forward(const Tensor<S>& x, bool training, Rng* rng) {
        h_ = x.dim(1);
        w_ = x.dim(2);
        const int n = h_ * w_;

        Tensor<S> xn = norm_.forward(x);
        // tokens[n, c] = xn[c, n]
        tokens_ = Tensor<S>({n, channels_});
        for (int c = 0; c < channels_; ++c)
            for (int i = 0; i < n; ++i)
                tokens_[static_cast<std::int64_t>(i) * channels_ + c] =
                    xn[static_cast<std::int64_t>(c) * n + i];

        q_ = project(tokens_, wq_, bq_);
        k_ = project(tokens_, wk_, bk_);
        v_ = project(tokens_, wv_, bv_);

        attn_ = Tensor<S>({heads_, n, n});
        out_tokens_ = Tensor<S>({n, channels_});
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        for (int head = 0; head < heads_; ++head) {
            // Strided maps select this head's dh_ columns of the [n, C] matrices.
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> qh(q_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> kh(k_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> vh(v_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            MatMap<S> ah(attn_.ptr() + static_cast<std::int64_t>(head) * n * n, n, n);
            ah.noalias() = qh * kh.transpose();
            ah *= static_cast<S>(scale);
            for (int r = 0; r < n; ++r) {
                auto row = ah.row(r);
                const S mx = row.maxCoeff();
                row = (row.array() - mx).exp();
                row /= row.sum();
            }
            Eigen::Map<Mat, 0, Eigen::OuterStride<>> oh(out_tokens_.ptr() + head * dh_, n, dh_,
                                                        Eigen::OuterStride<>(channels_));
            oh.noalias() = ah * vh;
        }

        Tensor<S> proj = project(out_tokens_, wo_, bo_);
        proj = drop_.forward(proj, training, rng);

        Tensor<S> y(x.shape);
        for (int c = 0; c < channels_; ++c)
            for (int i = 0; i < n; ++i)
                y[static_cast<std::int64_t>(c) * n + i] =
                    x[static_cast<std::int64_t>(c) * n + i] +
                    proj[static_cast<std::int64_t>(i) * channels_ + c];
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        const int n = h_ * w_;

        // Split the residual: gy flows straight through and into the branch.
        Tensor<S> gproj({n, channels_});
        for (int c = 0; c < channels_; ++c)
            for (int i = 0; i < n; ++i)
                gproj[static_cast<std::int64_t>(i) * channels_ + c] =
                    gy[static_cast<std::int64_t>(c) * n + i];
        gproj = drop_.backward(gproj);

        Tensor<S> gout_tokens({n, channels_});
        project_backward(gproj, out_tokens_, wo_, gwo_, gbo_, gout_tokens);

        Tensor<S> gq({n, channels_});
        Tensor<S> gk({n, channels_});
        Tensor<S> gv({n, channels_});
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_));
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        for (int head = 0; head < heads_; ++head) {
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> qh(q_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> kh(k_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> vh(v_.ptr() + head * dh_, n, dh_,
                                                              Eigen::OuterStride<>(channels_));
            ConstMatMap<S> ah(attn_.ptr() + static_cast<std::int64_t>(head) * n * n, n, n);
            Eigen::Map<const Mat, 0, Eigen::OuterStride<>> goh(
                gout_tokens.ptr() + head * dh_, n, dh_, Eigen::OuterStride<>(channels_));

            Mat ga = goh * vh.transpose();          // [n, n]
            Mat gvh_full = ah.transpose() * goh;    // [n, dh]

            // softmax backward, rowwise
            for (int r = 0; r < n; ++r) {
                const S dot = ga.row(r).cwiseProduct(ah.row(r)).sum();
                ga.row(r) = ah.row(r).cwiseProduct((ga.row(r).array() - dot).matrix());
            }
            ga *= static_cast<S>(scale);

            Eigen::Map<Mat, 0, Eigen::OuterStride<>> gqh(gq.ptr() + head * dh_, n, dh_,
                                                         Eigen::OuterStride<>(channels_));
            Eigen::Map<Mat, 0, Eigen::OuterStride<>> gkh(gk.ptr() + head * dh_, n, dh_,
                                                         Eigen::OuterStride<>(channels_));
            Eigen::Map<Mat, 0, Eigen::OuterStride<>> gvh(gv.ptr() + head * dh_, n, dh_,
                                                         Eigen::OuterStride<>(channels_));
            gqh.noalias() = ga * kh;
            gkh.noalias() = ga.transpose() * qh;
            gvh = gvh_full;
        }

        Tensor<S> gtokens({n, channels_});
        gtokens.zero();
        project_backward_accum(gq, tokens_, wq_, gwq_, gbq_, gtokens);
        project_backward_accum(gk, tokens_, wk_, gwk_, gbk_, gtokens);
        project_backward_accum(gv, tokens_, wv_, gwv_, gbv_, gtokens);

        Tensor<S> gxn({channels_, h_, w_});
        for (int c = 0; c < channels_; ++c)
            for (int i = 0; i < n; ++i)
                gxn[static_cast<std::int64_t>(c) * n + i] =
                    gtokens[static_cast<std::int64_t>(i) * channels_ + c];

        Tensor<S> gx = norm_.backward(gxn);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        return gx;
    }

    void params(std::vector<ParamRef<S>>& out, const std::string& prefix) {
        norm_.params(out, prefix + ".norm");
        out.push_back({prefix + ".wq", &wq_, &gwq_});
        out.push_back({prefix + ".bq", &bq_, &gbq_});
        out.push_back({prefix + ".wk", &wk_, &gwk_});
        out.push_back({prefix + ".bk", &bk_, &gbk_});
        out.push_back({prefix + ".wv", &wv_, &gwv_});
        out.push_back({prefix + ".bv", &bv_, &gbv_});
        out.push_back({prefix + ".wo", &wo_, &gwo_});
        out.push_back({prefix + ".bo", &bo_, &gbo_});
    }

private:
    // y[n, C] = x[n, C] * W^T + b
    Tensor<S> project(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) const {
        const int n = x.dim(0);
        Tensor<S> y({n, channels_});
        ConstMatMap<S> xm(x.ptr(), n, channels_);
        ConstMatMap<S> wm(w.ptr(), channels_, channels_);
        MatMap<S> ym(y.ptr(), n, channels_);
        ym.noalias() = xm * wm.transpose();
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < channels_; ++c)
                y[static_cast<std::int64_t>(i) * channels_ + c] += b[c];
        return y;
    }

    void project_backward(const Tensor<S>& gy, const Tensor<S>& x, const Tensor<S>& w,
                          Tensor<S>& gw, Tensor<S>& gb, Tensor<S>& gx) const {
        gx.zero();
        project_backward_accum(gy, x, w, gw, gb, gx);
    }

    void project_backward_accum(const Tensor<S>& gy, const Tensor<S>& x, const Tensor<S>& w,
                                Tensor<S>& gw, Tensor<S>& gb, Tensor<S>& gx) const {
        const int n = x.dim(0);
        ConstMatMap<S> gym(gy.ptr(), n, channels_);
        ConstMatMap<S> xm(x.ptr(), n, channels_);
        ConstMatMap<S> wm(w.ptr(), channels_, channels_);
        MatMap<S> gwm(gw.ptr(), channels_, channels_);
        MatMap<S> gxm(gx.ptr(), n, channels_);
        gwm.noalias() += gym.transpose() * xm;
        gxm.noalias() += gym * wm;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < channels_; ++c)
                gb[c] += gy[static_cast<std::int64_t>(i) * channels_ + c];
    }

    int channels_, heads_, dh_;
    GroupNorm<S> norm_;
    Dropout<S> drop_;
    int h_ = 0, w_ = 0;
    Tensor<S> wq_, wk_, wv_, wo_, bq_, bk_, bv_, bo_;
    Tensor<S> gwq_, gwk_, gwv_, gwo_, gbq_, gbk_, gbv_, gbo_;
    Tensor<S> tokens_, q_, k_, v_, attn_, out_tokens_;
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsample.
// ---------------------------------------------------------------------------
template <typename S>
class UpsampleNearest2x {
public:
    Tensor<S> forward(const Tensor<S>& x) {
        c_ = x.dim(0);
        h_ = x.dim(1);
        w_ = x.dim(2);
        Tensor<S> y({c_, 2 * h_, 2 * w_});
        for (int c = 0; c < c_; ++c)
            for (int r = 0; r < h_; ++r)
                for (int cc = 0; cc < w_; ++cc) {
                    const S v = x[(static_cast<std::int64_t>(c) * h_ + r) * w_ + cc];
                    const std::int64_t base =
                        (static_cast<std::int64_t>(c) * 2 * h_ + 2 * r) * 2 * w_ + 2 * cc;
                    y[base] = v;
                    y[base + 1] = v;
                    y[base + 2 * w_] = v;
                    y[base + 2 * w_ + 1] = v;
                }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& gy) {
        Tensor<S> gx({c_, h_, w_});
        for (int c = 0; c < c_; ++c)
            for (int r = 0; r < h_; ++r)
                for (int cc = 0; cc < w_; ++cc) {
                    const std::int64_t base =
                        (static_cast<std::int64_t>(c) * 2 * h_ + 2 * r) * 2 * w_ + 2 * cc;
                    gx[(static_cast<std::int64_t>(c) * h_ + r) * w_ + cc] =
                        gy[base] + gy[base + 1] + gy[base + 2 * w_] + gy[base + 2 * w_ + 1];
                }
        return gx;
    }

private:
    int c_ = 0, h_ = 0, w_ = 0;
};

}  // namespace urbandiff::nn
