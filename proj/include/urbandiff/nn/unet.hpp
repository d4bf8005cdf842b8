#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "urbandiff/nn/layers.hpp"

namespace urbandiff::nn {

// Architecture contract of the noise-predicting U-Net. The default matches
// the full-scale model; tiny() is the desk-scale configuration used by tests
// and the toy pipeline. Normalization style, activation and resampling
// operators are implementation choices documented here: group normalization,
// SiLU, strided-conv downsampling and nearest-neighbor + conv upsampling,
// with a sinusoidal timestep embedding injected per residual block.
struct DenoiserConfig {
    int levels = 4;
    std::vector<int> channel_widths = {64, 128, 256, 256};
    int blocks_per_level = 2;
    std::vector<int> attention_levels = {2, 3};  // two deepest
    int attention_heads = 8;
    double dropout = 0.1;
    int input_channels = 3;  // noisy LST + built-up + elevation
    int output_channels = 1;
    int spatial_size = 128;
    int norm_groups = 32;

    static DenoiserConfig paper() { return {}; }

    static DenoiserConfig tiny() {
        DenoiserConfig c;
        c.levels = 2;
        c.channel_widths = {8, 16};
        c.blocks_per_level = 1;
        c.attention_levels = {1};
        c.attention_heads = 2;
        c.dropout = 0.1;
        c.spatial_size = 16;
        c.norm_groups = 4;
        return c;
    }

    void validate() const {
        if (levels < 1) throw ParameterError("levels must be >= 1");
        if (static_cast<int>(channel_widths.size()) != levels)
            throw ParameterError("channel_widths must list one width per level");
        for (int w : channel_widths)
            if (w < 1) throw ParameterError("channel widths must be positive");
        if (blocks_per_level < 1) throw ParameterError("blocks_per_level must be >= 1");
        for (int l : attention_levels)
            if (l < 0 || l >= levels)
                throw ParameterError("attention level " + std::to_string(l) + " out of range");
        if (attention_heads < 1) throw ParameterError("attention_heads must be >= 1");
        if (input_channels < 1 || output_channels < 1)
            throw ParameterError("channel counts must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ParameterError("dropout must lie in [0, 1)");
        const int down_factor = 1 << (levels - 1);
        if (spatial_size < down_factor || spatial_size % down_factor != 0)
            throw ParameterError("spatial_size must be divisible by 2^(levels-1)");
        if (norm_groups < 1) throw ParameterError("norm_groups must be >= 1");
    }

    bool has_attention(int level) const {
        for (int l : attention_levels)
            if (l == level) return true;
        return false;
    }

    bool operator==(const DenoiserConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const DenoiserConfig& c) {
    j = nlohmann::json{{"levels", c.levels},
                       {"channel_widths", c.channel_widths},
                       {"blocks_per_level", c.blocks_per_level},
                       {"attention_levels", c.attention_levels},
                       {"attention_heads", c.attention_heads},
                       {"dropout", c.dropout},
                       {"input_channels", c.input_channels},
                       {"output_channels", c.output_channels},
                       {"spatial_size", c.spatial_size},
                       {"norm_groups", c.norm_groups}};
}

inline void from_json(const nlohmann::json& j, DenoiserConfig& c) {
    j.at("levels").get_to(c.levels);
    j.at("channel_widths").get_to(c.channel_widths);
    j.at("blocks_per_level").get_to(c.blocks_per_level);
    j.at("attention_levels").get_to(c.attention_levels);
    j.at("attention_heads").get_to(c.attention_heads);
    j.at("dropout").get_to(c.dropout);
    j.at("input_channels").get_to(c.input_channels);
    j.at("output_channels").get_to(c.output_channels);
    j.at("spatial_size").get_to(c.spatial_size);
    j.at("norm_groups").get_to(c.norm_groups);
}

// Largest divisor of `channels` not exceeding the requested group count.
inline int groups_for(int channels, int requested) {
    for (int g = std::min(requested, channels); g > 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

// ---------------------------------------------------------------------------
// Residual block with per-block timestep injection.
// ---------------------------------------------------------------------------
template <typename S>
class ResBlock {
public:
    ResBlock(int cin, int cout, int temb_dim, int norm_groups, double dropout)
        : cin_(cin),
          cout_(cout),
          norm1_(cin, groups_for(cin, norm_groups)),
          norm2_(cout, groups_for(cout, norm_groups)),
          conv1_(cin, cout, 3, 1, 1),
          conv2_(cout, cout, 3, 1, 1),
          temb_proj_(temb_dim, cout),
          drop_(dropout) {
        if (cin != cout) skip_ = std::make_unique<Conv2d<S>>(cin, cout, 1, 1, 0);
    }

    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng, 0.0);  // residual tail starts at zero
        temb_proj_.init(rng);
        if (skip_) skip_->init(rng);
    }

    Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& temb, bool training, Rng* rng) {
        x_in_shape_ = x.shape;
        Tensor<S> h = conv1_.forward(silu1_.forward(norm1_.forward(x)));
        Tensor<S> e = temb_proj_.forward(silu_emb_.forward(temb));
        const std::int64_t hw = static_cast<std::int64_t>(h.dim(1)) * h.dim(2);
        for (int c = 0; c < cout_; ++c)
            for (std::int64_t i = 0; i < hw; ++i) h[static_cast<std::int64_t>(c) * hw + i] += e[c];
        h = conv2_.forward(drop_.forward(silu2_.forward(norm2_.forward(h)), training, rng));

        Tensor<S> sx = skip_ ? skip_->forward(x) : x;
        for (std::int64_t i = 0; i < h.size(); ++i) h[i] += sx[i];
        return h;
    }

    // Returns gx; adds this block's timestep-embedding gradient into gtemb.
    Tensor<S> backward(const Tensor<S>& gy, Tensor<S>& gtemb) {
        Tensor<S> gh = conv2_.backward(gy);
        gh = norm2_.backward(silu2_.backward(drop_.backward(gh)));

        // Split at the embedding add: per-channel sum feeds the temb path.
        const std::int64_t hw = gh.size() / cout_;
        Tensor<S> ge({cout_});
        for (int c = 0; c < cout_; ++c) {
            S acc = S(0);
            for (std::int64_t i = 0; i < hw; ++i) acc += gh[static_cast<std::int64_t>(c) * hw + i];
            ge[c] = acc;
        }
        Tensor<S> gt = silu_emb_.backward(temb_proj_.backward(ge));
        for (std::int64_t i = 0; i < gt.size(); ++i) gtemb[i] += gt[i];

        Tensor<S> gx = norm1_.backward(silu1_.backward(conv1_.backward(gh)));
        if (skip_) {
            Tensor<S> gs = skip_->backward(gy);
            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gs[i];
        } else {
            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        }
        return gx;
    }

    void params(std::vector<ParamRef<S>>& out, const std::string& prefix) {
        norm1_.params(out, prefix + ".norm1");
        conv1_.params(out, prefix + ".conv1");
        temb_proj_.params(out, prefix + ".temb");
        norm2_.params(out, prefix + ".norm2");
        conv2_.params(out, prefix + ".conv2");
        if (skip_) skip_->params(out, prefix + ".skip");
    }

private:
    int cin_, cout_;
    GroupNorm<S> norm1_, norm2_;
    Conv2d<S> conv1_, conv2_;
    Linear<S> temb_proj_;
    Dropout<S> drop_;
    SiLU<S> silu1_, silu2_, silu_emb_;
    std::unique_ptr<Conv2d<S>> skip_;
    std::vector<int> x_in_shape_;
};

// ---------------------------------------------------------------------------
// U-Net: stem -> per-level residual (+attention) stacks with strided-conv
// downsampling -> middle (res, attention, res) -> mirrored upsampling path
// with skip concatenation -> norm/SiLU/conv head.
// ---------------------------------------------------------------------------
template <typename S>
class UNet {
public:
    explicit UNet(const DenoiserConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const int w0 = cfg_.channel_widths[0];
        temb_dim_ = 4 * w0;
        if (w0 % 2 != 0) throw ParameterError("base channel width must be even");

        stem_ = std::make_unique<Conv2d<S>>(cfg_.input_channels, w0, 3, 1, 1);
        temb_lin1_ = std::make_unique<Linear<S>>(temb_dim_, temb_dim_);
        temb_lin2_ = std::make_unique<Linear<S>>(temb_dim_, temb_dim_);

        for (int level = 0; level < cfg_.levels; ++level) {
            const int w = cfg_.channel_widths[level];
            const int prev = level == 0 ? w0 : cfg_.channel_widths[level - 1];
            DownLevel down;
            for (int b = 0; b < cfg_.blocks_per_level; ++b) {
                const int cin = b == 0 ? prev : w;
                down.blocks.push_back(std::make_unique<ResBlock<S>>(cin, w, temb_dim_,
                                                                    cfg_.norm_groups,
                                                                    cfg_.dropout));
                if (cfg_.has_attention(level))
                    down.attns.push_back(std::make_unique<SelfAttention2d<S>>(
                        w, cfg_.attention_heads, groups_for(w, cfg_.norm_groups), cfg_.dropout));
            }
            if (level + 1 < cfg_.levels)
                down.downsample = std::make_unique<Conv2d<S>>(w, w, 3, 2, 1);
            down_.push_back(std::move(down));
        }

        const int wmid = cfg_.channel_widths.back();
        mid_res1_ = std::make_unique<ResBlock<S>>(wmid, wmid, temb_dim_, cfg_.norm_groups,
                                                  cfg_.dropout);
        mid_attn_ = std::make_unique<SelfAttention2d<S>>(
            wmid, cfg_.attention_heads, groups_for(wmid, cfg_.norm_groups), cfg_.dropout);
        mid_res2_ = std::make_unique<ResBlock<S>>(wmid, wmid, temb_dim_, cfg_.norm_groups,
                                                  cfg_.dropout);

        for (int level = cfg_.levels - 1; level >= 0; --level) {
            const int w = cfg_.channel_widths[level];
            UpLevel up;
            up.level = level;
            for (int b = 0; b < cfg_.blocks_per_level; ++b) {
                const int cin = b == 0 ? 2 * w : w;  // first block consumes the skip concat
                up.blocks.push_back(std::make_unique<ResBlock<S>>(cin, w, temb_dim_,
                                                                  cfg_.norm_groups,
                                                                  cfg_.dropout));
                if (cfg_.has_attention(level))
                    up.attns.push_back(std::make_unique<SelfAttention2d<S>>(
                        w, cfg_.attention_heads, groups_for(w, cfg_.norm_groups), cfg_.dropout));
            }
            if (level > 0)
                up.upconv = std::make_unique<Conv2d<S>>(w, cfg_.channel_widths[level - 1], 3, 1, 1);
            up_.push_back(std::move(up));
        }

        out_norm_ = std::make_unique<GroupNorm<S>>(w0, groups_for(w0, cfg_.norm_groups));
        out_conv_ = std::make_unique<Conv2d<S>>(w0, cfg_.output_channels, 3, 1, 1);
    }

    const DenoiserConfig& config() const { return cfg_; }
    int temb_dim() const { return temb_dim_; }

    void init_params(Rng& rng) {
        stem_->init(rng);
        temb_lin1_->init(rng);
        temb_lin2_->init(rng);
        for (auto& level : down_) {
            for (auto& b : level.blocks) b->init(rng);
            for (auto& a : level.attns) a->init(rng);
            if (level.downsample) level.downsample->init(rng);
        }
        mid_res1_->init(rng);
        mid_attn_->init(rng);
        mid_res2_->init(rng);
        for (auto& level : up_) {
            for (auto& b : level.blocks) b->init(rng);
            for (auto& a : level.attns) a->init(rng);
            if (level.upconv) level.upconv->init(rng);
        }
        // Small but nonzero head: a fresh model must not be constant.
        out_conv_->init(rng, 0.01);
    }

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }

    // x: [input_channels, H, W]; t: physical timestep. dropout_rng is only
    // consulted in training mode.
    Tensor<S> forward(const Tensor<S>& x, int t, Rng* dropout_rng = nullptr) {
        if (x.shape.size() != 3 || x.dim(0) != cfg_.input_channels)
            throw ShapeError("denoiser input must be [" + std::to_string(cfg_.input_channels) +
                             ", H, W], got " + shape_string(x));
        Rng* rng = training_ ? dropout_rng : nullptr;

        Tensor<S> temb = timestep_embedding(t);
        temb = temb_lin2_->forward(temb_silu_.forward(temb_lin1_->forward(temb)));
        temb_ = temb;

        Tensor<S> h = stem_->forward(x);
        skips_.clear();
        for (auto& level : down_) {
            for (std::size_t b = 0; b < level.blocks.size(); ++b) {
                h = level.blocks[b]->forward(h, temb, training_, rng);
                if (!level.attns.empty()) h = level.attns[b]->forward(h, training_, rng);
            }
            skips_.push_back(h);
            if (level.downsample) h = level.downsample->forward(h);
        }

        h = mid_res1_->forward(h, temb, training_, rng);
        h = mid_attn_->forward(h, training_, rng);
        h = mid_res2_->forward(h, temb, training_, rng);

        for (auto& level : up_) {
            h = concat_channels(h, skips_[level.level]);
            for (std::size_t b = 0; b < level.blocks.size(); ++b) {
                h = level.blocks[b]->forward(h, temb, training_, rng);
                if (!level.attns.empty()) h = level.attns[b]->forward(h, training_, rng);
            }
            if (level.upconv) {
                h = level.up2x.forward(h);
                h = level.upconv->forward(h);
            }
        }

        h = out_conv_->forward(out_silu_.forward(out_norm_->forward(h)));
        return h;
    }

    // Propagates back to the input; parameter gradients accumulate in place.
    Tensor<S> backward(const Tensor<S>& gy) {
        Tensor<S> gtemb({temb_dim_});
        Tensor<S> gh = out_norm_->backward(out_silu_.backward(out_conv_->backward(gy)));

        std::vector<Tensor<S>> gskips(skips_.size());
        for (auto it = up_.rbegin(); it != up_.rend(); ++it) {
            auto& level = *it;
            if (level.upconv) {
                gh = level.upconv->backward(gh);
                gh = level.up2x.backward(gh);
            }
            for (std::size_t b = level.blocks.size(); b-- > 0;) {
                if (!level.attns.empty()) gh = level.attns[b]->backward(gh);
                gh = level.blocks[b]->backward(gh, gtemb);
            }
            split_concat(gh, gskips[level.level], level.level);
        }

        gh = mid_res2_->backward(gh, gtemb);
        gh = mid_attn_->backward(gh);
        gh = mid_res1_->backward(gh, gtemb);

        for (auto it = down_.rbegin(); it != down_.rend(); ++it) {
            auto& level = *it;
            const std::size_t level_index = static_cast<std::size_t>(it.base() - down_.begin()) - 1;
            if (level.downsample) gh = level.downsample->backward(gh);
            // Skip gradient joins at the point the skip was recorded.
            Tensor<S>& gs = gskips[level_index];
            for (std::int64_t i = 0; i < gh.size(); ++i) gh[i] += gs[i];
            for (std::size_t b = level.blocks.size(); b-- > 0;) {
                if (!level.attns.empty()) gh = level.attns[b]->backward(gh);
                gh = level.blocks[b]->backward(gh, gtemb);
            }
        }

        Tensor<S> gx = stem_->backward(gh);
        temb_lin1_->backward(temb_silu_.backward(temb_lin2_->backward(gtemb)));
        return gx;
    }

    std::vector<ParamRef<S>> parameters() {
        std::vector<ParamRef<S>> out;
        stem_->params(out, "stem");
        temb_lin1_->params(out, "temb.lin1");
        temb_lin2_->params(out, "temb.lin2");
        for (std::size_t l = 0; l < down_.size(); ++l) {
            const std::string base = "down." + std::to_string(l);
            for (std::size_t b = 0; b < down_[l].blocks.size(); ++b) {
                down_[l].blocks[b]->params(out, base + ".block" + std::to_string(b));
                if (!down_[l].attns.empty())
                    down_[l].attns[b]->params(out, base + ".attn" + std::to_string(b));
            }
            if (down_[l].downsample) down_[l].downsample->params(out, base + ".downsample");
        }
        mid_res1_->params(out, "mid.res1");
        mid_attn_->params(out, "mid.attn");
        mid_res2_->params(out, "mid.res2");
        for (auto& level : up_) {
            const std::string base = "up." + std::to_string(level.level);
            for (std::size_t b = 0; b < level.blocks.size(); ++b) {
                level.blocks[b]->params(out, base + ".block" + std::to_string(b));
                if (!level.attns.empty())
                    level.attns[b]->params(out, base + ".attn" + std::to_string(b));
            }
            if (level.upconv) level.upconv->params(out, base + ".upconv");
        }
        out_norm_->params(out, "out.norm");
        out_conv_->params(out, "out.conv");
        return out;
    }

    void zero_grads() {
        for (auto& p : parameters()) p.grad->zero();
    }

    std::int64_t parameter_count() {
        std::int64_t n = 0;
        for (auto& p : parameters()) n += p.value->size();
        return n;
    }

private:
    struct DownLevel {
        std::vector<std::unique_ptr<ResBlock<S>>> blocks;
        std::vector<std::unique_ptr<SelfAttention2d<S>>> attns;
        std::unique_ptr<Conv2d<S>> downsample;
    };
    struct UpLevel {
        int level = 0;
        std::vector<std::unique_ptr<ResBlock<S>>> blocks;
        std::vector<std::unique_ptr<SelfAttention2d<S>>> attns;
        UpsampleNearest2x<S> up2x;
        std::unique_ptr<Conv2d<S>> upconv;
    };

    // Sinusoidal embedding at the full MLP width; the frequency ladder must
    // resolve t across the whole training schedule even for narrow models.
    Tensor<S> timestep_embedding(int t) const {
        const int half = temb_dim_ / 2;
        Tensor<S> emb({temb_dim_});
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            emb[i] = static_cast<S>(std::sin(t * freq));
            emb[half + i] = static_cast<S>(std::cos(t * freq));
        }
        return emb;
    }

    Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
        if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
            throw ShapeError("skip concat spatial mismatch");
        Tensor<S> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
        std::copy(a.data.begin(), a.data.end(), y.data.begin());
        std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.size());
        return y;
    }

    // Splits the concat gradient in place: gh keeps the leading part, the
    // trailing part lands in gskip.
    void split_concat(Tensor<S>& gh, Tensor<S>& gskip, int level) {
        const int w = cfg_.channel_widths[level];
        const int total = gh.dim(0);
        const int lead = total - w;
        Tensor<S> head({lead, gh.dim(1), gh.dim(2)});
        gskip = Tensor<S>({w, gh.dim(1), gh.dim(2)});
        std::copy(gh.data.begin(), gh.data.begin() + head.size(), head.data.begin());
        std::copy(gh.data.begin() + head.size(), gh.data.end(), gskip.data.begin());
        gh = std::move(head);
    }

    DenoiserConfig cfg_;
    int temb_dim_ = 0;
    bool training_ = false;

    std::unique_ptr<Conv2d<S>> stem_;
    std::unique_ptr<Linear<S>> temb_lin1_, temb_lin2_;
    SiLU<S> temb_silu_;
    std::vector<DownLevel> down_;
    std::unique_ptr<ResBlock<S>> mid_res1_, mid_res2_;
    std::unique_ptr<SelfAttention2d<S>> mid_attn_;
    std::vector<UpLevel> up_;
    std::unique_ptr<GroupNorm<S>> out_norm_;
    SiLU<S> out_silu_;
    std::unique_ptr<Conv2d<S>> out_conv_;

    std::vector<Tensor<S>> skips_;
    Tensor<S> temb_;
};

}  // namespace urbandiff::nn
