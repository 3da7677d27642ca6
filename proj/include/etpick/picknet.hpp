#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "etpick/params.hpp"
#include "etpick/rng.hpp"
#include "etpick/tape.hpp"
#include "etpick/tensor.hpp"

namespace etpick {

// Asymmetric U-Net: a three-conv stem reaching stride 2, three residual
// encoder stages at strides 4/8/16, and a lighter decoder that upsamples
// with skip concatenation only down to the output stride R, where a 1x1x1
// head + sigmoid emits the C-channel heatmap.
struct NetConfig {
    int in_channels = 1;
    int num_classes = 6;
    int stem_channels = 16;
    std::vector<int> encoder_channels = {32, 64, 128};  // strides 4, 8, 16
    std::vector<int> decoder_channels = {64, 32, 16};   // back down to stride R
    int output_stride = 2;                              // R in {1, 2, 4}
    int norm_groups = 8;

    static constexpr int kDeepestStride = 16;

    int decoder_stages_required() const {
        int s = kDeepestStride, n = 0;
        while (s > output_stride) {
            s /= 2;
            ++n;
        }
        return n;
    }

    void validate() const {
        if (in_channels < 1 || num_classes < 1 || stem_channels < 1 || norm_groups < 1)
            throw std::invalid_argument("net config: counts must be positive");
        if (output_stride != 1 && output_stride != 2 && output_stride != 4)
            throw std::invalid_argument("net config: output stride must be 1, 2 or 4");
        if (encoder_channels.size() != 3)
            throw std::invalid_argument("net config: encoder has 3 stages (strides 4, 8, 16)");
        if (static_cast<int>(decoder_channels.size()) != decoder_stages_required())
            throw std::invalid_argument("net config: decoder must end at the output stride");
    }

    // group count per layer: G shrinks to the channel count when needed
    int groups_for(int channels) const {
        int g = std::min(norm_groups, channels);
        while (channels % g != 0) --g;
        return g;
    }

    static NetConfig desk_default(int num_classes) {
        NetConfig c;
        c.num_classes = num_classes;
        return c;
    }

    // small widths for the synthetic-benchmark experiments and fast tests
    static NetConfig compact(int num_classes) {
        NetConfig c;
        c.num_classes = num_classes;
        c.stem_channels = 8;
        c.encoder_channels = {16, 32, 64};
        c.decoder_channels = {32, 16, 8};
        return c;
    }

    static NetConfig tiny(int num_classes) {
        NetConfig c;
        c.num_classes = num_classes;
        c.stem_channels = 4;
        c.encoder_channels = {6, 8, 12};
        c.decoder_channels = {8, 6, 4};
        c.norm_groups = 2;
        return c;
    }
};

template <typename T>
struct PickerModel {
    NetConfig config;
    ParamSet<T> params;
};

using PickerModelF = PickerModel<float>;

// He-style fan-in init, one named substream per tensor so the layout of the
// build loop cannot change the draw order.
template <typename T>
Tensor<T> he_init(const std::vector<int>& shape, std::int64_t fan_in, std::uint64_t seed,
                  const std::string& name, double scale = 1.0) {
    Tensor<T> t(shape);
    Rng rng = Rng::stream(seed, "init." + name);
    const double sd = scale * std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(sd * rng.normal());
    return t;
}

template <typename T>
class PickNet {
public:
    // Parameter layout (names are stable; checkpoints key on them):
    //   stem0|stem1|stem2 . {w,b,gn_gain,gn_shift}
    //   enc{1,2,3} . {conv1,conv2,proj} x {w,b} + gn1/gn2/gnp affine
    //   dec{1..} . {w,b,gn_gain,gn_shift}
    //   head . {w,b}
    static PickerModel<T> build(const NetConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        PickerModel<T> m;
        m.config = cfg;
        auto& ps = m.params;

        auto add_conv = [&](const std::string& name, int cin, int cout, int k, double scale = 1.0) {
            ps.add(name + ".w",
                   he_init<T>({cout, cin, k, k, k}, static_cast<std::int64_t>(cin) * k * k * k,
                              seed, name + ".w", scale));
            ps.add(name + ".b", Tensor<T>({cout}));
        };
        auto add_gn = [&](const std::string& name, int ch) {
            ps.add(name + ".gain", Tensor<T>({ch}, T(1)));
            ps.add(name + ".shift", Tensor<T>({ch}));
        };

        const int st = cfg.stem_channels;
        add_conv("stem0", cfg.in_channels, st, 3);
        add_gn("stem0.gn", st);
        add_conv("stem1", st, st, 3);
        add_gn("stem1.gn", st);
        add_conv("stem2", st, st, 3);
        add_gn("stem2.gn", st);

        int cin = st;
        for (int s = 0; s < 3; ++s) {
            const std::string pre = "enc" + std::to_string(s + 1);
            const int cout = cfg.encoder_channels[static_cast<std::size_t>(s)];
            add_conv(pre + ".conv1", cin, cout, 3);
            add_gn(pre + ".gn1", cout);
            add_conv(pre + ".conv2", cout, cout, 3);
            add_gn(pre + ".gn2", cout);
            add_conv(pre + ".proj", cin, cout, 1);
            add_gn(pre + ".gnp", cout);
            cin = cout;
        }

        // skip channels: stride 8, 4, 2, (1) sources in decode order
        std::vector<int> skip_ch = {cfg.encoder_channels[1], cfg.encoder_channels[0], st, st};
        for (int s = 0; s < static_cast<int>(cfg.decoder_channels.size()); ++s) {
            const std::string pre = "dec" + std::to_string(s + 1);
            const int cout = cfg.decoder_channels[static_cast<std::size_t>(s)];
            add_conv(pre, cin + skip_ch[static_cast<std::size_t>(s)], cout, 3);
            add_gn(pre + ".gn", cout);
            cin = cout;
        }

        // small init keeps initial sigmoid outputs near 0.5
        add_conv("head", cin, cfg.num_classes, 1, 0.05);
        return m;
    }

    struct Forward {
        nn::Graph<T> graph;
        int output = -1;                 // sigmoid heatmap node
        int input_node = -1;
        std::vector<int> param_nodes;    // aligned with ParamSet order
    };

    // Tapes the parameters onto an existing graph (leaf copies). With
    // train=true the leaves require gradients.
    static std::vector<int> tape_params(nn::Graph<T>& g, const PickerModel<T>& m, bool train) {
        std::vector<int> nodes;
        nodes.reserve(static_cast<std::size_t>(m.params.size()));
        for (int i = 0; i < m.params.size(); ++i)
            nodes.push_back(g.leaf(m.params.tensors[static_cast<std::size_t>(i)], train));
        return nodes;
    }

    // Runs one forward pass on an existing graph; several passes may share
    // the same taped parameters (multi-crop and consistency losses).
    static int forward_taped(nn::Graph<T>& g, const PickerModel<T>& m,
                             const std::vector<int>& param_nodes, Tensor<T> input,
                             bool input_needs_grad = false, int* input_node_out = nullptr) {
        const NetConfig& cfg = m.config;
        if (input.ndim() != 4 || input.dim(0) != cfg.in_channels)
            throw std::invalid_argument("forward: input must be (in_channels, D, H, W)");
        for (int a = 1; a < 4; ++a)
            if (input.dim(a) % NetConfig::kDeepestStride != 0)
                throw std::invalid_argument(
                    "forward: spatial dims must be divisible by " +
                    std::to_string(NetConfig::kDeepestStride) + ", got " + shape_str(input.shape));

        auto P = [&](const std::string& name) {
            return param_nodes[static_cast<std::size_t>(m.params.index_of(name))];
        };

        const int x = g.leaf(std::move(input), input_needs_grad);
        if (input_node_out) *input_node_out = x;

        auto conv_gn_relu = [&](int in, const std::string& name, int stride, int k, int ch) {
            int c = nn::conv3(g, in, P(name + ".w"), P(name + ".b"), stride, k / 2);
            c = nn::groupnorm(g, c, cfg.groups_for(ch), P(name + ".gn.gain"), P(name + ".gn.shift"));
            return nn::relu(g, c);
        };

        const int st = cfg.stem_channels;
        const int s0 = conv_gn_relu(x, "stem0", 1, 3, st);   // stride 1
        const int s1 = conv_gn_relu(s0, "stem1", 2, 3, st);  // stride 2
        const int s2 = conv_gn_relu(s1, "stem2", 1, 3, st);  // stride 2

        auto resblock = [&](int in, const std::string& pre, int cout) {
            int h = nn::conv3(g, in, P(pre + ".conv1.w"), P(pre + ".conv1.b"), 2, 1);
            h = nn::groupnorm(g, h, cfg.groups_for(cout), P(pre + ".gn1.gain"), P(pre + ".gn1.shift"));
            h = nn::relu(g, h);
            h = nn::conv3(g, h, P(pre + ".conv2.w"), P(pre + ".conv2.b"), 1, 1);
            h = nn::groupnorm(g, h, cfg.groups_for(cout), P(pre + ".gn2.gain"), P(pre + ".gn2.shift"));
            int sc = nn::conv3(g, in, P(pre + ".proj.w"), P(pre + ".proj.b"), 2, 0);
            sc = nn::groupnorm(g, sc, cfg.groups_for(cout), P(pre + ".gnp.gain"), P(pre + ".gnp.shift"));
            return nn::relu(g, nn::add(g, h, sc));
        };

        const int e1 = resblock(s2, "enc1", cfg.encoder_channels[0]);  // stride 4
        const int e2 = resblock(e1, "enc2", cfg.encoder_channels[1]);  // stride 8
        const int e3 = resblock(e2, "enc3", cfg.encoder_channels[2]);  // stride 16

        const std::vector<int> skips = {e2, e1, s2, s0};
        int d = e3;
        for (int s = 0; s < static_cast<int>(cfg.decoder_channels.size()); ++s) {
            const std::string pre = "dec" + std::to_string(s + 1);
            const int ch = cfg.decoder_channels[static_cast<std::size_t>(s)];
            int u = nn::upsample2(g, d);
            u = nn::concat_channels(g, u, skips[static_cast<std::size_t>(s)]);
            d = conv_gn_relu(u, pre, 1, 3, ch);
        }

        const int logits = nn::conv3(g, d, P("head.w"), P("head.b"), 1, 0);
        return nn::sigmoid(g, logits);
    }

    static Forward forward(const PickerModel<T>& m, Tensor<T> input, bool train,
                           bool input_needs_grad = false) {
        Forward f;
        f.param_nodes = tape_params(f.graph, m, train);
        f.output = forward_taped(f.graph, m, f.param_nodes, std::move(input), input_needs_grad,
                                 &f.input_node);
        return f;
    }

    // Inference-only forward; returns just the heatmap tensor.
    static Tensor<T> predict(const PickerModel<T>& m, Tensor<T> input) {
        Forward f = forward(m, std::move(input), false);
        return f.graph.value(f.output);
    }

    static ParamSet<T> clone_params(const PickerModel<T>& m) { return m.params.clone(); }
};

using PickNetF = PickNet<float>;
using PickNetD = PickNet<double>;

}  // namespace etpick
