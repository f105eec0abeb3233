// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mpt {

Tensor trunc_normal_init(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.trunc_normal(stddev);
    return t;
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng, double stddev) {
    Linear l;
    l.w = &store.create(name + ".w", trunc_normal_init(in, out, rng, stddev));
    l.b = &store.create(name + ".b", Tensor(1, out));
    return l;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, std::size_t n) {
    LayerNorm ln;
    ln.gain = &store.create(name + ".gain", Tensor::full(1, n, 1.0));
    ln.bias = &store.create(name + ".bias", Tensor(1, n));
    return ln;
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& store, const std::string& name,
                                              std::size_t channels, std::size_t heads,
                                              Rng& rng) {
    if (heads == 0 || channels % heads != 0)
        throw std::invalid_argument("attention: channels must be divisible by heads");
    MultiHeadAttention a;
    a.heads = heads;
    a.channels = channels;
    a.q = Linear::create(store, name + ".q", channels, channels, rng);
    a.k = Linear::create(store, name + ".k", channels, channels, rng);
    a.v = Linear::create(store, name + ".v", channels, channels, rng);
    a.o = Linear::create(store, name + ".o", channels, channels, rng);
    return a;
}

Var MultiHeadAttention::apply(Tape& t, Var q_in, Var k_in, Var v_in) const {
    const std::size_t c = channels;
    if (t.value(q_in).cols() != c || t.value(k_in).cols() != c || t.value(v_in).cols() != c)
        throw std::invalid_argument("attention: channel mismatch");
    if (t.value(k_in).rows() != t.value(v_in).rows())
        throw std::invalid_argument("attention: key/value length mismatch");
    const std::size_t dh = c / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Var qp = q.apply(t, q_in);
    const Var kp = k.apply(t, k_in);
    const Var vp = v.apply(t, v_in);

    std::vector<Var> head_out;
    head_out.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Var qh = t.slice_cols(qp, h * dh, (h + 1) * dh);
        const Var kh = t.slice_cols(kp, h * dh, (h + 1) * dh);
        const Var vh = t.slice_cols(vp, h * dh, (h + 1) * dh);
        const Var scores = t.scale(t.matmul_nt(qh, kh), inv_scale);
        const Var attn = t.softmax_rows(scores);
        head_out.push_back(t.matmul(attn, vh));
    }
    return o.apply(t, t.concat_cols(head_out));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                std::size_t out, Rng& rng, double stddev) {
    Mlp m;
    m.fc1 = Linear::create(store, name + ".fc1", in, hidden, rng, stddev);
    m.fc2 = Linear::create(store, name + ".fc2", hidden, out, rng, stddev);
    return m;
}

}  // namespace mpt
