// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/fusion_decoder.hpp"

#include <stdexcept>

namespace mpt {

DecoderBlock DecoderBlock::create(ParamStore& store, const std::string& name,
                                  const ModelConfig& cfg, Rng& rng) {
    const auto c = static_cast<std::size_t>(cfg.channels);
    DecoderBlock b;
    b.ln_self = LayerNorm::create(store, name + ".ln_self", c);
    b.self_attn = MultiHeadAttention::create(store, name + ".self_attn", c, cfg.heads, rng);
    b.ln_cross_q = LayerNorm::create(store, name + ".ln_cross_q", c);
    b.ln_cross_kv = LayerNorm::create(store, name + ".ln_cross_kv", c);
    b.cross_mv = MultiHeadAttention::create(store, name + ".cross_mv", c, cfg.heads, rng);
    b.ln_mlp = LayerNorm::create(store, name + ".ln_mlp", c);
    b.mlp = Mlp::create(store, name + ".mlp", c, cfg.decoder_mlp_hidden, c, rng);
    b.ln_vis_q = LayerNorm::create(store, name + ".ln_vis_q", c);
    b.ln_rep_kv = LayerNorm::create(store, name + ".ln_rep_kv", c);
    b.cross_vr = MultiHeadAttention::create(store, name + ".cross_vr", c, cfg.heads, rng);
    return b;
}

DecoderBlock::Streams DecoderBlock::forward(Tape& t, Var motion, Var vision, Var motion_pe,
                                            Var dsm, int rep_row_start) const {
    // (1) self-attention over motion tokens
    const Var mn = ln_self.apply(t, motion);
    Var m = t.add(motion, self_attn.apply(t, mn, mn, mn));

    // (2) motion queries attend over the visual map
    const Var mq = t.add(ln_cross_q.apply(t, m), motion_pe);
    const Var vn = ln_cross_kv.apply(t, vision);
    const Var vk = t.add(vn, dsm);
    m = t.add(m, cross_mv.apply(t, mq, vk, vn));

    // (3) MLP update on the motion stream
    m = t.add(m, mlp.apply(t, ln_mlp.apply(t, m)));

    // (4) visual queries attend over the three post-MLP rep-token rows
    const std::size_t rows = t.value(m).rows();
    const Var rep = ln_rep_kv.apply(
        t, t.slice_rows(m, static_cast<std::size_t>(rep_row_start), rows));
    const Var vq = t.add(ln_vis_q.apply(t, vision), dsm);
    const Var v = t.add(vision, cross_vr.apply(t, vq, rep, rep));

    return Streams{m, v};
}

FusionDecoder::FusionDecoder(ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : rep_row_start_(2 * cfg.traj_len), channels_(cfg.channels) {
    for (int i = 0; i < cfg.decoder_blocks; ++i)
        blocks_.push_back(DecoderBlock::create(store, "decoder.block" + std::to_string(i), cfg,
                                               rng));
    ln_final_ = LayerNorm::create(store, "decoder.ln_final",
                                  static_cast<std::size_t>(cfg.channels));
}

FusionDecoder::Out FusionDecoder::decode(Tape& t, Var motion_tokens, Var vision, Var motion_pe,
                                         Var dsm) const {
    if (t.value(motion_tokens).cols() != static_cast<std::size_t>(channels_) ||
        t.value(vision).cols() != static_cast<std::size_t>(channels_))
        throw std::invalid_argument("decode: channel mismatch");
    Var m = motion_tokens;
    Var v = vision;
    for (const DecoderBlock& b : blocks_) {
        const auto s = b.forward(t, m, v, motion_pe, dsm, rep_row_start_);
        m = s.motion;
        v = s.vision;
    }
    const std::size_t rows = t.value(m).rows();
    const Var rep = t.slice_rows(m, static_cast<std::size_t>(rep_row_start_), rows);
    return Out{v, ln_final_.apply(t, rep)};
}

WeightHead WeightHead::create(ParamStore& store, const std::string& name, const ModelConfig& cfg,
                              Rng& rng) {
    WeightHead h;
    // Readout heads need a live init: near-zero weights put the sigmoid
    // regression in the predict-the-mean basin and gradients cannot escape.
    h.mlp = Mlp::create(store, name, cfg.channels, cfg.head_hidden, 1, rng, 0.15);
    return h;
}

Var WeightHead::predict(Tape& t, Var rep_w_row) const {
    return t.sigmoid(mlp.apply(t, rep_w_row));
}

MotionHead MotionHead::create(ParamStore& store, const std::string& name, const ModelConfig& cfg,
                              Rng& rng) {
    MotionHead h;
    h.mlp = Mlp::create(store, name, 2 * cfg.channels, cfg.head_hidden, 4, rng, 0.15);
    return h;
}

Var MotionHead::predict(Tape& t, Var rep_tl_row, Var rep_br_row) const {
    const Var raw = mlp.apply(t, t.concat_cols({rep_tl_row, rep_br_row}));
    const Var s = t.sigmoid(raw);  // (cx, cy, w, h) in (0,1)
    const Var cx = t.slice_cols(s, 0, 1);
    const Var cy = t.slice_cols(s, 1, 2);
    const Var hw = t.scale(t.slice_cols(s, 2, 3), 0.5);
    const Var hh = t.scale(t.slice_cols(s, 3, 4), 0.5);
    const Var x1 = t.clamp01(t.sub(cx, hw));
    const Var y1 = t.clamp01(t.sub(cy, hh));
    const Var x2 = t.clamp01(t.add(cx, hw));
    const Var y2 = t.clamp01(t.add(cy, hh));
    return t.concat_cols({x1, y1, x2, y2});
}

Var adaptive_fuse(Tape& t, Var original, Var fused, Var w) {
    if (!t.value(original).same_shape(t.value(fused)))
        throw std::invalid_argument("adaptive_fuse: shape mismatch");
    const Var one_minus_w = t.add_const(t.scale(w, -1.0), 1.0);
    return t.add(t.mul_bcast(fused, w), t.mul_bcast(original, one_minus_w));
}

}  // namespace mpt
