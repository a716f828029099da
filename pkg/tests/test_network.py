import warnings

import numpy as np
import pytest
import torch

from viasnet.errors import ContractError
from viasnet.network import ABLATIONS, AblationMask, ModelConfig, build_model, load_checkpoint, param_count, \
    save_checkpoint
from viasnet.network.decoder import TemporalUpsample
from viasnet.network.encoders import AudioEncoder, SeparableConv3d, VisionEncoder
from viasnet.network.head import CenterBiasBlur, Readout, bottleneck_params

CAPS = ["a red ball on a blue background", "two green shapes move left"]


def inputs(cfg, b=2, t=8, seed=0, dtype=torch.float32):
    g = torch.Generator().manual_seed(seed)
    frames = torch.randn(b, t, 3, cfg.height, cfg.width, generator=g, dtype=dtype)
    audio = torch.randn(b, int(round(t / cfg.fps * cfg.audio_rate)), generator=g, dtype=dtype) * 0.3
    return frames, audio, CAPS[:b]


@pytest.fixture(scope="module")
def model(desk_config):
    return build_model(desk_config, seed=0).eval()


# -- encoders --------------------------------------------------------------

def test_vision_pyramid_shapes(desk_config):
    enc = VisionEncoder(desk_config)
    pyr = enc(torch.randn(2, 8, 3, 56, 96))
    assert [tuple(p.shape) for p in pyr] == [(2, 16, 8, 28, 48), (2, 32, 8, 14, 24), (2, 64, 4, 7, 12)]


def test_vision_shape_error_names_dims(desk_config):
    with pytest.raises(ContractError, match="56, 96"):
        VisionEncoder(desk_config)(torch.randn(1, 4, 3, 50, 96))


def test_lower_stages_are_spatial_only(desk_config):
    enc = VisionEncoder(desk_config)
    for stage, kind in zip(enc.stages, desk_config.vision_kinds):
        has_temporal = any(m.kernel_size[0] > 1 for m in stage.modules() if isinstance(m, torch.nn.Conv3d))
        assert has_temporal == (kind == "sep")


def test_separable_block_cheaper_than_full_3d():
    sep = SeparableConv3d(16, 32)
    full = torch.nn.Conv3d(16, 32, 3, padding=1)
    assert sum(p.numel() for p in sep.parameters()) < sum(p.numel() for p in full.parameters())


def test_temporal_conv_constant_input(desk_config):
    torch.manual_seed(0)
    sep = SeparableConv3d(3, 4).eval()
    x = torch.randn(1, 3, 1, 10, 10).expand(1, 3, 8, 10, 10).contiguous()
    y = sep(x)
    interior = y[:, :, 1:-1]
    assert torch.allclose(interior, interior[:, :, :1].expand_as(interior), atol=1e-6)


def test_audio_encoder_seven_layers(desk_config):
    enc = AudioEncoder(desk_config)
    assert len(enc.bottom_up) == 7
    assert all(isinstance(m, torch.nn.Conv1d) for m in enc.bottom_up)


def test_audio_pyramid_doubles_with_input(desk_config):
    enc = AudioEncoder(desk_config)
    a = [p.shape[-1] for p in enc(torch.randn(1, 4096))]
    b = [p.shape[-1] for p in enc(torch.randn(1, 8192))]
    assert b == [2 * x for x in a]


def test_audio_zero_input_finite_and_short_padded(desk_config):
    enc = AudioEncoder(desk_config)
    assert all(torch.isfinite(p).all() for p in enc(torch.zeros(1, 2048)))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        out = enc(torch.zeros(1, 10))
    assert w and all(torch.isfinite(p).all() for p in out)


# -- fusion / decoder ------------------------------------------------------

def test_attention_rows_sum_to_one(model, desk_config):
    frames, audio, caps = inputs(desk_config, b=1)
    ctx, pad = model.encode_context(audio, caps[:1])
    tokens = torch.randn(1, 30, desk_config.fusion_dim)
    _, weights = model.attention.joint(tokens, ctx, pad, return_weights=True)
    torch.testing.assert_close(weights.sum(-1), torch.ones_like(weights.sum(-1)))


def test_audio_token_permutation(desk_config):
    full = build_model(desk_config, seed=0).eval()
    none = build_model(desk_config, AblationMask(audio_attention=False, caption_attention=False), seed=0).eval()
    frames, audio, caps = inputs(desk_config, b=1)
    skips = full.vision(frames)
    x = skips[-1]
    ctx, pad = full.encode_context(audio, caps[:1])
    n_audio = min(desk_config.audio_tokens, full.audio(audio)[0].shape[-1])
    perm = torch.cat([torch.randperm(n_audio, generator=torch.Generator().manual_seed(1)),
                      torch.arange(n_audio, ctx.shape[1])])
    with torch.no_grad():
        a = full.attention(x, 0, ctx, pad)
        b = full.attention(x, 0, ctx[:, perm], pad[:, perm])
        assert not torch.allclose(a, b)
        c = none.attention(none.vision(frames)[-1], 0, None, None)
        d = none.attention(none.vision(frames)[-1], 0, None, None)
        assert torch.equal(c, d)


def test_temporal_upsampler_has_no_parameters():
    assert sum(p.numel() for p in TemporalUpsample().parameters()) == 0


def test_zeroing_skip_changes_output(model, desk_config):
    frames, audio, caps = inputs(desk_config, b=1)
    with torch.no_grad():
        skips = model.vision(frames)
        fused = model.attention(skips[-1], 0)
        a = model.decoder(fused, skips, (8, 56, 96))
        zeroed = [torch.zeros_like(skips[0])] + skips[1:]
        b = model.decoder(fused, zeroed, (8, 56, 96))
    assert a.shape == (1, desk_config.readout_channels, 8, 56, 96)
    assert not torch.allclose(a, b)


def test_decoder_skip_count_mismatch(model):
    with pytest.raises(ContractError):
        model.decoder(torch.zeros(1, 64, 4, 7, 12), [torch.zeros(1)], (8, 56, 96))


# -- readout / output stage ------------------------------------------------

def test_readout_channel_trace_paper_profile():
    ro = Readout(256, 64)
    trace = ro.trace(torch.randn(1, 256, 5, 6))
    assert [t.shape[1] for t in trace] == [64, 64, 256, 1]


def test_readout_zero_input_is_bias(desk_config):
    ro = Readout(32, 8)
    out = ro(torch.zeros(1, 32, 6, 6))
    assert torch.isfinite(out).all()
    inner = out[..., 1:-1, 1:-1]  # the 3x3 layer sees zero padding at the border
    assert torch.allclose(inner, inner.flatten()[0].expand_as(inner))


def test_centerbias_zero_logits_peak_at_center():
    cb = CenterBiasBlur(8, 10, 2.0, 3.0, 4, use_centerbias=True, use_blur=False)
    out = cb(torch.zeros(2, 1, 8, 10))
    for frame in out:
        r, c = np.unravel_index(int(frame.argmax()), frame.shape)
        assert r in (3, 4) and c in (4, 5)


def test_no_centerbias_zero_logits_uniform():
    cb = CenterBiasBlur(8, 10, 2.0, 3.0, 4, use_centerbias=False, use_blur=True)
    out = cb(torch.zeros(1, 1, 8, 10, dtype=torch.float64).to(torch.float64).float())
    assert torch.equal(out, torch.full_like(out, 1.0 / 80))


def test_softmax_shift_invariance():
    cb = CenterBiasBlur(8, 10, 2.0, 3.0, 4).double()
    x = torch.randn(3, 1, 8, 10, dtype=torch.float64)
    torch.testing.assert_close(cb(x), cb(x + 7.5), atol=1e-6, rtol=0)


def test_blur_kernel_normalized():
    cb = CenterBiasBlur(8, 10, 2.0, 1.5, 4, use_centerbias=False).double()
    x = torch.full((1, 1, 8, 10), 3.0, dtype=torch.float64)
    torch.testing.assert_close(cb.blur(x), x)


def test_initial_output_stage_values(desk_config):
    cb = CenterBiasBlur(56, 96, 0.25 * 56, 3.0, 8)
    assert cb.amplitude.item() == 1.0
    assert cb.center_sigma.item() == pytest.approx(14.0, rel=1e-6)
    assert cb.blur_sigma.item() == pytest.approx(3.0, rel=1e-6)


# -- whole model -----------------------------------------------------------

def test_forward_shape_and_normalization(model, desk_config):
    frames, audio, caps = inputs(desk_config)
    with torch.no_grad():
        out = model(frames, audio, caps)
    assert out.shape == (2, 8, 56, 96)
    assert (out > 0).all()
    torch.testing.assert_close(out.double().sum(dim=(-2, -1)), torch.ones(2, 8, dtype=torch.float64),
                               atol=1e-6, rtol=0)


@pytest.mark.parametrize("t", [4, 5, 33, 64])
def test_forward_any_length(model, desk_config, t):
    frames, audio, caps = inputs(desk_config, b=1, t=t)
    with torch.no_grad():
        out = model(frames, audio, caps)
    assert out.shape == (1, t, 56, 96)


def test_inference_deterministic(model, desk_config):
    frames, audio, caps = inputs(desk_config, b=1)
    with torch.no_grad():
        assert torch.equal(model(frames, audio, caps), model(frames, audio, caps))


def test_param_count_differences(desk_config):
    full = param_count(desk_config, AblationMask())
    assert full - param_count(desk_config, AblationMask(blur=False)) == 1
    assert full - param_count(desk_config, AblationMask(centerbias=False)) == 2
    assert full - param_count(desk_config, AblationMask(readout=False)) == \
        bottleneck_params(desk_config.readout_channels, desk_config.readout_mid)
    for name, mask in ABLATIONS.items():
        if name != "Full":
            assert param_count(desk_config, mask) < full


def test_both_attention_removes_context_branches(desk_config):
    m = build_model(desk_config, ABLATIONS["-Both Attention"])
    names = [n for n, _ in m.named_parameters()]
    assert not any(n.startswith(("audio.", "text.", "context.")) for n in names)
    full = build_model(desk_config, ABLATIONS["Full"])
    removed = sum(p.numel() for n, p in full.named_parameters() if n.startswith(("audio.", "text.", "context.")))
    assert param_count(desk_config) - param_count(desk_config, ABLATIONS["-Both Attention"]) == removed


def test_full_vs_both_outputs_differ(desk_config):
    frames, audio, caps = inputs(desk_config, b=1)
    a = build_model(desk_config, seed=0).eval()
    b = build_model(desk_config, ABLATIONS["-Both Attention"], seed=0).eval()
    with torch.no_grad():
        assert not torch.allclose(a(frames, audio, caps), b(frames))


def test_bottleneck_formula_paper_profile():
    ro = Readout(256, 64)
    bypass = Readout(256, 64, use_bottleneck=False)
    diff = sum(p.numel() for p in ro.parameters()) - sum(p.numel() for p in bypass.parameters())
    assert diff == bottleneck_params(256, 64) == 256 * 64 + 64 + 9 * 64 * 64 + 64 + 64 * 256 + 256


def test_paper_profile_config():
    cfg = ModelConfig.for_profile("paper")
    assert (cfg.height, cfg.width) == (224, 384)
    assert cfg.readout_channels == 256 and cfg.readout_mid == 64
    assert cfg.t_max == 96


def test_checkpoint_round_trip(tmp_path, desk_config):
    m = build_model(desk_config, seed=3).eval()
    save_checkpoint(str(tmp_path / "c.pt"), m, step=12)
    back, step = load_checkpoint(str(tmp_path / "c.pt"))
    assert step == 12 and back.mask == m.mask and back.config == m.config
    frames, audio, caps = inputs(desk_config, b=1, seed=5)
    with torch.no_grad():
        assert torch.equal(m(frames, audio, caps), back(frames, audio, caps))


def test_checkpoint_bytes_deterministic(tmp_path, desk_config):
    save_checkpoint(str(tmp_path / "a.pt"), build_model(desk_config, seed=3), 0)
    save_checkpoint(str(tmp_path / "b.pt"), build_model(desk_config, seed=3), 0)
    assert (tmp_path / "a.pt").read_bytes() == (tmp_path / "b.pt").read_bytes()


def test_missing_captions_rejected(model, desk_config):
    frames, audio, _ = inputs(desk_config, b=1)
    with pytest.raises(ContractError):
        model(frames, audio, None)
