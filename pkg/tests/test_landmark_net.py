import numpy as np
import pytest
import torch

from faceinpaint.imaging import CorruptedImage, Mask
from faceinpaint.landmark_net import (
    DESK_LANDMARK_CONFIG,
    BottleneckSpec,
    InvertedResidual,
    LandmarkNet,
    LandmarkNetConfig,
    build_landmark_net,
    landmark_loss,
    predict_landmarks,
)

TABLE_STAGES = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
]


def test_default_config_matches_reference_stages():
    cfg = LandmarkNetConfig()
    assert cfg.stem_channels == 32
    got = [
        (s.expansion_factor, s.output_channels, s.repeats, s.first_stride)
        for s in cfg.stage_specs
    ]
    assert got == TABLE_STAGES
    assert cfg.fusion_dims == (128, 128, 64)
    assert cfg.fusion_concat_dim == 320
    assert cfg.output_dim == 136


def test_build_deterministic_given_seed():
    a = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=42)
    b = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=42)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert ka == kb
        assert torch.equal(va, vb), ka


def test_bottleneck_parameter_count_closed_form():
    block = InvertedResidual(24, 32, stride=1, expansion=6)
    hidden = 24 * 6
    expected = (
        24 * hidden          # expansion 1x1
        + 2 * hidden         # bn affine
        + hidden * 9         # depthwise 3x3
        + 2 * hidden         # bn affine
        + hidden * 32        # projection 1x1
        + 2 * 32             # bn affine
    )
    assert sum(p.numel() for p in block.parameters()) == expected == 10000


def test_bottleneck_spec_validation():
    with pytest.raises(ValueError):
        BottleneckSpec(0, 16, 1, 1)
    with pytest.raises(ValueError):
        BottleneckSpec(6, 16, 1, 3)


def test_residual_passthrough_with_zero_weights():
    block = InvertedResidual(8, 8, stride=1, expansion=6)
    with torch.no_grad():
        for m in block.modules():
            if isinstance(m, torch.nn.Conv2d):
                m.weight.zero_()
    block.eval()
    x = torch.randn(1, 8, 6, 6)
    assert torch.equal(block(x), x)


def test_no_residual_when_stride_2_or_channels_differ():
    assert not InvertedResidual(8, 8, stride=2, expansion=6).use_residual
    assert not InvertedResidual(8, 16, stride=1, expansion=6).use_residual
    assert InvertedResidual(8, 8, stride=1, expansion=6).use_residual


def test_intermediate_shapes_follow_reference_table():
    net = LandmarkNet()
    net.eval()
    x = torch.zeros(1, 3, 256, 256)
    with torch.no_grad():
        h = net.stem(x)
        assert h.shape == (1, 32, 128, 128)
        expected = [
            (16, 128), (24, 64), (32, 32), (64, 16), (96, 16), (160, 8), (320, 8),
        ]
        idx = 0
        for spec, (ch, size) in zip(net.config.stage_specs, expected):
            for _ in range(spec.repeats):
                h = net.stages[idx](h)
                idx += 1
            assert h.shape == (1, ch, size, size), f"after stage c={ch}"
        c2 = net.head(h)
        assert c2.shape == (1, 1280, 8, 8)
    assert net.fc.in_features == 320
    assert net.fc.out_features == 136


def test_forward_output_contract():
    net = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=0)
    net.eval()
    size = DESK_LANDMARK_CONFIG.input_size
    with torch.no_grad():
        out = net(torch.randn(2, 3, size, size))
    assert out.shape == (2, 68, 2)


def test_predict_landmarks_clamped_and_counted():
    net = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=1)
    size = DESK_LANDMARK_CONFIG.input_size
    rng = np.random.default_rng(0)
    pixels = rng.uniform(-1, 1, size=(size, size, 3)).astype(np.float32)
    corrupted = CorruptedImage(pixels * 0.0, Mask(np.ones((size, size), np.uint8)))
    lm = predict_landmarks(net, corrupted)
    assert lm.points.shape == (68, 2)
    assert lm.points.min() >= 0.0 and lm.points.max() <= 1.0


def test_predict_rejects_wrong_input_size():
    net = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=1)
    bad = CorruptedImage(
        np.zeros((32, 32, 3), np.float32), Mask(np.zeros((32, 32), np.uint8))
    )
    with pytest.raises(ValueError, match="expected"):
        predict_landmarks(net, bad)


def test_forward_deterministic_for_fixed_params():
    net = build_landmark_net(DESK_LANDMARK_CONFIG, rng_seed=3)
    net.eval()
    size = DESK_LANDMARK_CONFIG.input_size
    x = torch.randn(1, 3, size, size, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        a, b = net(x), net(x)
    assert torch.equal(a, b)


def test_landmark_loss_rejects_count_mismatch():
    with pytest.raises(ValueError):
        landmark_loss(torch.zeros(10, 2), torch.zeros(10, 2))


def test_desk_config_preserves_structure():
    cfg = DESK_LANDMARK_CONFIG
    assert cfg.input_size == 64
    assert [s.output_channels for s in cfg.stage_specs] == [
        c // 4 for (_, c, _, _) in TABLE_STAGES
    ]
    assert cfg.fusion_concat_dim == 320 // 4
    assert cfg.output_dim == 136
