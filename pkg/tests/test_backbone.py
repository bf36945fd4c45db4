import numpy as np
import pytest

from src.autodiff import Tensor, backward, ops
from src.backbone import EncoderConfig, FrozenEncoder, sinusoidal_positions
from src.wavelet_prompt import FilterBank, PromptSet, SparsifyConfig

SMALL = EncoderConfig(layers=2, d=16, heads=2, ff=32, seed=5)


def _prompts(cfg: EncoderConfig, p: int = 10, m: int = 4, variant: str = "PartialWSPT") -> PromptSet:
    return PromptSet.initialise(cfg.layers, p, cfg.d, m, variant, np.random.default_rng(0))


def test_output_has_prompt_plus_frame_rows(rng):
    encoder = FrozenEncoder(SMALL)
    features = Tensor(rng.standard_normal((201, SMALL.d)))
    out = encoder.encode_with_prompts(features, _prompts(SMALL), FilterBank.from_family("haar"), SparsifyConfig())
    assert out.shape == (211, SMALL.d)


@pytest.mark.parametrize("seed", range(8))
def test_shapes_for_random_prompt_layouts(seed):
    r = np.random.default_rng(seed)
    p = int(r.integers(2, 12))
    m = int(r.integers(1, p))
    steps = int(r.integers(1, 40))
    prompts = PromptSet.initialise(SMALL.layers, p, SMALL.d, m, "PartialWSPT", r)
    bank = FilterBank.from_family("haar")
    assert prompts.enhanced(0, bank, SparsifyConfig(), True, r).shape == (p, SMALL.d)
    out = FrozenEncoder(SMALL).encode_with_prompts(Tensor(r.standard_normal((steps, SMALL.d))), prompts, bank,
                                                   SparsifyConfig(), train=True, rng=r)
    assert out.shape == (p + steps, SMALL.d)


def test_batched_and_single_inputs_agree(rng):
    encoder = FrozenEncoder(SMALL)
    prompts, bank = _prompts(SMALL), FilterBank.from_family("haar")
    x = rng.standard_normal((3, 12, SMALL.d))
    batched = encoder.encode_with_prompts(Tensor(x), prompts, bank, SparsifyConfig()).data
    single = encoder.encode_with_prompts(Tensor(x[1]), prompts, bank, SparsifyConfig()).data
    np.testing.assert_allclose(batched[1], single, atol=1e-12)


def test_same_seed_gives_identical_weights():
    a = FrozenEncoder(SMALL).snapshot()
    b = FrozenEncoder(SMALL).snapshot()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_encoder_weights_receive_no_gradient(rng):
    encoder = FrozenEncoder(SMALL)
    prompts = _prompts(SMALL)
    bank = FilterBank.from_family("haar")
    out = encoder.encode_with_prompts(
        Tensor(rng.standard_normal((6, SMALL.d))), prompts, bank, SparsifyConfig(rho=0.5),
        train=True, rng=np.random.default_rng(1),
    )
    backward(ops.mean(out * out))
    assert all(not t.requires_grad and t.grad is None for t in encoder.parameters())
    assert all(t.grad is not None for t in prompts.layers)
    assert bank.h0.grad is not None


def test_parameter_count_matches_allocation():
    assert FrozenEncoder(SMALL).parameter_count() == SMALL.parameter_count()
    d, ff = SMALL.d, SMALL.ff
    assert SMALL.parameter_count() == SMALL.layers * (4 * d * d + 2 * d * ff + 9 * d + ff)


def test_width_mismatch_rejected(rng):
    encoder = FrozenEncoder(SMALL)
    with pytest.raises(ValueError, match="width mismatch"):
        encoder.encode_with_prompts(
            Tensor(rng.standard_normal((5, 8))), _prompts(SMALL), FilterBank.from_family("haar"), SparsifyConfig()
        )


def test_layer_count_mismatch_rejected(rng):
    encoder = FrozenEncoder(SMALL)
    prompts = PromptSet.initialise(3, 10, SMALL.d, 4, "PartialWSPT", rng)
    with pytest.raises(ValueError, match="3 prompt layers"):
        encoder.encode_with_prompts(
            Tensor(rng.standard_normal((5, SMALL.d))), prompts, FilterBank.from_family("haar"), SparsifyConfig()
        )


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"d": 15, "heads": 1}, "even"),
        ({"d": 16, "heads": 3}, "divisible"),
        ({"layers": 0}, "at least one layer"),
    ],
)
def test_invalid_encoder_config(kwargs, match):
    with pytest.raises(ValueError, match=match):
        EncoderConfig(**kwargs)


def test_positions_are_bounded_and_distinct():
    table = sinusoidal_positions(50, 16)
    assert table.shape == (50, 16)
    assert np.abs(table).max() <= 1.0
    assert len({row.tobytes() for row in table}) == 50


def _layer_norm(x, g, b):
    centered = x - x.mean(axis=-1, keepdims=True)
    return centered / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + 1e-5) * g + b


def _single_layer(w, x, heads):
    """Pre-norm attention and SiLU feed-forward written out with plain numpy."""
    seq, d = x.shape
    dh = d // heads
    h = _layer_norm(x, w["ln1_g"], w["ln1_b"])
    q, k, v = ((h @ w[f"w{n}"] + w[f"b{n}"]).reshape(seq, heads, dh).transpose(1, 0, 2) for n in "qkv")
    logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
    att = np.exp(logits - logits.max(axis=-1, keepdims=True))
    att /= att.sum(axis=-1, keepdims=True)
    x = x + (att @ v).transpose(1, 0, 2).reshape(seq, d) @ w["wo"] + w["bo"]
    h = _layer_norm(x, w["ln2_g"], w["ln2_b"])
    z = h @ w["w1"] + w["b1"]
    return x + (z / (1.0 + np.exp(-z))) @ w["w2"] + w["b2"]


def test_single_layer_matches_direct_computation(rng):
    cfg = EncoderConfig(layers=1, d=16, heads=2, ff=32, seed=5)
    encoder = FrozenEncoder(cfg)
    prompts, bank = _prompts(cfg), FilterBank.from_family("haar")
    features = rng.standard_normal((9, cfg.d))
    out = encoder.encode_with_prompts(Tensor(features), prompts, bank, SparsifyConfig())
    prompt = prompts.enhanced(0, bank, SparsifyConfig(), False).data
    x = np.concatenate([prompt, features + sinusoidal_positions(9, cfg.d)])
    weights = {name: t.data for name, t in encoder.layers[0].weights.items()}
    np.testing.assert_allclose(out.data, _single_layer(weights, x, cfg.heads), atol=1e-10)


def test_prompt_change_only_reaches_its_own_layer_and_later(rng):
    cfg = EncoderConfig(layers=3, d=16, heads=2, ff=32, seed=5)
    encoder, bank = FrozenEncoder(cfg), FilterBank.from_family("haar")
    prompts = _prompts(cfg)
    features = Tensor(rng.standard_normal((7, cfg.d)))
    before = [t.data for t in encoder.layer_outputs(features, prompts, bank, SparsifyConfig())]
    prompts.layers[1].data[0] += 0.5
    after = [t.data for t in encoder.layer_outputs(features, prompts, bank, SparsifyConfig())]
    assert np.array_equal(before[0], after[0])
    p = prompts.p
    for k in (1, 2):
        assert not np.allclose(before[k][:p], after[k][:p])
        assert not np.allclose(before[k][p:], after[k][p:])


def test_zero_prompts_give_the_same_output_for_pt_and_partial_wspt(rng):
    encoder = FrozenEncoder(SMALL)
    features = Tensor(rng.standard_normal((6, SMALL.d)))
    outputs = []
    for variant in ("PT", "PartialWSPT"):
        prompts = PromptSet.initialise(SMALL.layers, 10, SMALL.d, 4, variant, rng)
        for t in prompts.layers:
            t.data[...] = 0.0
        outputs.append(
            encoder.encode_with_prompts(
                features, prompts, FilterBank.from_family("haar"), SparsifyConfig(enabled=False), train=True
            ).data
        )
    np.testing.assert_allclose(outputs[0], outputs[1], atol=1e-12)
