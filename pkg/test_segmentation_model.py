"""
Tests for the segmentation network and the mean-teacher update.
"""
import pytest
import torch
import torch.nn as nn
from torch.func import functional_call

from openset_panoseg.config import TrainConfig
from openset_panoseg.exceptions import InvalidInputError, ShapeMismatchError
from openset_panoseg.graph import GraphMatchingAdapter
from openset_panoseg.model import SegmentationModel, count_parameters, parameter_summary
from openset_panoseg.teacher import TeacherModel

f64 = torch.float64


def small_model(mode="euler", seed=0):
    torch.manual_seed(seed)
    return SegmentationModel(num_classes=6, feature_dim=8, attention_mode=mode, attention_blocks=1, attention_heads=2).double()


def images(batch=2, height=32, width=64, seed=0):
    return torch.rand(batch, 3, height, width, generator=torch.Generator().manual_seed(seed), dtype=f64)


def test_output_shapes():
    model = small_model()
    out = model(images())
    assert out.logits.shape == (2, 6, 32, 64)
    assert out.feature_logits.shape == (2, 6, 8, 16)
    assert out.features.shape == (2, 8 * 16, 8)
    assert out.feature_size == (8, 16)


def test_forward_is_deterministic_in_evaluation():
    model = small_model().eval()
    x = images()
    assert torch.equal(model(x).logits, model(x).logits)


@pytest.mark.parametrize("mode", ["euler", "plain"])
def test_batch_matches_per_sample(mode):
    model = small_model(mode).eval()
    x = images(batch=3)
    batched = model(x).logits
    for i in range(3):
        assert torch.allclose(batched[i:i + 1], model(x[i:i + 1]).logits, atol=1e-6)


@pytest.mark.parametrize("size", [(30, 64), (32, 40)])
def test_indivisible_input_rejected(size):
    with pytest.raises(InvalidInputError):
        small_model()(images(1, *size))


def test_wrong_channel_count_rejected():
    with pytest.raises(ShapeMismatchError):
        small_model()(torch.rand(1, 1, 32, 32, dtype=f64))


@pytest.mark.parametrize("bad", [float("nan"), 2.0, -1.0])
def test_images_outside_unit_range_rejected(bad):
    x = images(1)
    x[0, 1, 4, 4] = bad
    with pytest.raises(InvalidInputError, match="within \\[0, 1\\]"):
        small_model()(x)


def test_head_dimension_must_fit_heads():
    with pytest.raises(InvalidInputError):
        SegmentationModel(num_classes=6, feature_dim=12, attention_heads=4)


def test_zero_head_gives_uniform_prediction():
    model = small_model().eval()
    with torch.no_grad():
        model.head.weight.zero_()
        model.head.bias.zero_()
    prob = torch.softmax(model(images()).logits, dim=1)
    assert torch.allclose(prob, torch.full_like(prob, 1.0 / 6))


def test_one_hot_head_selects_feature_channels():
    model = small_model().eval()
    with torch.no_grad():
        model.head.weight.copy_(torch.eye(6, 8, dtype=f64))
        model.head.bias.zero_()
    out = model(images())
    b, n, _ = out.features.shape
    expected = out.features[..., :6].transpose(1, 2).reshape(b, 6, *out.feature_size)
    assert torch.allclose(out.feature_logits, expected)


def test_gradcheck_head_parameters():
    model = small_model().eval()
    x = images(1, 16, 16)
    weight = model.head.weight.detach().clone().requires_grad_(True)
    bias = model.head.bias.detach().clone().requires_grad_(True)

    def logits(w, b):
        return functional_call(model, {"head.weight": w, "head.bias": b}, (x,)).logits

    assert torch.autograd.gradcheck(logits, (weight, bias), eps=1e-5, atol=1e-6, rtol=1e-3)


def test_gradcheck_full_model_on_small_input():
    model = small_model().train()
    x = (0.1 + 0.8 * images(1, 16, 32)).requires_grad_(True)
    names = (
        "encoder.0.0.weight",
        "attention.0.modulation.delta1",
        "attention.0.modulation.delta2",
        "attention.0.modulation.bias",
        "head.weight",
    )
    named = dict(model.named_parameters())
    params = tuple(named[name].detach().clone().requires_grad_(True) for name in names)

    def logits(image, *values):
        return functional_call(model, dict(zip(names, values)), (image,)).feature_logits

    assert torch.autograd.gradcheck(logits, (x,) + params, eps=1e-5, atol=1e-6, rtol=1e-3, fast_mode=True)


def test_gradients_reach_every_component():
    model = small_model()
    (model(images()).logits ** 2).mean().backward()
    for name in ("encoder.0.0.weight", "decoder.fuse.0.weight", "attention.0.v_proj.weight", "head.weight"):
        grad = dict(model.named_parameters())[name].grad
        assert grad is not None and grad.abs().sum() > 0, name
    assert model.attention[0].modulation.delta2.grad is not None


def test_param_groups_partition_parameters():
    model = small_model()
    groups = model.param_groups()
    encoder = {id(p) for p in groups["encoder"]}
    decoder = {id(p) for p in groups["decoder"]}
    assert not encoder & decoder
    assert encoder | decoder == {id(p) for p in model.parameters()}


def test_from_config_and_parameter_summary():
    config = TrainConfig(feature_dim=16, attention_heads=2, attention_blocks=1, attention_mode="plain")
    model = SegmentationModel.from_config(config, num_base=5)
    adapter = GraphMatchingAdapter.from_config(config, num_base=5)
    assert model.num_classes == 6 and model.head.in_features == 16
    summary = parameter_summary(model, adapter)
    assert summary["total"] == count_parameters(model) + count_parameters(adapter)
    assert summary["head"] == 16 * 6 + 6


# ============ Mean teacher ============

def test_teacher_is_frozen_and_stays_in_evaluation():
    teacher = TeacherModel(small_model())
    assert not any(p.requires_grad for p in teacher.parameters())
    teacher.train()
    assert not teacher.model.training


def test_teacher_fixed_point():
    student = small_model()
    teacher = TeacherModel(student)
    before = {k: v.clone() for k, v in teacher.model.state_dict().items()}
    teacher.update(student, 0.9)
    for name, value in teacher.model.state_dict().items():
        assert torch.allclose(value, before[name], rtol=1e-12, atol=1e-15)


def test_teacher_alpha_zero_copies_student():
    teacher = TeacherModel(small_model(seed=0))
    student = small_model(seed=1)
    teacher.update(student, 0.0)
    for (name, t), s in zip(teacher.model.named_parameters(), student.parameters()):
        assert torch.equal(t, s), name


def test_teacher_converges_geometrically():
    torch.manual_seed(0)
    student, start = nn.Linear(3, 2).double(), nn.Linear(3, 2).double()
    teacher = TeacherModel(start)
    alpha, steps = 0.9, 25
    for _ in range(steps):
        teacher.update(student, alpha)
    expected = student.weight + alpha ** steps * (start.weight - student.weight)
    assert torch.allclose(teacher.model.weight, expected, atol=1e-12)


def test_teacher_rejects_mismatched_student():
    teacher = TeacherModel(nn.Linear(2, 3))
    with pytest.raises(ShapeMismatchError):
        teacher.update(nn.Linear(3, 3), 0.5)
    with pytest.raises(ShapeMismatchError):
        teacher.update(nn.Sequential(nn.Linear(2, 3)), 0.5)
    with pytest.raises(InvalidInputError):
        teacher.update(nn.Linear(2, 3), 1.5)
