"""Model shape contracts and gradient sanity."""

import pytest
import torch

from camreg.config import TrainConfig
from camreg.model import CameraParameterRegressor, build_model


class TestShapes:
    def test_penultimate_is_backbone_dim_plus_two(self):
        model = CameraParameterRegressor(depth=2)
        assert model.penultimate_dim == model.backbone_feature_dim + 2
        images = torch.rand(3, 3, 32, 32)
        sizes = torch.rand(3, 2)
        feats = model.features(images, sizes)
        assert feats.shape == (3, model.backbone_feature_dim + 2)

    def test_output_has_eight_units(self):
        model = CameraParameterRegressor(depth=1)
        out = model(torch.rand(5, 3, 16, 16), torch.rand(5, 2))
        assert out.shape == (5, 8)

    def test_size_features_change_penultimate_vector(self):
        model = CameraParameterRegressor(depth=2)
        images = torch.rand(1, 3, 32, 32)
        a = model.features(images, torch.tensor([[0.5, 0.5]]))
        b = model.features(images, torch.tensor([[1.0, 0.5]]))
        assert not torch.equal(a, b)
        # the backbone part is identical; only the appended entries moved
        assert torch.equal(a[:, :-2], b[:, :-2])

    def test_handles_varying_resolutions(self):
        model = CameraParameterRegressor(depth=2)
        for shape in ((2, 3, 16, 8), (2, 3, 64, 64), (1, 3, 12, 6)):
            out = model(torch.rand(*shape), torch.rand(shape[0], 2))
            assert out.shape == (shape[0], 8)

    def test_build_model_is_seeded(self):
        cfg = TrainConfig(seed=9)
        a = build_model(cfg)
        b = build_model(cfg)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_size_features_can_be_disabled(self):
        model = CameraParameterRegressor(depth=2, use_size_features=False)
        assert model.penultimate_dim == model.backbone_feature_dim
        images = torch.rand(1, 3, 32, 32)
        a = model(images, torch.tensor([[0.5, 0.5]]))
        b = model(images, torch.tensor([[1.0, 0.25]]))
        assert torch.equal(a, b)


class TestGradientSanity:
    def test_head_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        model = CameraParameterRegressor(depth=1).double()
        images = torch.rand(4, 3, 16, 16, dtype=torch.float64)
        sizes = torch.rand(4, 2, dtype=torch.float64)
        targets = torch.rand(4, 8, dtype=torch.float64)
        weight = model.head[-1].weight

        def loss_value():
            return torch.nn.functional.mse_loss(model(images, sizes), targets)

        loss = loss_value()
        (grad,) = torch.autograd.grad(loss, weight)

        rng = torch.Generator().manual_seed(1)
        eps = 1e-6
        for _ in range(10):
            direction = torch.randn(weight.shape, generator=rng, dtype=torch.float64)
            direction /= direction.norm()
            with torch.no_grad():
                weight += eps * direction
                plus = loss_value().item()
                weight -= 2 * eps * direction
                minus = loss_value().item()
                weight += eps * direction
            numeric = (plus - minus) / (2 * eps)
            analytic = float((grad * direction).sum())
            assert numeric == pytest.approx(analytic, rel=1e-4, abs=1e-12)


class TestConfigValidation:
    def test_milestones_must_increase(self):
        with pytest.raises(ValueError):
            TrainConfig(milestones=(40, 20))

    def test_milestones_below_epochs(self):
        with pytest.raises(ValueError):
            TrainConfig(milestones=(20, 70), epochs=60)

    def test_positive_fields(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(initial_lr=0.0)
        with pytest.raises(ValueError):
            TrainConfig(backbone_depth=0)
