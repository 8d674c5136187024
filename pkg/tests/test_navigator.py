import math

import numpy as np
import pytest
import torch

from crater_xai.backbone import BackboneConfig, param_hash
from crater_xai.errors import NumericalDegeneracyError
from crater_xai.geometry import Pose, relative_pose, default_camera, NADIR_QUAT
from crater_xai.navigator import (
    FineLossWeights,
    NavigatorSchedule,
    PoseNavigator,
    coarse_loss,
    cyclical_lr,
    fine_loss,
    matrix_to_rot6d,
    pose9_residuals,
    rot6d_to_matrix,
    split_pose9,
    stack_pair,
    train_navigator,
)
from scipy.spatial.transform import Rotation


def random_rotation(rng):
    return torch.tensor(Rotation.random(random_state=int(rng.integers(1 << 30)))
                        .as_matrix())


def perfect_pred9(gt_pos, gt_R):
    r6 = matrix_to_rot6d(torch.as_tensor(gt_R))
    return torch.cat([torch.as_tensor(gt_pos, dtype=r6.dtype), r6], dim=-1)


class TestStackPair:
    def test_shape_and_halves(self, rng):
        a = torch.tensor(rng.random((3, 256, 256)), dtype=torch.float32)
        b = torch.tensor(rng.random((3, 256, 256)), dtype=torch.float32)
        pair = stack_pair(a, b)
        assert pair.shape == (3, 512, 256)
        assert torch.equal(pair[:, :256], a)
        assert torch.equal(pair[:, 256:], b)

    def test_identical_images(self, rng):
        a = torch.tensor(rng.random((3, 64, 64)))
        pair = stack_pair(a, a)
        assert torch.equal(pair[:, :64], pair[:, 64:])

    def test_mismatch(self):
        with pytest.raises(ValueError):
            stack_pair(torch.zeros(3, 64, 64), torch.zeros(3, 32, 32))


class TestRotation6d:
    def test_canonical_identity(self):
        r6 = torch.tensor([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        assert torch.allclose(rot6d_to_matrix(r6), torch.eye(3))

    def test_orthonormality(self, rng):
        r6 = torch.tensor(rng.normal(size=(100, 6)))
        R = rot6d_to_matrix(r6)
        eye = torch.eye(3, dtype=R.dtype).expand_as(R)
        assert torch.abs(R @ R.transpose(-1, -2) - eye).max() < 1e-6
        assert torch.abs(torch.linalg.det(R) - 1).max() < 1e-6

    def test_round_trip(self, rng):
        for _ in range(100):
            R = random_rotation(rng)
            back = rot6d_to_matrix(matrix_to_rot6d(R))
            assert torch.abs(back - R).max() < 1e-6

    def test_degenerate(self):
        with pytest.raises(NumericalDegeneracyError):
            rot6d_to_matrix(torch.zeros(6))
        with pytest.raises(NumericalDegeneracyError):
            rot6d_to_matrix(torch.tensor([1.0, 0, 0, 2.0, 0, 0]))


class TestForwardSequence:
    def make_model(self):
        torch.manual_seed(0)
        return PoseNavigator(BackboneConfig.tiny()).eval()

    def pairs(self, rng, t):
        return torch.tensor(rng.random((t, 3, 64, 32)), dtype=torch.float32)

    def test_arity(self, rng):
        model = self.make_model()
        for t in (1, 3):
            out9, _, masks = model.forward_sequence(self.pairs(rng, t))
            assert out9.shape == (t, 9)
            assert len(masks) == 8

    def test_state_threading(self, rng):
        model = self.make_model()
        seq = self.pairs(rng, 4)
        with torch.no_grad():
            full, _, _ = model.forward_sequence(seq)
            a, hidden, _ = model.forward_sequence(seq[:2])
            b, _, _ = model.forward_sequence(seq[2:], hidden)
        chunked = torch.cat([a, b])
        assert torch.abs(full - chunked).max() < 1e-6

    def test_zero_head_zero_output(self, rng):
        model = self.make_model()
        with torch.no_grad():
            model.head.weight.zero_()
            model.head.bias.zero_()
            out9, _, _ = model.forward_sequence(self.pairs(rng, 2))
        assert torch.equal(out9, torch.zeros(2, 9))

    def test_hidden_shape_mismatch(self, rng):
        model = self.make_model()
        bad = (torch.zeros(2, 1, 7), torch.zeros(2, 1, 7))
        with pytest.raises(ValueError):
            model.forward_sequence(self.pairs(rng, 1), bad)

    def test_empty_sequence(self):
        model = self.make_model()
        with pytest.raises(ValueError):
            model.forward_sequence(torch.zeros(0, 3, 64, 32))


class TestCoarseLoss:
    def test_perfect_zero(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(3)])
        gt_pos = torch.tensor(rng.normal(size=(3, 3)))
        pred = perfect_pred9(gt_pos, gt_R)
        assert float(coarse_loss(pred, gt_pos, gt_R)) < 1e-12

    def test_unit_position_error(self):
        gt_R = torch.eye(3)[None]
        gt_pos = torch.zeros(1, 3)
        pred = perfect_pred9(torch.tensor([[1.0, 0.0, 0.0]]), gt_R)
        assert float(coarse_loss(pred, gt_pos, gt_R, kappa=100.0)) == pytest.approx(1.0)

    def test_kappa_linearity(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(4)])
        gt_pos = torch.tensor(rng.normal(size=(4, 3)))
        pred = torch.tensor(rng.normal(size=(4, 9)))
        l1 = float(coarse_loss(pred, gt_pos, gt_R, kappa=100.0))
        l2 = float(coarse_loss(pred, gt_pos, gt_R, kappa=200.0))
        pos_sq, ang_sq = pose9_residuals(pred, gt_pos, gt_R)
        assert l2 - l1 == pytest.approx(100.0 * float(ang_sq.mean()), rel=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            coarse_loss(torch.zeros(2, 9), torch.zeros(3, 3),
                        torch.eye(3).expand(3, 3, 3))

    def test_angle_wrap(self):
        # a rotation of +179 deg vs -179 deg about z differs by 2 deg, not 358
        a = torch.tensor(Rotation.from_euler("Z", 179, degrees=True).as_matrix())
        b = torch.tensor(Rotation.from_euler("Z", -179, degrees=True).as_matrix())
        pred = perfect_pred9(torch.zeros(1, 3), a[None])
        _, ang_sq = pose9_residuals(pred, torch.zeros(1, 3), b[None])
        assert float(ang_sq) == pytest.approx(math.radians(2.0) ** 2, rel=1e-4)


class TestFineLoss:
    def test_zero_residuals_zero_sigma(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(2)])
        gt_pos = torch.tensor(rng.normal(size=(2, 3)))
        pred = perfect_pred9(gt_pos, gt_R)
        assert float(fine_loss(pred, gt_pos, gt_R, FineLossWeights()).detach()) < 1e-12

    def test_sigma_zero_is_plain_sum(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(4)])
        gt_pos = torch.tensor(rng.normal(size=(4, 3)))
        pred = torch.tensor(rng.normal(size=(4, 9)))
        pos_sq, ang_sq = pose9_residuals(pred, gt_pos, gt_R)
        expect = float(pos_sq.sum() + ang_sq.sum())
        got = float(fine_loss(pred, gt_pos, gt_R, FineLossWeights()).detach())
        assert got == pytest.approx(expect, rel=1e-12)

    def test_sigma_gradient(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(4)])
        gt_pos = torch.tensor(rng.normal(size=(4, 3)))
        pred = torch.tensor(rng.normal(size=(4, 9)))
        weights = FineLossWeights(sigma_p=0.3, sigma_phi=-0.2).double()
        loss = fine_loss(pred, gt_pos, gt_R, weights)
        loss.backward()
        pos_sq, ang_sq = pose9_residuals(pred, gt_pos, gt_R)
        l_p = float(pos_sq.sum())
        analytic = -l_p * math.exp(-0.3) + 1.0
        assert float(weights.sigma_p.grad) == pytest.approx(analytic, rel=1e-6)
        # central differences
        # sigma is stored float32 by the module; write the perturbed values
        # after converting to double so the 1e-6 step survives
        def at(sig):
            w = FineLossWeights().double()
            with torch.no_grad():
                w.sigma_p.fill_(sig)
                w.sigma_phi.fill_(-0.2)
            return float(fine_loss(pred, gt_pos, gt_R, w).detach())

        eps = 1e-6
        hi = at(0.3 + eps)
        lo = at(0.3 - eps)
        fd = (hi - lo) / (2 * eps)
        assert abs(fd - analytic) / max(abs(analytic), 1e-8) < 1e-5

    def test_convex_in_sigma_with_min_at_log_lp(self, rng):
        gt_R = torch.stack([random_rotation(rng) for _ in range(4)])
        gt_pos = torch.tensor(rng.normal(size=(4, 3)))
        pred = torch.tensor(rng.normal(size=(4, 9)))
        pos_sq, _ = pose9_residuals(pred, gt_pos, gt_R)
        l_p = float(pos_sq.sum())
        grid = np.linspace(math.log(l_p) - 3, math.log(l_p) + 3, 301)
        vals = [float(fine_loss(pred, gt_pos, gt_R, FineLossWeights(s, 0.0)).detach())
                for s in grid]
        best = grid[int(np.argmin(vals))]
        assert abs(best - math.log(l_p)) < 0.02
        assert np.all(np.diff(vals, 2) > -1e-9)  # discrete convexity


class TestSchedule:
    def test_cyclical_lr_restarts(self):
        total, cycles, base = 100, 5, 1e-4
        lrs = [cyclical_lr(s, total, cycles, base) for s in range(total)]
        starts = [s for s in range(total) if lrs[s] == pytest.approx(base)]
        assert starts == [0, 20, 40, 60, 80]
        assert min(lrs) >= 0.0
        # decays within each cycle
        assert lrs[10] < lrs[1]

    def test_identity_motion_ground_truth(self):
        cam = default_camera()
        p = Pose([10.0, -3.0, 500.0], NADIR_QUAT)
        rel = relative_pose(p, p, cam)
        assert np.allclose(rel.position, 0.0)
        assert np.allclose(rel.matrix(), np.eye(3), atol=1e-12)


class TestTrainNavigator:
    def trajectories(self, rng, n_pairs=3):
        samples = []
        for _ in range(n_pairs):
            pair = torch.tensor(rng.random((3, 64, 32)), dtype=torch.float32)
            samples.append((pair, torch.zeros(3), torch.eye(3)))
        return [samples]

    def test_coarse_freeze_contract(self, rng):
        sched = NavigatorSchedule(coarse_epochs=1, fine_epochs=0, seq_len=3,
                                  seed=0)
        model = PoseNavigator(BackboneConfig.tiny())
        before = param_hash(model.backbone)
        train_navigator(self.trajectories(rng), sched, model=model)
        assert param_hash(model.backbone) == before

    def test_fine_updates_backbone_and_sigmas(self, rng):
        sched = NavigatorSchedule(coarse_epochs=0, fine_epochs=1, seq_len=3,
                                  lr=1e-3, seed=0)
        model = PoseNavigator(BackboneConfig.tiny())
        before = param_hash(model.backbone)
        _, weights, _ = train_navigator(self.trajectories(rng), sched,
                                        model=model)
        assert param_hash(model.backbone) != before
        assert (float(weights.sigma_p.detach()) != 0.0
                or float(weights.sigma_phi.detach()) != 0.0)

    def test_backbone_state_transfer(self, rng, tmp_path):
        from crater_xai.detector import CraterDetector

        det = CraterDetector(BackboneConfig.tiny())
        state = det.backbone.state_dict()
        sched = NavigatorSchedule(coarse_epochs=0, fine_epochs=0, seed=0)
        model, _, _ = train_navigator(self.trajectories(rng), sched,
                                      config=BackboneConfig.tiny(),
                                      backbone_state=state)
        assert param_hash(model.backbone) == param_hash(det.backbone)

    def test_divergence_aborts(self, rng, tmp_path, monkeypatch):
        import crater_xai.navigator.train as train_mod
        from crater_xai.errors import NumericalFailureError

        monkeypatch.setattr(
            train_mod, "_window_loss",
            lambda *a, **k: torch.tensor(float("nan"), requires_grad=True),
        )
        sched = NavigatorSchedule(coarse_epochs=1, fine_epochs=0, seq_len=3,
                                  seed=0)
        ckpt = tmp_path / "nav.ckpt"
        with pytest.raises(NumericalFailureError):
            train_navigator(self.trajectories(rng), sched,
                            config=BackboneConfig.tiny(), out_ckpt=ckpt)
        assert ckpt.exists()
