import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import special
from scipy.integrate import quad

from precip_postproc.distributions import CsgdParams, GtcndParams, family_cdf, family_quantile, params_from_stack
from precip_postproc.errors import DomainError
from precip_postproc.fitting.quantiles import default_levels
from precip_postproc.gridnet import (
    Adam,
    TrainConfig,
    TrainingData,
    UNetConfig,
    backward,
    crps_loss,
    ensemble_aggregate,
    init_model,
    link_params,
    predict_params,
    train,
    train_ensemble,
    unet_forward,
)
from precip_postproc.gridnet import autodiff as ad
from precip_postproc.gridnet.layers import (
    BN_EPS,
    PARAM_FLOOR,
    batch_norm,
    bilinear_upsample,
    concat_channels,
    conv2d,
    depthwise_conv3x3,
    max_pool2d,
    relu,
    separable_conv2d,
)
from precip_postproc.gridnet.train import evaluate, loss_and_grad
from precip_postproc.scoring import crps_csgd, crps_from_quantiles, crps_gtcnd, crps_numeric


def check_gradients(f, *arrays, step=1e-6, rtol=1e-4, atol=1e-8):
    """Compare reverse-mode gradients of a scalar f with central differences."""
    leaves = [ad.parameter(a) for a in arrays]
    out = f(*leaves)
    out.backward()
    for leaf, a in zip(leaves, arrays):
        numeric = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            plus, minus = a.copy(), a.copy()
            plus[idx] += step
            minus[idx] -= step
            args_p = [plus if b is a else b for b in arrays]
            args_m = [minus if b is a else b for b in arrays]
            numeric[idx] = (float(f(*args_p).data) - float(f(*args_m).data)) / (2.0 * step)
        assert_allclose(leaf.grad, numeric, rtol=rtol, atol=atol)


def weighted_sum(t, seed=0):
    w = np.random.default_rng(seed).standard_normal(ad.as_tensor(t).shape)
    return ad.sum(t * w)


def naive_separable(x, depthwise, pointwise):
    B, H, W, C = x.shape
    mid = np.zeros((B, H, W, C))
    for b in range(B):
        for i in range(H):
            for j in range(W):
                for c in range(C):
                    for di in range(3):
                        for dj in range(3):
                            ii, jj = i + di - 1, j + dj - 1
                            if 0 <= ii < H and 0 <= jj < W:
                                mid[b, i, j, c] += x[b, ii, jj, c] * depthwise[di, dj, c]
    out = np.zeros((B, H, W, pointwise.shape[1]))
    for b in range(B):
        for i in range(H):
            for j in range(W):
                for o in range(pointwise.shape[1]):
                    for c in range(C):
                        out[b, i, j, o] += mid[b, i, j, c] * pointwise[c, o]
    return out


# autodiff primitives
test_data = [
    lambda x: ad.sum(ad.exp(x) * x),
    lambda x: ad.sum(ad.log(x * x + 1.0)),
    lambda x: ad.sum(ad.sqrt(x * x + 0.5) / (x + 3.0)),
    lambda x: ad.sum(ad.softplus(x) - ad.logistic(x) ** 3.0),
    lambda x: ad.sum(ad.log_ndtr(x) + ad.log_ndtr(10.0 * x - 30.0)),
    lambda x: ad.mean(ad.absolute(x - 0.05), axis=0),
    lambda x: ad.sum(ad.concat([x, 2.0 * x], axis=-1) ** 2.0),
]


@pytest.mark.parametrize("f", test_data)
def test_elementwise_gradients(f):
    x = np.random.default_rng(1).uniform(-1.0, 1.0, (3, 4))
    check_gradients(lambda t: ad.sum(f(t)), x)


def test_special_function_gradients():
    rng = np.random.default_rng(2)
    k = rng.uniform(0.5, 4.0, 5)
    x = rng.uniform(0.1, 5.0, 5)
    check_gradients(lambda a, b: ad.sum(ad.gammainc(a, b)), k, x)
    check_gradients(lambda a, b: ad.sum(ad.betaln(a, b)), k, x)


# k-derivative of P(k, x) against (1/Γ(k))∫₀ˣ t^(k−1) e^(−t) ln t dt − ψ(k)P(k, x)
test_data = [
    (0.3, 0.05),
    (0.3, 2.0),
    (1.0, 1.0),
    (2.5, 4.0),
    (6.0, 0.5),
    (6.0, 20.0),
    (15.0, 14.0),
    (40.0, 55.0),
    (1.0, 60.0),
]


@pytest.mark.parametrize("k, x", test_data)
def test_gammainc_shape_derivative(k, x):
    log_moment, _ = quad(lambda t: np.exp(-t), 0.0, x, weight="alg-loga", wvar=(k - 1.0, 0.0), epsabs=1e-15, epsrel=1e-13)
    expected = log_moment / special.gamma(k) - special.digamma(k) * special.gammainc(k, x)
    shape = ad.parameter(np.array([k]))
    ad.sum(ad.gammainc(shape, np.array([x]))).backward()
    assert_allclose(shape.grad, [expected], rtol=1e-8, atol=1e-13)


def test_broadcast_gradients_are_summed():
    a = ad.parameter(np.ones((3, 1)))
    b = ad.parameter(np.arange(4.0))
    ad.sum(a * b).backward()
    assert_array_equal(a.grad, np.full((3, 1), 6.0))
    assert_array_equal(b.grad, np.full(4, 3.0))


# layers
def test_separable_identity_kernel():
    x = np.random.default_rng(3).standard_normal((2, 5, 6, 3))
    depthwise = np.zeros((3, 3, 3))
    depthwise[1, 1] = 1.0
    out = separable_conv2d(x, depthwise, np.eye(3))
    assert_allclose(out.data, x)


def test_separable_zero_kernel():
    x = np.random.default_rng(4).standard_normal((1, 4, 4, 2))
    out = separable_conv2d(x, np.zeros((3, 3, 2)), np.zeros((2, 3)))
    assert_array_equal(out.data, np.zeros((1, 4, 4, 3)))


def test_separable_matches_loop_reference():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 4, 4, 2))
    depthwise = rng.standard_normal((3, 3, 2))
    pointwise = rng.standard_normal((2, 3))
    assert_allclose(separable_conv2d(x, depthwise, pointwise).data, naive_separable(x, depthwise, pointwise), rtol=1e-12, atol=1e-14)


def test_conv2d_matches_separable_for_rank_one_kernel():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((1, 5, 4, 2))
    depthwise = rng.standard_normal((3, 3, 2))
    pointwise = rng.standard_normal((2, 3))
    full = depthwise[..., None] * pointwise[None, None]
    assert_allclose(conv2d(x, full).data, separable_conv2d(x, depthwise, pointwise).data, rtol=1e-12, atol=1e-14)


def test_convolution_shape_errors():
    x = np.zeros((1, 4, 4, 2))
    with pytest.raises(DomainError):
        depthwise_conv3x3(x, np.zeros((3, 3, 3)))
    with pytest.raises(DomainError):
        conv2d(x, np.zeros((3, 3, 3, 1)))
    with pytest.raises(DomainError):
        separable_conv2d(np.zeros((4, 4, 2)), np.zeros((3, 3, 2)), np.zeros((2, 1)))


def test_layer_gradients():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 4, 4, 2))
    check_gradients(lambda a, d, p: weighted_sum(separable_conv2d(a, d, p)), x, rng.standard_normal((3, 3, 2)), rng.standard_normal((2, 3)))
    check_gradients(lambda a, k: weighted_sum(conv2d(a, k)), x, rng.standard_normal((3, 3, 2, 3)))
    check_gradients(lambda a: weighted_sum(max_pool2d(a)), x)
    check_gradients(lambda a: weighted_sum(bilinear_upsample(a)), x)
    check_gradients(lambda a: weighted_sum(relu(a)), x)


def test_batch_norm_train_statistics():
    x = 10.0 * np.random.default_rng(8).standard_normal((4, 5, 5, 3)) + 7.0
    out, (mean, var) = batch_norm(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), mode="train")
    assert_allclose(out.data.mean(axis=(0, 1, 2)), 0.0, atol=1e-12)
    assert_allclose(out.data.var(axis=(0, 1, 2)), 1.0, atol=1e-4)
    assert_allclose(mean, 0.01 * x.mean(axis=(0, 1, 2)))
    assert_allclose(var, 0.99 + 0.01 * x.var(axis=(0, 1, 2)))


def test_batch_norm_infer_identity():
    x = np.random.default_rng(9).standard_normal((2, 3, 3, 2))
    out, stats = batch_norm(x, np.ones(2), np.zeros(2), np.zeros(2), np.ones(2), mode="infer")
    assert_allclose(out.data, x / np.sqrt(1.0 + BN_EPS))
    assert_allclose(out.data, x, rtol=1e-3)
    assert_array_equal(stats[1], np.ones(2))


def test_batch_norm_gradients():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((2, 3, 3, 2))
    running = (np.zeros(2), np.ones(2))
    check_gradients(
        lambda a, s, o: weighted_sum(batch_norm(a, s, o, *running, mode="train")[0]),
        x, rng.uniform(0.5, 1.5, 2), rng.standard_normal(2),
    )


def test_batch_norm_unknown_mode():
    with pytest.raises(DomainError):
        batch_norm(np.zeros((1, 2, 2, 1)), 1.0, 0.0, np.zeros(1), np.ones(1), mode="eval")


def test_relu_values():
    assert_array_equal(relu(np.array([-1.0, 2.0])).data, [0.0, 2.0])


def test_pool_of_constant_field():
    out = max_pool2d(np.full((1, 4, 6, 2), 3.5))
    assert out.shape == (1, 2, 3, 2)
    assert_array_equal(out.data, 3.5)
    with pytest.raises(DomainError):
        max_pool2d(np.zeros((1, 3, 4, 1)))


def test_bilinear_upsample_checkerboard():
    x = np.array([[1.0, 0.0], [0.0, 1.0]]).reshape(1, 2, 2, 1)
    expected = np.array([
        [1.0, 0.75, 0.25, 0.0],
        [0.75, 0.625, 0.375, 0.25],
        [0.25, 0.375, 0.625, 0.75],
        [0.0, 0.25, 0.75, 1.0],
    ])
    assert_allclose(bilinear_upsample(x).data[0, ..., 0], expected)


def test_upsample_of_pool_preserves_dims():
    x = np.random.default_rng(11).standard_normal((1, 8, 12, 3))
    assert bilinear_upsample(max_pool2d(x)).shape == x.shape


def test_concat_channels():
    out = concat_channels(np.zeros((1, 2, 2, 3)), np.ones((1, 2, 2, 2)))
    assert out.shape == (1, 2, 2, 5)
    with pytest.raises(DomainError):
        concat_channels(np.zeros((1, 2, 2, 3)), np.ones((1, 4, 2, 2)))


# output links
def test_link_params_at_zero():
    softplus0 = np.log(2.0) + PARAM_FLOOR
    assert_allclose(link_params(np.zeros((2, 3)), "gtcnd").data, [[0.5, 0.0, softplus0]] * 2)
    assert_allclose(link_params(np.zeros(3), "csgd").data, [softplus0, softplus0, -softplus0])


@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_link_params_always_valid(family):
    rng = np.random.default_rng(12)
    raw = rng.standard_normal((50, 3)) * rng.choice([1.0, 10.0, 1e3, 1e6], (50, 1))
    fields = link_params(raw, family).data
    assert np.all(np.isfinite(fields))
    params_from_stack(family, fields)


def test_link_params_upper_bound():
    fields = link_params(np.array([0.0, 0.0, 50.0]), "gtcnd", upper_bound=4.0).data
    assert fields[2] == 4.0
    with pytest.raises(DomainError):
        link_params(np.zeros(2), "gtcnd")


# U-Net
def small_model(family="gtcnd", d=3, separable=True, seed=0):
    return init_model(UNetConfig(in_channels=d, base_channels=2, family=family, use_separable=separable, seed=seed))


@pytest.mark.parametrize("shape", [(32, 32, 5), (10, 14, 5)])
def test_unet_output_shape(shape):
    model = init_model(UNetConfig(in_channels=5, base_channels=4))
    out = predict_params(model, np.random.default_rng(13).standard_normal(shape))
    assert out.shape == shape[:2] + (3,)
    params_from_stack("gtcnd", out)


@pytest.mark.slow
def test_unet_full_scale_shape():
    model = init_model(UNetConfig(in_channels=31, base_channels=8))
    out = predict_params(model, np.random.default_rng(14).standard_normal((112, 192, 31)))
    assert out.shape == (112, 192, 3)


def test_unet_forward_is_deterministic():
    model = small_model("csgd", separable=False)
    x = np.random.default_rng(15).standard_normal((2, 8, 8, 3))
    a = unet_forward(model, x, mode="batch").output.data
    b = unet_forward(model, x, mode="batch").output.data
    assert_array_equal(a, b)
    params_from_stack("csgd", a)


def test_unet_rejects_wrong_channels():
    with pytest.raises(DomainError):
        predict_params(small_model(d=3), np.zeros((8, 8, 4)))


def test_unet_config_validation():
    with pytest.raises(DomainError):
        UNetConfig(in_channels=3, depth=3)
    with pytest.raises(DomainError):
        UNetConfig(in_channels=3, base_channels=0)


# loss
def test_loss_of_perfect_dry_forecast():
    fields = np.tile([1.0, 0.0, 1.0], (1, 4, 4, 1))
    assert float(crps_loss(fields, np.zeros((1, 4, 4)), "gtcnd").data) == 0.0


def test_loss_single_point_reduces_to_closed_form():
    gt = np.array([0.3, 1.2, 0.7]).reshape(1, 1, 1, 3)
    cs = np.array([1.5, 2.0, -0.4]).reshape(1, 1, 1, 3)
    y = np.full((1, 1, 1), 0.9)
    assert_allclose(crps_loss(gt, y, "gtcnd").data, crps_gtcnd(GtcndParams(0.3, 1.2, 0.7), 0.9), rtol=1e-12)
    assert_allclose(crps_loss(cs, y, "csgd").data, crps_csgd(CsgdParams(1.5, 2.0, -0.4), 0.9), rtol=1e-12)


@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_loss_gradient_matches_finite_differences(family):
    rng = np.random.default_rng(16)
    raw = rng.standard_normal((1, 4, 4, 3))
    fields = link_params(raw, family).data
    obs = np.where(rng.random((1, 4, 4)) < 0.3, 0.0, rng.gamma(2.0, 1.0, (1, 4, 4)))
    check_gradients(lambda f: crps_loss(f, obs, family), fields, step=1e-5)


def deep_gtcnd_fields(rng, shape, sigma_range=(0.05, 2.0)):
    """GTCND fields with mu/sigma in [-40, -3]."""
    sigma = np.exp(rng.uniform(*np.log(sigma_range), shape))
    ratio = rng.uniform(-40.0, -3.0, shape)
    return np.stack([rng.uniform(0.05, 0.8, shape), ratio * sigma, sigma], axis=-1)


def quadrature_crps(fields, obs):
    p = params_from_stack("gtcnd", fields)
    out = np.empty(obs.shape)
    for idx in np.ndindex(obs.shape):
        q = p[idx]
        marks = [float(family_quantile(q, a)) for a in (0.5, 0.9, 0.999)]
        out[idx] = crps_numeric(lambda z: float(family_cdf(q, z)), float(obs[idx]),
                                quantile=lambda a: float(family_quantile(q, a)), points=[0.0, *marks], support_min=0.0)
    return out


def test_loss_in_deep_truncation_matches_quadrature():
    rng = np.random.default_rng(19)
    fields = deep_gtcnd_fields(rng, (1, 4, 4))
    fields[0, 0, 0] = [0.2, -1.0, 0.05]
    obs = np.where(rng.random((1, 4, 4)) < 0.3, 0.0, rng.gamma(2.0, 1.0, (1, 4, 4)))
    obs[0, 0, 0] = 2.0
    per_point = quadrature_crps(fields, obs)
    assert np.all(per_point > 0.0)
    assert_allclose(crps_loss(fields, obs, "gtcnd").data, per_point.mean(), rtol=1e-7)
    assert_allclose(crps_loss(fields[:, :1, :1], obs[:, :1, :1], "gtcnd").data, per_point[0, 0, 0], rtol=1e-7)


def test_loss_gradient_in_deep_truncation():
    rng = np.random.default_rng(20)
    fields = deep_gtcnd_fields(rng, (1, 4, 4), sigma_range=(0.5, 2.0))
    obs = np.where(rng.random((1, 4, 4)) < 0.3, 0.0, rng.gamma(2.0, 1.0, (1, 4, 4)))
    check_gradients(lambda f: crps_loss(f, obs, "gtcnd"), fields, step=1e-6, atol=1e-7)


def test_masked_points_get_no_gradient():
    rng = np.random.default_rng(17)
    fields = ad.parameter(link_params(rng.standard_normal((1, 4, 4, 3)), "gtcnd").data)
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    crps_loss(fields, rng.gamma(2.0, 1.0, (1, 4, 4)), "gtcnd", mask).backward()
    assert_array_equal(fields.grad[0][~mask], 0.0)
    assert np.all(np.abs(fields.grad[0][mask]).sum(axis=-1) > 0.0)


def test_loss_shape_and_mask_errors():
    fields = np.tile([0.5, 1.0, 1.0], (1, 2, 2, 1))
    with pytest.raises(DomainError):
        crps_loss(fields, np.zeros((1, 3, 2)), "gtcnd")
    with pytest.raises(DomainError):
        crps_loss(fields, np.zeros((1, 2, 2)), "gtcnd", np.zeros((2, 2), dtype=bool))


def central_difference(model, x, obs, i, step):
    values = model.params.values
    saved = values[i]
    values[i] = saved + step
    plus = evaluate(model, x, obs)
    values[i] = saved - step
    minus = evaluate(model, x, obs)
    values[i] = saved
    return (plus - minus) / (2.0 * step)


def assert_model_gradient(model, x, obs, indices):
    _, grad, _ = loss_and_grad(model, x, obs, mode="batch")
    for i in indices:
        # a step may straddle a relu or max-pool kink; a smaller one will not
        for step in (1e-6, 1e-8):
            numeric = central_difference(model, x, obs, i, step)
            if abs(grad[i] - numeric) <= 1e-4 * abs(numeric) + 1e-7 * (1e-6 / step):
                break
        else:
            raise AssertionError(f"gradient mismatch at {i}: {grad[i]} vs {numeric}")


def random_obs(rng, shape):
    return np.where(rng.random(shape) < 0.3, 0.0, rng.gamma(2.0, 1.0, shape))


@pytest.mark.parametrize("family, separable", [("gtcnd", True), ("csgd", False)])
def test_model_gradient_matches_finite_differences(family, separable):
    rng = np.random.default_rng(18)
    model = small_model(family, separable=separable, seed=3)
    x = rng.standard_normal((2, 8, 8, 3))
    obs = random_obs(rng, (2, 8, 8))
    assert_model_gradient(model, x, obs, rng.choice(model.params.n_params, 40, replace=False))


@pytest.mark.slow
@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_model_gradient_every_parameter(family):
    rng = np.random.default_rng(20)
    model = init_model(UNetConfig(in_channels=3, base_channels=4, family=family, seed=5))
    x = rng.standard_normal((2, 8, 8, 3))
    obs = random_obs(rng, (2, 8, 8))
    assert_model_gradient(model, x, obs, range(model.params.n_params))


def test_backward_aligns_with_store():
    model = small_model()
    x = np.random.default_rng(19).standard_normal((1, 8, 8, 3))
    fwd = unet_forward(model, x, mode="train")
    loss = crps_loss(fwd.output, np.ones((1, 8, 8)), "gtcnd")
    grad = backward(model.params, fwd, loss)
    assert grad.shape == model.params.values.shape
    offset, shape = model.params.layout["head.bias"]
    assert_allclose(grad[offset:offset + 3], fwd.leaves["head.bias"].grad)


# training
def tiny_data(n=6, seed=0, family="gtcnd"):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 8, 8, 3))
    y = np.maximum(0.0, 1.0 + x[..., 0] + 0.3 * rng.standard_normal((n, 8, 8)))
    return TrainingData(x, y)


def test_adam_first_step_moves_by_learning_rate():
    opt = Adam(3, 0.1)
    values = np.zeros(3)
    opt.step(values, np.array([2.0, -0.5, 0.0]))
    assert_allclose(values, [-0.1, 0.1, 0.0], rtol=1e-6)
    assert opt.t == 1


def test_train_config_validation():
    with pytest.raises(DomainError):
        TrainConfig(epochs=0)
    with pytest.raises(DomainError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(DomainError):
        TrainConfig(clip_norm=0.0)


def test_training_data_validation():
    with pytest.raises(DomainError):
        TrainingData(np.zeros((2, 4, 4, 3)), np.zeros((2, 4, 5)))
    with pytest.raises(DomainError):
        TrainingData(np.zeros((2, 4, 4, 3)), np.zeros((2, 4, 4)), mask=np.ones((3, 3)))


def test_zero_learning_rate_keeps_parameters():
    cfg = UNetConfig(in_channels=3, base_channels=2)
    result = train(tiny_data(), cfg, TrainConfig(learning_rate=0.0, batch_size=2, epochs=3, seed=1))
    assert result.success
    assert_array_equal(result.model.params.values, init_model(cfg).params.values)
    val = [r.val_loss for r in result.history]
    assert val == [val[0]] * 3


def test_training_is_reproducible():
    cfg = UNetConfig(in_channels=3, base_channels=2, family="csgd")
    tcfg = TrainConfig(learning_rate=1e-2, batch_size=2, epochs=2, seed=4)
    a = train(tiny_data(), cfg, tcfg)
    b = train(tiny_data(), cfg, tcfg)
    assert [(r.train_loss, r.val_loss) for r in a.history] == [(r.train_loss, r.val_loss) for r in b.history]
    assert_array_equal(a.model.params.values, b.model.params.values)


def test_training_reports_divergence():
    data = tiny_data()
    data.obs[0, 0, 0] = np.nan
    cfg = UNetConfig(in_channels=3, base_channels=2)
    result = train(data, cfg, TrainConfig(batch_size=6, epochs=2, validation_fraction=0.0))
    assert not result.success
    assert "diverged at epoch 1" in result.message
    assert np.all(np.isfinite(result.model.params.values))


@pytest.mark.slow
def test_training_decreases_loss_on_realizable_task():
    data = tiny_data(n=24, seed=5)
    cfg = UNetConfig(in_channels=3, base_channels=4)
    result = train(data, cfg, TrainConfig(learning_rate=1e-2, batch_size=4, epochs=30, seed=2))
    val = np.array([r.val_loss for r in result.history])
    assert result.success
    assert val[-5:].mean() < val[:5].mean()


def test_train_ensemble_orders_models():
    cfg = UNetConfig(in_channels=3, base_channels=2)
    seen = []
    results = train_ensemble(
        tiny_data(), cfg, TrainConfig(batch_size=3, epochs=1, n_models=2),
        progress=lambda done, total, res: seen.append((done, total)),
    )
    assert [r.model_index for r in results] == [0, 1]
    assert seen == [(1, 2), (2, 2)]
    assert not np.array_equal(results[0].model.params.values, results[1].model.params.values)


# aggregation
def test_aggregate_single_and_identical_models():
    model = small_model()
    x = np.random.default_rng(20).standard_normal((8, 8, 3))
    single = ensemble_aggregate([model], x)
    expected = params_from_stack("gtcnd", predict_params(model, x))
    assert_allclose(single.values[2, 5], family_quantile(expected[2, 5], default_levels()))
    assert single.shape == (8, 8)
    assert_allclose(ensemble_aggregate([model, model, model], x).values, single.values, rtol=1e-13)
    with pytest.raises(DomainError):
        ensemble_aggregate([], x)


def test_aggregate_crps_not_above_member_mean():
    rng = np.random.default_rng(21)
    x = rng.standard_normal((8, 8, 3))
    y = rng.gamma(1.5, 1.0, (8, 8))
    models = [small_model(seed=s) for s in range(3)]
    members = [crps_from_quantiles(ensemble_aggregate([m], x), y).mean() for m in models]
    combined = crps_from_quantiles(ensemble_aggregate(models, x), y).mean()
    assert combined <= np.mean(members) + 1e-12


def test_aggregate_levels():
    q = ensemble_aggregate([small_model()], np.zeros((8, 8, 3)), levels=default_levels(9))
    assert q.values.shape == (8, 8, 9)
