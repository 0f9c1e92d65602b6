import importlib

import numpy as np
import pytest

import fedhar.kernels as kernels
from fedhar.kernels import reference

native = pytest.importorskip("fedhar.kernels._native", reason="extension not built")

SHAPES = (
    # batch, channels, maps_in, t_in, maps_out, kernel, stride
    (2, 1, 1, 12, 2, 3, 1),
    (3, 2, 1, 30, 4, 5, 2),
    (4, 3, 4, 25, 6, 7, 3),
    (1, 2, 8, 46, 16, 9, 2),
)


def random_case(shape, seed=0):
    batch, channels, maps_in, t_in, maps_out, kernel, stride = shape
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, channels, maps_in, t_in))
    w = rng.standard_normal((maps_out, maps_in, kernel))
    b = rng.standard_normal(maps_out)
    t_out = (t_in - kernel) // stride + 1
    dz = rng.standard_normal((batch, channels, maps_out, t_out))
    return x, w, b, stride, dz


def brute_forward(x, w, b, stride):
    batch, channels, maps_in, t_in = x.shape
    maps_out, _, kernel = w.shape
    t_out = (t_in - kernel) // stride + 1
    out = np.zeros((batch, channels, maps_out, t_out))
    for ib in range(batch):
        for ic in range(channels):
            for f in range(maps_out):
                for t in range(t_out):
                    seg = x[ib, ic, :, t * stride : t * stride + kernel]
                    out[ib, ic, f, t] = (seg * w[f]).sum() + b[f]
    return out


@pytest.mark.parametrize("shape", SHAPES)
def test_reference_forward_matches_brute_force(shape):
    x, w, b, stride, _ = random_case(shape)
    got = np.asarray(reference.conv1d_forward(x, w, b, stride))
    np.testing.assert_allclose(got, brute_forward(x, w, b, stride), atol=1e-12)


@pytest.mark.parametrize("shape", SHAPES)
def test_backends_agree_forward(shape):
    x, w, b, stride, _ = random_case(shape)
    ref = np.asarray(reference.conv1d_forward(x, w, b, stride))
    nat = np.asarray(native.conv1d_forward(x, w, b, stride))
    np.testing.assert_allclose(nat, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("shape", SHAPES)
def test_backends_agree_backward(shape):
    x, w, _, stride, dz = random_case(shape)
    for ref_part, nat_part in zip(
        reference.conv1d_backward(x, w, stride, dz),
        native.conv1d_backward(x, w, stride, dz),
    ):
        np.testing.assert_allclose(
            np.asarray(nat_part), np.asarray(ref_part), rtol=1e-12, atol=1e-12
        )


@pytest.mark.parametrize("shape", SHAPES)
def test_reference_backward_is_the_forward_adjoint(shape):
    # <dz, conv(x)> differentiated by hand: dx, dw, db must satisfy the
    # inner-product identities against random perturbations.
    x, w, b, stride, dz = random_case(shape)
    dx, dw, db = (np.asarray(a) for a in reference.conv1d_backward(x, w, stride, dz))
    rng = np.random.default_rng(7)
    eps = 1e-6
    for _ in range(3):
        px = rng.standard_normal(x.shape)
        f_plus = (np.asarray(reference.conv1d_forward(x + eps * px, w, b, stride)) * dz).sum()
        f_minus = (np.asarray(reference.conv1d_forward(x - eps * px, w, b, stride)) * dz).sum()
        fd = (f_plus - f_minus) / (2 * eps)
        assert abs(fd - (dx * px).sum()) < 1e-6 * max(1.0, abs(fd))
        pw = rng.standard_normal(w.shape)
        f_plus = (np.asarray(reference.conv1d_forward(x, w + eps * pw, b, stride)) * dz).sum()
        f_minus = (np.asarray(reference.conv1d_forward(x, w - eps * pw, b, stride)) * dz).sum()
        fd = (f_plus - f_minus) / (2 * eps)
        assert abs(fd - (dw * pw).sum()) < 1e-6 * max(1.0, abs(fd))
    np.testing.assert_allclose(db, dz.sum(axis=(0, 1, 3)), atol=1e-12)


def test_dispatch_converts_dtype_and_layout():
    x = np.arange(2 * 1 * 1 * 8, dtype=np.float32).reshape(2, 1, 1, 8)[:, :, :, ::-1]
    w = np.ones((2, 1, 3), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    out = kernels.conv1d_forward(x, w, b, 1)
    expected = kernels.conv1d_forward(
        np.ascontiguousarray(x, dtype=np.float64), w.astype(np.float64), b.astype(np.float64), 1
    )
    np.testing.assert_allclose(np.asarray(out), np.asarray(expected))


def test_env_override_selects_reference(monkeypatch):
    monkeypatch.setenv("FEDHAR_BACKEND", "reference")
    module = importlib.reload(kernels)
    try:
        assert module.active_backend() == "reference"
    finally:
        monkeypatch.delenv("FEDHAR_BACKEND")
        importlib.reload(kernels)


def test_active_backend_is_native_when_extension_present():
    assert kernels.active_backend() == "native"
