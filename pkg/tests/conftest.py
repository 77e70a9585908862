import numpy as np
import pytest

from dpsearch import domains


@pytest.fixture
def tsp3():
    tag, inst = domains.fixture("fix-tsp3")
    return inst, domains.build_model(tag, inst)


@pytest.fixture
def tsptw3():
    tag, inst = domains.fixture("fix-tsptw3")
    return inst, domains.build_model(tag, inst)


@pytest.fixture
def kp2():
    tag, inst = domains.fixture("fix-kp2")
    return inst, domains.build_model(tag, inst)


@pytest.fixture
def pf2():
    tag, inst = domains.fixture("fix-pf2")
    return inst, domains.build_model(tag, inst)


def flatten_params(params) -> np.ndarray:
    return np.concatenate([np.concatenate([l.w.ravel(), l.b.ravel()])
                           for l in params.layers()])


def flatten_grads(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([l.w.ravel(), l.b.ravel()])
                           for l in grads.layers()])


def write_params(params, vec: np.ndarray) -> None:
    i = 0
    for layer in params.layers():
        for attr in ("w", "b"):
            arr = getattr(layer, attr)
            arr[...] = vec[i:i + arr.size].reshape(arr.shape)
            i += arr.size


def max_rel_fd_error(loss_and_grads, params, rng, n_coords: int = 60,
                     eps: float = 1e-6) -> float:
    """Worst relative error between analytic gradient and central finite
    differences over a random subset of coordinates."""
    _, grads = loss_and_grads(params)
    gvec = flatten_grads(grads)
    x0 = flatten_params(params)
    coords = rng.choice(len(x0), size=min(n_coords, len(x0)), replace=False)
    worst = 0.0
    for j in coords:
        x = x0.copy()
        x[j] += eps
        write_params(params, x)
        up = loss_and_grads(params)[0]
        x[j] -= 2 * eps
        write_params(params, x)
        down = loss_and_grads(params)[0]
        fd = (up - down) / (2 * eps)
        worst = max(worst, abs(fd - gvec[j]) / max(1.0, abs(fd), abs(gvec[j])))
    write_params(params, x0)
    return worst


def assert_monotone(trace, direction) -> None:
    from dpsearch import Direction

    for (e0, c0), (e1, c1) in zip(trace, trace[1:]):
        assert e1 >= e0, f"trace expansions not nondecreasing: {trace}"
        if direction is Direction.MIN:
            assert c1 <= c0, f"trace worsened: {trace}"
        else:
            assert c1 >= c0, f"trace worsened: {trace}"
