import numpy as np
import pytest

from edgeoffload import kernels
from edgeoffload.kernels import _ref
from edgeoffload.model import generate_instances
from edgeoffload.solvers import _instance_arrays, decisions_to_mask, solve_exhaustive


def _arrays(n, count, seed):
    instances = generate_instances(n, count, seed=seed)
    rows = [_instance_arrays(inst) for inst in instances]
    return instances, tuple(
        np.ascontiguousarray(np.stack([r[i] for r in rows])) for i in range(3)
    ) + (np.ascontiguousarray(np.array([r[3] for r in rows])),)


def test_ref_kernel_matches_scalar_solver():
    instances, arrays = _arrays(4, 30, seed=60)
    masks, costs = _ref.exhaustive_argmin(*arrays)
    for inst, mask, cost in zip(instances, masks, costs):
        rep = solve_exhaustive(inst)
        assert int(mask) == decisions_to_mask(rep.solution.decisions)
        assert cost == pytest.approx(rep.solution.cost, rel=1e-12)


@pytest.mark.skipif(not kernels.HAVE_FAST, reason="compiled kernel not built")
def test_fast_kernel_matches_ref():
    from edgeoffload.kernels import _fast

    for n in (2, 5, 8):
        _, arrays = _arrays(n, 50, seed=61)
        ref_masks, ref_costs = _ref.exhaustive_argmin(*arrays)
        fast_masks, fast_costs = _fast.exhaustive_argmin(*arrays)
        np.testing.assert_array_equal(ref_masks, fast_masks)
        np.testing.assert_allclose(ref_costs, fast_costs, rtol=1e-12)


def test_dispatch_uses_selected_backend():
    _, arrays = _arrays(3, 10, seed=62)
    masks, costs = kernels.exhaustive_argmin(*arrays)
    ref_masks, ref_costs = _ref.exhaustive_argmin(*arrays)
    np.testing.assert_array_equal(masks, ref_masks)
    np.testing.assert_allclose(costs, ref_costs, rtol=1e-12)


def test_backend_name_consistent():
    assert kernels.BACKEND in ("fast", "ref")
    if kernels.BACKEND == "fast":
        assert kernels.HAVE_FAST
