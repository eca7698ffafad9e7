from __future__ import annotations

import numpy as np
import pytest

from dynmed import _kernels, bellman, simulate

compiled = pytest.mark.skipif(_kernels.compiled_backend is None, reason="extension not built")


def test_backend_selection():
    assert _kernels.BACKEND in ("compiled", "python")
    assert _kernels.get_backend("python") is _kernels.python_backend
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


@compiled
def test_oracle_backends_agree(dq, F):
    nodes = F.nodes[::25]
    a = bellman.oracle_values(dq, F, nodes, backend="compiled")
    b = bellman.oracle_values(dq, F, nodes, backend="python")
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-13)


@compiled
def test_oracle_backends_agree_high_cost(dq_high, F_high):
    nodes = F_high.nodes[::40]
    a = bellman.oracle_values(dq_high, F_high, nodes, prob_step=0.05, util_step=0.05, backend="compiled")
    b = bellman.oracle_values(dq_high, F_high, nodes, prob_step=0.05, util_step=0.05, backend="python")
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-13)


@compiled
@pytest.mark.parametrize("which", ["low", "high"])
def test_simulation_backends_bitwise(which, dq, dq_high):
    d = dq if which == "low" else dq_high
    a, ta = simulate.simulate(d, d.U_bar, 150, 300, seed=7, n_record=5, backend="compiled")
    b, tb = simulate.simulate(d, d.U_bar, 150, 300, seed=7, n_record=5, backend="python")
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.absorption_times, b.absorption_times)
    assert np.array_equal(ta.U, tb.U) and np.array_equal(ta.rec, tb.rec) and np.array_equal(ta.out, tb.out)
