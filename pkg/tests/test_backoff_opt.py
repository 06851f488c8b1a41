import math

import numpy as np
import pytest

from iotstab import backoff_opt as bo
from iotstab.scenario import NetworkScenario

SMALL = bo.BackoffSearchSpace(n_values=(0, 1, 2, 3), q_values=(0.25, 0.5, 0.75, 1.0))


def test_idle_network_tie_break():
    opt = bo.optimize(NetworkScenario.reference_defaults(arrival_prob=0.0), SMALL)
    assert (opt.n, opt.q) == (0, 1.0)
    assert opt.objective == 0.0 and opt.objective_kind == "waiting_time"


def test_stable_row_prefers_no_backoff():
    opt = bo.optimize(NetworkScenario.reference_defaults(alpha_tilde=1.0, theta_db=-10.0), SMALL)
    assert (opt.n, opt.q) == (0, 1.0) and opt.stable and opt.mean_backoff == 0.0


def test_unstable_row_minimises_delay():
    s = NetworkScenario.reference_defaults(alpha_tilde=8.0, theta_db=-2.0)
    opt = bo.optimize(s, SMALL)
    assert opt.objective_kind == "retransmissions" and not opt.stable
    delays = [c.delay for c in opt.cells if c.error is None]
    assert opt.delay == pytest.approx(min(delays), rel=1e-9)
    rows = list(bo.surface_rows(opt))
    assert len(rows) == len(SMALL.n_values) * len(SMALL.q_values)
    assert all(r[2] == 0 for r in rows)


def test_default_space():
    space = bo.BackoffSearchSpace()
    assert space.n_values == tuple(range(9))
    assert len(space.q_values) == 100 and space.q_values[0] == 0.01 and space.q_values[-1] == 1.0
    with pytest.raises(ValueError):
        bo.BackoffSearchSpace(n_values=())
    with pytest.raises(ValueError):
        bo.BackoffSearchSpace(q_values=(0.0,))
    with pytest.raises(ValueError):
        bo.BackoffSearchSpace(n_values=(1.5,))
