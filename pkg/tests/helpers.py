"""Shared drivers for flow-model tests."""
import numpy as np

from savsim.flow import ENTER, EXIT, FlowModel


def load_bottleneck(net, rate_vph=1800.0, duration=3600.0, dt=1.0, horizon=9000.0):
    """Constant inflow at ``rate_vph`` for ``duration`` seconds along every link in series."""
    flow = FlowModel(net, dt)
    headway = 3600.0 / rate_vph
    n = int(round(duration / headway))
    for i in range(n):
        flow.depart(i, [net.link_index["up"], net.link_index["neck"]], i * headway)
    arrivals = []
    while flow.t < horizon and (flow.vehicles or not arrivals):
        arrivals.extend(flow.advance())
    return flow, arrivals, n


def check_step_invariants(flow):
    """Conservation, storage and FIFO checks on the live state of a flow model."""
    on = 0
    for li, st in enumerate(flow.states):
        assert st.n_in - st.n_out == len(st.queue)
        assert len(st.queue) <= flow.network.links[li].storage + 1e-9
        entries = [e for _, e in st.queue]
        assert entries == sorted(entries)
        on += len(st.queue)
    assert flow.injected - flow.retired == on
    assert len(flow.vehicles) == on + flow.waiting()


def check_log_fifo(events):
    """Per link, a vehicle that entered earlier never exits later."""
    enter = {}
    by_link = {}
    for t, vid, li, kind, _ in events:
        if kind == ENTER:
            enter[(vid, li)] = t
        else:
            by_link.setdefault(li, []).append((enter.pop((vid, li)), t))
    for pairs in by_link.values():
        pairs.sort()
        exits = [x for _, x in pairs]
        assert exits == sorted(exits)


def queue_triangle(rate_in, cap, duration):
    """Deterministic queue: total delay (veh*h) and time the queue clears (s)."""
    growth = (rate_in - cap) / 3600.0
    peak = growth * duration
    clear = peak / (cap / 3600.0)
    return 0.5 * peak * (duration + clear) / 3600.0, duration + clear


def exits_by_link(events, link, start, end):
    return sum(1 for t, _, li, kind, _ in events if li == link and kind == EXIT and start <= t < end)


rng_default = np.random.default_rng
