import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rebacktrack.engine import STEP
from rebacktrack.transport import (
    WAIT,
    ConfigurationError,
    Notification,
    SimSchedule,
    SimulationError,
    Simulator,
    StatusUpdate,
    TaskRequest,
    TaskResponse,
    TransportError,
    WorkerState,
    decode_message,
    encode_message,
    format_message,
    process_backend,
    threaded_backend,
)

messages = st.one_of(
    st.builds(TaskRequest, st.integers(0, 2**31 - 1)),
    st.builds(TaskResponse, st.none()),
    st.builds(
        TaskResponse,
        st.lists(st.integers(-1, 1), min_size=1, max_size=30).map(lambda d: (1, *d)),
    ),
    st.builds(StatusUpdate, st.integers(0, 1000), st.sampled_from(list(WorkerState))),
    st.builds(Notification, st.integers(-(2**63), 2**63 - 1)),
)


@given(messages)
def test_codec_round_trip(msg):
    assert decode_message(encode_message(msg)) == msg


def test_codec_rejects_garbage():
    for frame in (b"", b"\x09", b"\x01\x00", b"\x03\x00\x00\x00\x00\x07"):
        with pytest.raises(TransportError):
            decode_message(frame)
    with pytest.raises(TypeError):
        encode_message("hello")


def test_format_message():
    assert format_message(TaskResponse((1, -1))) == "TaskResponse index=1,-1"
    assert format_message(TaskResponse(None)) == "TaskResponse index=none"
    assert format_message(StatusUpdate(3, WorkerState.DEAD)) == "StatusUpdate rank=3 state=dead"


# -- threaded ---------------------------------------------------------------------


def test_threaded_ping_pong_fifo():
    a, b = threaded_backend(2)
    n = 100_000
    got = {0: [], 1: []}

    def run(ep, peer):
        for i in range(n):
            ep.send(peer, Notification(i))
        for _ in range(n):
            got[ep.rank].append(ep.receive_blocking(5).solution_value)

    threads = [threading.Thread(target=run, args=(a, 1)), threading.Thread(target=run, args=(b, 0))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(60)
    assert got[0] == list(range(n)) and got[1] == list(range(n))


def test_threaded_broadcast_once_each():
    eps = threaded_backend(8)
    eps[0].broadcast(Notification(5))
    assert eps[0].try_receive() is None
    for ep in eps[1:]:
        assert ep.try_receive() == Notification(5)
        assert ep.try_receive() is None


def test_threaded_nonblocking_and_timeout():
    (ep,) = threaded_backend(1)
    assert ep.try_receive() is None
    assert ep.receive_blocking(0.01) is None


def test_threaded_send_to_closed_peer():
    a, b = threaded_backend(2)
    b.close()
    with pytest.raises(TransportError):
        a.send(1, TaskRequest(0))
    with pytest.raises(TransportError):
        a.send(5, TaskRequest(0))
    with pytest.raises(ConfigurationError):
        threaded_backend(0)


def test_process_endpoints_in_process():
    a, b = process_backend(2)
    for i in range(50):
        a.send(1, Notification(i))
    got = [b.receive_blocking(5).solution_value for _ in range(50)]
    assert got == list(range(50))
    assert b.try_receive() is None
    a.close()
    with pytest.raises(TransportError):
        b.send(0, TaskRequest(1))


# -- simulator --------------------------------------------------------------------


def pinger(ep, rounds):
    """Rank 0 sends ``rounds`` requests; rank 1 answers each."""
    if ep.rank == 0:
        for i in range(rounds):
            ep.send(1, TaskRequest(0))
            yield STEP
            msg = yield WAIT
            assert msg == TaskResponse(None)
        ep.send(1, StatusUpdate(0, WorkerState.DEAD))
        return "done"
    while True:
        msg = yield WAIT
        if isinstance(msg, StatusUpdate):
            return "done"
        ep.send(0, TaskResponse(None))


def run_pingers(schedule, rounds=20):
    sim = Simulator(2, schedule)
    for r in range(2):
        sim.spawn(r, pinger(sim.endpoints[r], rounds))
    assert sim.run() == ["done", "done"]
    assert sim.quiescent()
    return sim


def test_sim_deterministic_trace():
    s = SimSchedule(seed=3, min_latency=1, max_latency=30, step_time=(1, 5))
    a, b = run_pingers(s), run_pingers(s)
    assert a.trace_text() == b.trace_text()
    assert a.trace_text() != run_pingers(SimSchedule(seed=4, min_latency=1, max_latency=30)).trace_text()


def test_sim_trace_format():
    sim = run_pingers(SimSchedule(), rounds=1)
    for line in sim.trace:
        t, rank, event = line.split()[:3]
        assert t.startswith("t=") and int(t[2:]) >= 0
        assert int(rank) in (0, 1)
        assert event in {"admit", "send", "recv", "exit", "close"}
    times = [int(line.split()[0][2:]) for line in sim.trace]
    assert times == sorted(times)


def test_sim_per_pair_fifo_under_random_latency():
    def sender(ep):
        for i in range(200):
            ep.send(1, Notification(i))
            yield STEP
        return None

    def receiver(ep):
        got = []
        while len(got) < 200:
            got.append((yield WAIT).solution_value)
        return got

    sim = Simulator(2, SimSchedule(seed=11, min_latency=1, max_latency=500))
    sim.spawn(0, sender(sim.endpoints[0]))
    sim.spawn(1, receiver(sim.endpoints[1]))
    assert sim.run()[1] == list(range(200))


def test_sim_config_errors():
    with pytest.raises(ConfigurationError):
        Simulator(3, SimSchedule(admission=[(0, 0), (1, 0), (7, 0)]))
    with pytest.raises(ConfigurationError):
        Simulator(2, SimSchedule(admission=[(0, 0)]))
    with pytest.raises(ConfigurationError):
        Simulator(2, SimSchedule(step_time=(0, 1)))
    with pytest.raises(ConfigurationError):
        Simulator(2).run()


def test_sim_detects_deadlock():
    def stuck(ep):
        yield WAIT

    sim = Simulator(2)
    sim.spawn(0, stuck(sim.endpoints[0]))
    sim.spawn(1, stuck(sim.endpoints[1]))
    with pytest.raises(SimulationError, match="deadlock"):
        sim.run()


def test_sim_livelock_guard():
    def spin(ep):
        while True:
            yield STEP

    sim = Simulator(1, max_events=1000)
    sim.spawn(0, spin(sim.endpoints[0]))
    with pytest.raises(SimulationError, match="quiescence"):
        sim.run()


def test_sim_send_to_exited_rank():
    def quitter(ep):
        return None
        yield

    def late(ep):
        for _ in range(5):
            yield STEP
        ep.send(0, TaskRequest(1))

    sim = Simulator(2)
    sim.spawn(0, quitter(sim.endpoints[0]))
    sim.spawn(1, late(sim.endpoints[1]))
    with pytest.raises(TransportError):
        sim.run()


def test_schedule_factories():
    ro = SimSchedule.rank_order(4, gap=10)
    assert ro.admission == [(0, 0), (1, 10), (2, 20), (3, 30)]
    rnd = SimSchedule.randomized(5, 3)
    assert rnd == SimSchedule.randomized(5, 3)
    assert len(rnd.admission) == 3
    adv = SimSchedule.adversarial(1)
    assert adv.status_latency > adv.max_latency
