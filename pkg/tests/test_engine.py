import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rebacktrack.engine import (
    STEP,
    DepthLimitExceeded,
    ExplorationAborted,
    ExplorationHooks,
    ExploreLog,
    Incumbent,
    MalformedTaskError,
    explore_general,
    explore_steps,
    parallel_explore,
    serial_solve,
)
from rebacktrack.index import ROOT, CurrentIndex, fix_index
from rebacktrack.problems import (
    DominatingSetProblem,
    FullBinaryTree,
    JournaledGraph,
    RandomTree,
    VertexCoverProblem,
    random_graph,
)


class ScriptedHooks(ExplorationHooks):
    """Fires a task request whenever the node counter hits one of ``at``."""

    def __init__(self, at=(), values=None):
        self.at = set(at)
        self.values = dict(values or {})
        self.count = 0
        self.sent = []
        self.announced = []
        self._pending = False

    def poll_broadcasts(self):
        self.count += 1
        self._pending = self.count in self.at
        v = self.values.get(self.count)
        return [v] if v is not None else []

    def poll_task_request(self):
        if self._pending:
            self._pending = False
            return 99
        return None

    def send_task(self, raw_index, requester):
        self.sent.append(raw_index)

    def announce_solution(self, value):
        self.announced.append(value)


def test_serial_examples():
    tri = JournaledGraph(3, [(0, 1), (0, 2), (1, 2)])
    assert serial_solve(VertexCoverProblem(tri)).best_value == 2
    assert serial_solve(VertexCoverProblem(JournaledGraph(2, [(0, 1)]))).best_value == 1
    star = JournaledGraph(5, [(0, 4), (1, 4), (2, 4), (3, 4)])
    assert serial_solve(DominatingSetProblem(star)).best_value == 1


def test_serial_visits_every_node_without_pruning():
    t = FullBinaryTree(6)
    log = ExploreLog.recording()
    inc = serial_solve(t, prune=False, log=log)
    assert log.visited == list(t.nodes())
    assert inc.best_value == t.best_leaf_value()


def test_incumbent():
    inc = Incumbent()
    assert inc.offer(10, lambda: "a")
    assert not inc.offer(10, "b")
    assert inc.best_certificate == "a"
    assert inc.merge(8) and inc.best_value == 8 and inc.best_certificate == "a"
    assert not inc.merge(10) and inc.best_value == 8
    for v in (9, 7, 8):
        inc.merge(v)
    assert inc.best_value == 7
    assert not inc.merge(None)


@pytest.mark.parametrize("kind", [VertexCoverProblem, DominatingSetProblem])
@pytest.mark.parametrize("seed", range(5))
def test_explore_without_peers_matches_serial(kind, seed):
    g = random_graph(22, 0.3, seed)
    a, b = ExploreLog.recording(), ExploreLog.recording()
    s = serial_solve(kind(g), log=a)
    p = parallel_explore(kind(g), ROOT, CurrentIndex.for_task(ROOT), log=b)
    assert s.best_value == p.best_value
    assert a.visited == b.visited


def test_explore_is_a_step_generator():
    t = FullBinaryTree(3)
    gen = explore_steps(t, ROOT, CurrentIndex.for_task(ROOT), prune=False)
    steps = 0
    with pytest.raises(StopIteration) as stop:
        while True:
            assert next(gen) is STEP
            steps += 1
    assert steps == 15
    assert stop.value.value.best_value == t.best_leaf_value()


def test_request_at_worked_example_never_reenters_delegated_subtree():
    t = FullBinaryTree(4)
    hooks = ScriptedHooks()
    log = ExploreLog.recording()
    gen = explore_steps(t, ROOT, CurrentIndex.for_task(ROOT), hooks, prune=False, log=log)
    # run until the worker stands on node 1010
    while not log.visited or log.visited[-1] != (1, 0, 1, 0):
        next(gen)
    hooks.at = {hooks.count + 1}
    for _ in gen:
        pass
    assert hooks.sent == [(1, -1)]
    assert fix_index(hooks.sent[0]) == (1, 1)
    assert not any(p[:2] == (1, 1) for p in log.visited)
    assert log.skipped == [(1, 1)]


def _split_run(tree_factory, at):
    """Owner explores from the root; every handed-out task runs to completion
    (and may be split again at the same relative times)."""
    logs = []
    queue = [ROOT]
    while queue:
        task = queue.pop()
        hooks = ScriptedHooks(at)
        log = ExploreLog.recording()
        t = tree_factory()
        t.convert_index(task)
        parallel_explore(t, task, CurrentIndex.for_task(task), hooks, prune=False, log=log)
        sent = [fix_index(r) for r in hooks.sent if r is not None]
        # a skipped node is exactly a node whose subtree was handed away
        assert sorted(log.skipped) == sorted(sent)
        queue.extend(sent)
        logs.append(log)
    return logs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**5), st.sets(st.integers(1, 60), max_size=12))
def test_split_runs_cover_tree_exactly_once(seed, at):
    tree = lambda: RandomTree(seed, max_depth=9, p_stop=0.2)
    logs = _split_run(tree, at)
    visited = [p for log in logs for p in log.visited]
    assert len(visited) == len(set(visited))
    assert sorted(visited) == sorted(tree().nodes())


def test_bound_broadcast_prunes_and_result_stays_optimal():
    g = random_graph(26, 0.3, 3)
    opt = serial_solve(VertexCoverProblem(g)).best_value
    hooks = ScriptedHooks(values={3: opt + 1})
    inc = parallel_explore(VertexCoverProblem(g), ROOT, CurrentIndex.for_task(ROOT), hooks)
    assert inc.best_value == opt
    # the announcements strictly improve and never include the external bound
    assert hooks.announced == sorted(set(hooks.announced), reverse=True)
    assert all(v < opt + 1 for v in hooks.announced)


def test_announcements_strictly_improve():
    g = random_graph(30, 0.25, 8)
    log = ExploreLog()
    parallel_explore(VertexCoverProblem(g), ROOT, CurrentIndex.for_task(ROOT), log=log)
    assert all(a > b for a, b in zip(log.announced, log.announced[1:]))


def test_abort():
    class Abort(ExplorationHooks):
        def should_abort(self):
            return True

    with pytest.raises(ExplorationAborted):
        parallel_explore(FullBinaryTree(3), ROOT, CurrentIndex.for_task(ROOT), Abort())


def test_depth_limit():
    with pytest.raises(DepthLimitExceeded):
        serial_solve(FullBinaryTree(10), prune=False, max_depth=5)
    with pytest.raises(DepthLimitExceeded):
        parallel_explore(FullBinaryTree(10), ROOT, CurrentIndex.for_task(ROOT), prune=False, max_depth=5)


def test_binary_explorer_rejects_wide_nodes():
    with pytest.raises(ValueError):
        parallel_explore(RandomTree(1, max_branching=4, p_stop=0.0), ROOT, CurrentIndex.for_task(ROOT))


def test_poll_interval_validation():
    with pytest.raises(ValueError):
        parallel_explore(FullBinaryTree(2), ROOT, CurrentIndex.for_task(ROOT), poll_interval=0)


@pytest.mark.parametrize("seed", range(6))
def test_general_explorer_matches_serial(seed):
    tree = RandomTree(seed, max_depth=6, max_branching=4, p_stop=0.3)
    a, b = ExploreLog.recording(), ExploreLog.recording()
    s = serial_solve(tree, prune=False, log=a)
    g = explore_general(RandomTree(seed, 6, 4, 0.3), ROOT, prune=False, log=b)
    assert a.visited == b.visited
    assert s.best_value == g.best_value


def test_general_explorer_rejects_bad_slice():
    from rebacktrack.index import GeneralTaskSlice

    with pytest.raises(MalformedTaskError):
        explore_general(FullBinaryTree(3), GeneralTaskSlice((1,), 1, 2))
