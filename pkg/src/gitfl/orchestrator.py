"""Discrete-event simulation of GitFL and the FedAvg / FedAsync baselines.

All three algorithms share one setup: the seed fixes the task, the client
partition, the device population, the shared initial model and the
scheduling stream (client choice and latency draws). Local training for the
j-th dispatch uses its own generator derived from ``(seed, j)``, which is
what makes results independent of how many worker threads run it.
"""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import Shard, Task, dirichlet_partition, iid_partition, load_csv_shard, make_synthetic_task
from .devices import ClientProfile, CompositionPreset, build_population, round_trip_time
from .params import Repository, axpy_combine
from .selector import ClientStats, Variant, record_completion, select_client
from .trainers import Model, TrainConfig, evaluate, local_train, make_model
from .version_control import DEFAULT_PULL_BASE_WEIGHT, merge_master, model_pull, model_push

log = logging.getLogger(__name__)

ALGORITHMS = ("gitfl", "fedavg", "fedasync")
_TRAIN_STREAM = 4


@dataclass
class RunConfig:
    algorithm: str = "gitfl"
    selector: str = "CV"
    K: int = 10
    clients: int = 100
    time_budget: float = 10000.0
    alpha: float | None = None  # None means IID shards
    eval_interval: float = 500.0
    seed: int = 0
    # local training
    trainer_kind: str = "auto"  # linear | logistic | mlp; auto picks from the task
    hidden: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)
    # task
    task: str = "blobs"  # blobs | linreg | csv
    dims: int = 10
    classes: int = 10
    n_train: int = 5000
    n_test: int = 1000
    margin: float = 5.0
    noise: float = 0.1
    train_path: str | None = None
    test_path: str | None = None
    # devices
    preset: "str | CompositionPreset" = "uniform"
    sigma_scale: float = 1.0
    pairing: str = "shuffle"
    network_multiplier: float = 1.0
    # algorithm knobs
    pull_base_weight: float = DEFAULT_PULL_BASE_WEIGHT
    fedasync_beta: float = 0.6
    fedasync_a: float = 0.5
    workers: int = 0

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        Variant.parse(self.selector)
        if not 1 <= self.K <= self.clients:
            raise ValueError(f"need 1 <= K <= clients, got K={self.K}, clients={self.clients}")
        if not self.time_budget > 0:
            raise ValueError(f"time_budget must be positive, got {self.time_budget}")
        if not self.eval_interval > 0:
            raise ValueError(f"eval_interval must be positive, got {self.eval_interval}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.fedasync_beta <= 1 or self.fedasync_a < 0:
            raise ValueError(f"bad fedasync mixing beta={self.fedasync_beta}, a={self.fedasync_a}")


@dataclass
class MetricRow:
    virtual_time: float
    event_index: int
    master_loss: float
    master_accuracy: float
    min_version: int
    max_version: int
    mean_version: float
    comm_count: int


@dataclass(frozen=True)
class TraceEvent:
    dispatch_time: float
    completion_time: float
    branch_id: int
    client_id: int
    sequence_no: int


@dataclass
class RunReport:
    config: RunConfig
    rows: list[MetricRow]
    final_params: np.ndarray
    final_loss: float
    final_accuracy: float
    versions: np.ndarray
    trace: list[TraceEvent]
    round_durations: list[float] = field(default_factory=list)
    client_counts: np.ndarray | None = None


@dataclass
class Environment:
    """Everything a run needs that is fixed by the seed before time 0."""

    task: Task
    shards: list[Shard]
    model: Model
    population: list[ClientProfile]
    init_params: np.ndarray
    sched_rng: np.random.Generator


def load_task(cfg: RunConfig, rng: np.random.Generator) -> Task:
    if cfg.task == "csv":
        if not cfg.train_path or not cfg.test_path:
            raise ValueError("task 'csv' needs both train_path and test_path")
        classify = cfg.trainer_kind != "linear"
        train = load_csv_shard(cfg.train_path, integer_labels=classify)
        test = load_csv_shard(cfg.test_path, integer_labels=classify)
        classes = int(max(train.labels.max(), test.labels.max())) + 1 if classify else 0
        return Task(train, test, classes)
    return make_synthetic_task(
        cfg.task, cfg.dims, cfg.classes, cfg.n_train, rng,
        n_test=cfg.n_test, margin=cfg.margin, noise=cfg.noise,
    )


def build_environment(cfg: RunConfig) -> Environment:
    cfg.validate()
    data_ss, pop_ss, init_ss, sched_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    data_rng = np.random.default_rng(data_ss)
    task = load_task(cfg, data_rng)
    if cfg.alpha is None:
        shards = iid_partition(task.train, cfg.clients, data_rng)
    else:
        if task.classes == 0:
            raise ValueError("Dirichlet partitioning needs class labels; use iid for regression tasks")
        shards = dirichlet_partition(task.train, cfg.clients, cfg.alpha, data_rng)
    kind = cfg.trainer_kind
    if kind == "auto":
        kind = "linear" if task.classes == 0 else "logistic"
    model = make_model(kind, task.train.dims, max(task.classes, 1), cfg.hidden)
    population = build_population(
        cfg.preset, cfg.clients, np.random.default_rng(pop_ss),
        sigma_scale=cfg.sigma_scale, pairing=cfg.pairing,
    )
    init = model.init_params(np.random.default_rng(init_ss))
    return Environment(task, shards, model, population, init, np.random.default_rng(sched_ss))


class _TrainPool:
    """Runs local training inline or on worker threads, keyed by dispatch number."""

    def __init__(self, env: Environment, cfg: RunConfig):
        self.env = env
        self.cfg = cfg
        self.executor = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        self.pending: dict[int, object] = {}

    def _job(self, params, client, seq):
        rng = np.random.default_rng(np.random.SeedSequence(self.cfg.seed, spawn_key=(_TRAIN_STREAM, seq)))
        return local_train(self.env.model, params, self.env.shards[client], self.cfg.train, rng)

    def submit(self, params: np.ndarray, client: int, seq: int) -> None:
        if self.executor is None:
            self.pending[seq] = (params, client)
        else:
            self.pending[seq] = self.executor.submit(self._job, params, client, seq)

    def result(self, seq: int) -> np.ndarray:
        job = self.pending.pop(seq)
        if self.executor is None:
            return self._job(job[0], job[1], seq)
        return job.result()

    def close(self):
        if self.executor is not None:
            self.executor.shutdown(wait=True, cancel_futures=True)


class MetricSchedule:
    """Evaluates the current global model every ``interval`` up to ``budget``.

    Produces ``floor(budget / interval) + 1`` rows at times ``0, interval,
    2 * interval, ...``; a row at time t reflects every completion at or
    before t.
    """

    def __init__(self, interval: float, budget: float, model: Model, test: Shard):
        self.interval = interval
        self.budget = budget
        self.model = model
        self.test = test
        self.count = int(math.floor(budget / interval)) + 1
        self.next = 0
        self.rows: list[MetricRow] = []

    def _time(self, k: int) -> float:
        return k * self.interval

    def emit(self, before: float, snapshot: Callable[[], tuple], inclusive: bool = False) -> None:
        """Emit due rows with time < ``before`` (or <= when ``inclusive``)."""
        cached = None
        while self.next < self.count:
            t = self._time(self.next)
            if t > before or (t == before and not inclusive):
                break
            if cached is None:
                cached = snapshot()
            params, versions, events, comm = cached
            loss, acc = evaluate(self.model, params, self.test)
            self.rows.append(
                MetricRow(t, events, loss, acc, int(versions.min()), int(versions.max()),
                          float(versions.mean()), comm)
            )
            self.next += 1

    def finish(self, snapshot: Callable[[], tuple]) -> None:
        self.emit(math.inf, snapshot, inclusive=True)


def run_gitfl(cfg: RunConfig, env: Environment | None = None) -> RunReport:
    """Event-driven GitFL: K branches circulate merge, pull, select, train, push."""
    env = env or build_environment(cfg)
    variant = Variant.parse(cfg.selector)
    rng = env.sched_rng
    repo = Repository(env.init_params, cfg.K)
    stats = ClientStats(cfg.clients)
    sched = MetricSchedule(cfg.eval_interval, cfg.time_budget, env.model, env.task.test)
    pool = _TrainPool(env, cfg)
    heap: list[tuple] = []
    trace: list[TraceEvent] = []
    seq = 0
    completed = 0
    comm = 0

    def dispatch(branch: int, now: float) -> None:
        nonlocal seq
        versions = repo.versions
        master = merge_master(repo.params(), versions)
        pulled = model_pull(branch, versions, master, repo[branch].params, cfg.pull_base_weight)
        client = select_client(branch, versions, stats, rng, variant)
        rtt = round_trip_time(env.population[client], rng, cfg.network_multiplier)
        pool.submit(pulled, client, seq)
        heapq.heappush(heap, (now + rtt, seq, branch, client, rtt, now))
        seq += 1

    def snapshot():
        versions = repo.versions
        return merge_master(repo.params(), versions), versions, completed, comm

    try:
        for branch in range(cfg.K):
            dispatch(branch, 0.0)
        while heap:
            t, s, branch, client, rtt, t0 = heapq.heappop(heap)
            sched.emit(t, snapshot)
            model_push(repo, branch, pool.result(s))
            record_completion(client, rtt, stats)
            completed += 1
            comm += 2
            trace.append(TraceEvent(t0, t, branch, client, s))
            if t < cfg.time_budget:
                dispatch(branch, t)
        sched.finish(snapshot)
    finally:
        pool.close()

    final = merge_master(repo.params(), repo.versions)
    loss, acc = evaluate(env.model, final, env.task.test)
    return RunReport(cfg, sched.rows, final, loss, acc, repo.versions, trace,
                     client_counts=stats.count_table.copy())


def staleness_weight(staleness: int, beta: float, a: float) -> float:
    """Mixing weight ``beta * (1 + staleness) ** -a`` for a late update."""
    return beta * (1.0 + staleness) ** (-a)


def run_fedasync(cfg: RunConfig, env: Environment | None = None) -> RunReport:
    """K clients in flight; each upload is mixed into the global model on arrival."""
    env = env or build_environment(cfg)
    rng = env.sched_rng
    stats = ClientStats(cfg.clients)
    sched = MetricSchedule(cfg.eval_interval, cfg.time_budget, env.model, env.task.test)
    pool = _TrainPool(env, cfg)
    global_params = np.array(env.init_params, dtype=np.float64)
    heap: list[tuple] = []
    trace: list[TraceEvent] = []
    seq = 0
    updates = 0
    comm = 0

    def dispatch(slot: int, now: float) -> None:
        nonlocal seq
        client = select_client(0, [0], stats, rng, Variant.R)
        rtt = round_trip_time(env.population[client], rng, cfg.network_multiplier)
        pool.submit(global_params, client, seq)
        heapq.heappush(heap, (now + rtt, seq, slot, client, rtt, now, updates))
        seq += 1

    def snapshot():
        return global_params, np.array([updates]), updates, comm

    try:
        for slot in range(cfg.K):
            dispatch(slot, 0.0)
        while heap:
            t, s, slot, client, rtt, t0, base = heapq.heappop(heap)
            sched.emit(t, snapshot)
            mix = staleness_weight(updates - base, cfg.fedasync_beta, cfg.fedasync_a)
            global_params = axpy_combine([1.0 - mix, mix], [global_params, pool.result(s)])
            updates += 1
            comm += 2
            record_completion(client, rtt, stats)
            trace.append(TraceEvent(t0, t, slot, client, s))
            if t < cfg.time_budget:
                dispatch(slot, t)
        sched.finish(snapshot)
    finally:
        pool.close()

    loss, acc = evaluate(env.model, global_params, env.task.test)
    return RunReport(cfg, sched.rows, global_params, loss, acc, np.array([updates]), trace,
                     client_counts=stats.count_table.copy())


def run_fedavg(cfg: RunConfig, env: Environment | None = None) -> RunReport:
    """Synchronous rounds; each round lasts as long as its slowest client."""
    env = env or build_environment(cfg)
    rng = env.sched_rng
    sched = MetricSchedule(cfg.eval_interval, cfg.time_budget, env.model, env.task.test)
    pool = _TrainPool(env, cfg)
    counts = np.zeros(cfg.clients, dtype=np.int64)
    global_params = np.array(env.init_params, dtype=np.float64)
    trace: list[TraceEvent] = []
    durations: list[float] = []
    now = 0.0
    seq = 0
    rounds = 0
    comm = 0

    def snapshot():
        return global_params, np.array([rounds]), rounds * cfg.K, comm

    try:
        while now < cfg.time_budget:
            chosen = rng.choice(cfg.clients, size=cfg.K, replace=False)
            rtts = [round_trip_time(env.population[c], rng, cfg.network_multiplier) for c in chosen]
            first = seq
            for c in chosen:
                pool.submit(global_params, int(c), seq)
                seq += 1
            duration = max(rtts)
            end = now + duration
            sched.emit(end, snapshot)
            locals_ = [pool.result(first + j) for j in range(cfg.K)]
            global_params = axpy_combine([1.0] * cfg.K, locals_)
            for j, (c, rtt) in enumerate(zip(chosen, rtts)):
                trace.append(TraceEvent(now, now + rtt, j, int(c), first + j))
                counts[c] += 1
            rounds += 1
            comm += 2 * cfg.K
            durations.append(duration)
            now = end
        sched.finish(snapshot)
    finally:
        pool.close()

    loss, acc = evaluate(env.model, global_params, env.task.test)
    return RunReport(cfg, sched.rows, global_params, loss, acc, np.array([rounds]), trace,
                     round_durations=durations, client_counts=counts)


RUNNERS = {"gitfl": run_gitfl, "fedavg": run_fedavg, "fedasync": run_fedasync}


def run(cfg: RunConfig, env: Environment | None = None) -> RunReport:
    cfg.validate()
    log.debug("running %s (selector=%s, seed=%d)", cfg.algorithm, cfg.selector, cfg.seed)
    return RUNNERS[cfg.algorithm](cfg, env)


def version_spread(versions: Sequence[int]) -> int:
    versions = np.asarray(versions)
    return int(versions.max() - versions.min())
