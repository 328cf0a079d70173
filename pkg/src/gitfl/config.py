"""Experiment configuration files.

A config is INI-style text. Keys before the first ``[section]`` header are
top-level; keys inside ``[trainer]``, ``[task]``, ``[devices]`` or
``[fedasync]`` are addressed as ``section.key``, and the dotted form is
also accepted at top level. Grid keys (``algorithm``, ``selector``,
``alpha``, ``preset``) take comma-separated lists; each combination is run
for seeds ``seed, seed + 1, ..., seed + repeats - 1``.

Example::

    algorithm = gitfl, fedasync
    selector = CV
    K = 10
    clients = 100
    time_budget = 10000
    alpha = 0.1, 0.5
    seed = 1
    repeats = 3

    [trainer]
    lr = 0.01
"""

from __future__ import annotations

import configparser
import itertools
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .devices import PRESETS, CompositionPreset
from .orchestrator import ALGORITHMS, RunConfig
from .selector import Variant
from .trainers import TrainConfig

OUTPUT_DIR_ENV = "GITFL_OUTPUT_DIR"
_TOP = "run"


class ConfigError(ValueError):
    pass


def _as_int(v: str) -> int:
    return int(v)


def _as_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _as_list(v: str) -> list[str]:
    items = [s.strip() for s in v.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return items


def _as_counts(v: str) -> tuple[int, ...]:
    return tuple(int(s) for s in _as_list(v))


# key -> (parser, default). Every recognised key must appear here.
KEYS: dict[str, tuple] = {
    "algorithm": (_as_list, ["gitfl"]),
    "selector": (_as_list, ["CV"]),
    "K": (_as_int, 10),
    "clients": (_as_int, 100),
    "time_budget": (float, 10000.0),
    "alpha": (_as_list, None),
    "iid": (_as_bool, None),
    "preset": (_as_list, ["uniform"]),
    "seed": (_as_int, 0),
    "repeats": (_as_int, 1),
    "eval_interval": (float, 500.0),
    "pull_base_weight": (float, 10.0),
    "workers": (_as_int, 0),
    "target": (float, 0.8),
    "output_dir": (str, "runs"),
    "trainer.kind": (str, "auto"),
    "trainer.lr": (float, 0.01),
    "trainer.momentum": (float, 0.5),
    "trainer.batch": (_as_int, 50),
    "trainer.epochs": (_as_int, 5),
    "trainer.hidden": (_as_int, 32),
    "task.kind": (str, "blobs"),
    "task.dims": (_as_int, 10),
    "task.classes": (_as_int, 10),
    "task.n": (_as_int, 5000),
    "task.n_test": (_as_int, 1000),
    "task.margin": (float, 5.0),
    "task.noise": (float, 0.1),
    "task.train_path": (str, None),
    "task.test_path": (str, None),
    "devices.training": (_as_counts, None),
    "devices.comm": (_as_counts, None),
    "devices.sigma_scale": (float, 1.0),
    "devices.pairing": (str, "shuffle"),
    "devices.network_multiplier": (float, 1.0),
    "fedasync.beta": (float, 0.6),
    "fedasync.a": (float, 0.5),
}
_CANON = {k.lower(): k for k in KEYS}


@dataclass
class ExperimentSpec:
    runs: list[RunConfig]
    output_dir: Path
    repeats: int = 1
    target: float = 0.8


def cell_name(cfg: RunConfig) -> str:
    """Grid-cell label shared by every seed of one configuration."""
    algo = f"gitfl+{cfg.selector}" if cfg.algorithm == "gitfl" else cfg.algorithm
    alpha = "iid" if cfg.alpha is None else repr(cfg.alpha)
    preset = cfg.preset if isinstance(cfg.preset, str) else "custom"
    return f"{algo}_alpha-{alpha}_{preset}"


def run_filename(cfg: RunConfig) -> str:
    return f"{cell_name(cfg)}_seed-{cfg.seed}.csv"


def read_raw(text: str, source: str = "<config>") -> dict[str, str]:
    """Flatten a config text into ``{dotted.key: raw value}``."""
    parser = configparser.ConfigParser(
        interpolation=None, default_section="__none__", inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str
    try:
        # synthetic header for the top-level keys; shift reported lines back by one
        parser.read_string(f"[{_TOP}]\n" + text, source=source)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}: line {lineno - 1}: cannot parse {line.strip()!r}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}: line {exc.lineno - 1}: duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}: line {exc.lineno - 1}: duplicate section {exc.section!r}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    flat: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            full = key if section == _TOP else f"{section}.{key}"
            canon = _CANON.get(full.lower())
            if canon is None:
                raise ConfigError(f"{source}: unknown key {full!r}")
            if canon in flat:
                raise ConfigError(f"{source}: key {canon!r} set twice")
            flat[canon] = value
    return flat


def parse_config(text: str, source: str = "<config>") -> ExperimentSpec:
    raw = read_raw(text, source)
    values = {}
    for key, (conv, default) in KEYS.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r}: {exc}") from None
        else:
            values[key] = default
    return build_spec(values, source)


def build_spec(v: dict, source: str = "<config>") -> ExperimentSpec:
    def fail(key, msg):
        raise ConfigError(f"{source}: {key}: {msg}")

    if v["alpha"] is not None and v["iid"] is not None:
        fail("alpha", "'alpha' and 'iid' are mutually exclusive")
    if v["alpha"] is None:
        alphas: list[float | None] = [None]
    else:
        alphas = []
        for tok in v["alpha"]:
            if tok.lower() == "iid":
                alphas.append(None)
                continue
            try:
                a = float(tok)
            except ValueError:
                fail("alpha", f"not a number: {tok!r}")
            if not a > 0:
                fail("alpha", f"must be positive, got {a}")
            alphas.append(a)
    if v["iid"] is False:
        fail("iid", "iid = false needs an explicit alpha")

    for a in v["algorithm"]:
        if a not in ALGORITHMS:
            fail("algorithm", f"unknown algorithm {a!r}; expected one of {', '.join(ALGORITHMS)}")
    try:
        selectors = [Variant.parse(s).value for s in v["selector"]]
    except ValueError as exc:
        fail("selector", str(exc))

    explicit = v["devices.training"] is not None or v["devices.comm"] is not None
    if explicit:
        if v["devices.training"] is None or v["devices.comm"] is None:
            fail("devices.training", "explicit counts need both devices.training and devices.comm")
        try:
            presets: list = [CompositionPreset(v["devices.training"], v["devices.comm"])]
        except ValueError as exc:
            fail("devices.training", str(exc))
        if presets[0].total != v["clients"]:
            fail("devices.training", f"counts sum to {presets[0].total}, expected clients = {v['clients']}")
    else:
        presets = [p.lower() for p in v["preset"]]
        for p in presets:
            if p not in PRESETS:
                fail("preset", f"unknown preset {p!r}; known: {', '.join(PRESETS)}")

    if v["K"] < 1:
        fail("K", f"must be at least 1, got {v['K']}")
    if v["K"] > v["clients"]:
        fail("K", f"K = {v['K']} exceeds clients = {v['clients']}")
    if v["repeats"] < 1:
        fail("repeats", f"must be at least 1, got {v['repeats']}")
    if v["devices.pairing"] not in ("shuffle", "aligned"):
        fail("devices.pairing", f"expected shuffle or aligned, got {v['devices.pairing']!r}")

    try:
        train = TrainConfig(v["trainer.lr"], v["trainer.momentum"], v["trainer.batch"], v["trainer.epochs"])
    except ValueError as exc:
        fail("trainer", str(exc))

    base = RunConfig(
        K=v["K"],
        clients=v["clients"],
        time_budget=v["time_budget"],
        eval_interval=v["eval_interval"],
        trainer_kind=v["trainer.kind"],
        hidden=v["trainer.hidden"],
        train=train,
        task=v["task.kind"],
        dims=v["task.dims"],
        classes=v["task.classes"],
        n_train=v["task.n"],
        n_test=v["task.n_test"],
        margin=v["task.margin"],
        noise=v["task.noise"],
        train_path=v["task.train_path"],
        test_path=v["task.test_path"],
        sigma_scale=v["devices.sigma_scale"],
        pairing=v["devices.pairing"],
        network_multiplier=v["devices.network_multiplier"],
        pull_base_weight=v["pull_base_weight"],
        fedasync_beta=v["fedasync.beta"],
        fedasync_a=v["fedasync.a"],
        workers=v["workers"],
    )

    runs: list[RunConfig] = []
    seen: set[str] = set()
    seeds = [v["seed"] + i for i in range(v["repeats"])]
    for algo, sel, alpha, preset, seed in itertools.product(v["algorithm"], selectors, alphas, presets, seeds):
        if algo != "gitfl":
            sel = "R"  # baselines pick clients uniformly; selector is not part of their cell
        cfg = replace(base, algorithm=algo, selector=sel, alpha=alpha, preset=preset, seed=seed)
        name = run_filename(cfg)
        if name in seen:
            continue
        seen.add(name)
        try:
            cfg.validate()
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        runs.append(cfg)

    out = os.environ.get(OUTPUT_DIR_ENV) or v["output_dir"]
    return ExperimentSpec(runs, Path(out), v["repeats"], v["target"])


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    return parse_config(path.read_text(), str(path))
