"""YAML scenario configuration with line-anchored validation errors."""
from dataclasses import dataclass, field, replace
from importlib import resources

import yaml

from .densities import SamplingSchedule, density_from_dict
from .errors import ConfigError
from .experiment import Scenario
from .kernels import Kernel
from .krr import GammaSchedule
from .operator import QuadratureGrid, StepFunction

SECTIONS = {
    "kernel": {"family", "params", "domain"},
    "regression": {"pieces"},
    "schedule": {"sampler", "step_scale", "phases"},
    "noise": {"variance"},
    "gamma": {"gamma0", "alpha", "r"},
    "grid": {"nodes"},
    "checkpoints": None,
    "seeds": {"master", "replicates"},
    "rate": {"ts"},
    "diagnose": {"functions", "max_lag", "replicates", "trace"},
    "output": {"directory", "formats"},
}
REQUIRED = ("kernel", "regression", "schedule", "gamma", "checkpoints")
FORMATS = ("csv", "json")
DEFAULT_TS = (250, 500, 1000, 2000, 4000)


class _Map(dict):
    line = None
    lines = None


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key_node.start_mark.line + 1)
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = key_node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _line(mapping, key=None):
    if isinstance(mapping, _Map):
        if key is not None and mapping.lines and key in mapping.lines:
            return mapping.lines[key]
        return mapping.line
    return None


def _need(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key {key!r} in {where}", _line(mapping))
    return mapping[key]


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping", _line(mapping))
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}; allowed: {sorted(allowed)}",
                              _line(mapping, key))


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    output_dir: str = "out"
    formats: tuple = FORMATS
    rate_ts: tuple = DEFAULT_TS
    functions: tuple = ("x", "sin")
    max_lag: int = 50
    cov_replicates: int = 10_000
    trace: tuple = field(default=())

    def trace_ts(self):
        if self.trace:
            return self.trace
        total = self.scenario.schedule.total
        step = max(1, total // 30)
        return tuple(range(step, total + 1, step))

    def echo(self):
        """Plain-dict config that parses back to an equivalent ``RunConfig``."""
        s = self.scenario
        return {
            "kernel": s.kernel.to_dict(),
            "regression": {"pieces": s.h.to_dict()},
            "schedule": {
                "sampler": s.sampler,
                "step_scale": s.step_scale,
                "phases": [{"density": d.to_dict(), "count": n} for d, n in s.schedule.phases],
            },
            "noise": {"variance": s.noise_var},
            "gamma": {"gamma0": s.gamma.gamma0, "alpha": s.gamma.alpha, "r": s.r},
            "grid": {"nodes": s.grid.count},
            "checkpoints": list(s.checkpoints),
            "seeds": {"master": s.master_seed, "replicates": s.replicates},
            "rate": {"ts": list(self.rate_ts)},
            "diagnose": {"functions": list(self.functions), "max_lag": self.max_lag,
                         "replicates": self.cov_replicates, "trace": list(self.trace)},
            "output": {"directory": self.output_dir, "formats": list(self.formats)},
        }


def _wrap(fn, mapping, key):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid {key}: {exc}", _line(mapping, key)) from exc


def from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at top level", _line(doc))
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}; allowed: {sorted(SECTIONS)}", _line(doc, key))
    for key in REQUIRED:
        _need(doc, key, "config")
    for key, allowed in SECTIONS.items():
        if allowed is not None and key in doc:
            _check_keys(doc[key], allowed, key)

    ksec = doc["kernel"]
    kernel = _wrap(lambda: Kernel.from_dict(ksec), doc, "kernel")
    h = _wrap(lambda: StepFunction.from_dict(_need(doc["regression"], "pieces", "regression")),
              doc, "regression")
    ssec = doc["schedule"]
    phases_spec = _need(ssec, "phases", "schedule")
    if not isinstance(phases_spec, list) or not phases_spec:
        raise ConfigError("schedule.phases must be a non-empty list", _line(ssec, "phases"))
    phases = []
    for item in phases_spec:
        _check_keys(item, {"density", "count"}, "schedule phase")
        dens = _wrap(lambda: density_from_dict(_need(item, "density", "phase"), kernel.domain),
                     item, "density")
        count = _need(item, "count", "phase")
        if not isinstance(count, int) or count < 1:
            raise ConfigError("phase count must be a positive integer", _line(item, "count"))
        phases.append((dens, count))
    schedule = _wrap(lambda: SamplingSchedule(tuple(phases)), doc, "schedule")

    gsec = doc["gamma"]
    gamma = _wrap(lambda: GammaSchedule(float(_need(gsec, "gamma0", "gamma")),
                                        float(_need(gsec, "alpha", "gamma"))), gsec, "alpha")
    nodes = doc.get("grid", {}).get("nodes", 2001)
    grid = _wrap(lambda: QuadratureGrid(kernel.domain[0], kernel.domain[1], int(nodes)),
                 doc.get("grid", doc), "nodes")
    seeds = doc.get("seeds", {})
    scenario = _wrap(lambda: Scenario(
        kernel=kernel, h=h, schedule=schedule,
        noise_var=float(doc.get("noise", {}).get("variance", 0.01)),
        gamma=gamma, grid=grid,
        checkpoints=tuple(int(t) for t in doc["checkpoints"]),
        master_seed=int(seeds.get("master", 2024)),
        replicates=int(seeds.get("replicates", 20)),
        sampler=str(ssec.get("sampler", "independent")),
        step_scale=None if ssec.get("step_scale") is None else float(ssec["step_scale"]),
        r=float(gsec.get("r", 1.0)),
    ), doc, "checkpoints")

    out = doc.get("output", {})
    formats = tuple(out.get("formats", FORMATS))
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown output formats {bad}; allowed: {list(FORMATS)}", _line(out, "formats"))
    rate = doc.get("rate", {})
    diag = doc.get("diagnose", {})
    return RunConfig(
        scenario=scenario,
        output_dir=str(out.get("directory", "out")),
        formats=formats,
        rate_ts=tuple(int(t) for t in rate.get("ts", DEFAULT_TS)),
        functions=tuple(diag.get("functions", ("x", "sin"))),
        max_lag=int(diag.get("max_lag", 50)),
        cov_replicates=int(diag.get("replicates", 10_000)),
        trace=tuple(int(t) for t in diag.get("trace", ())),
    )


def loads(text):
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line) from exc
    return from_dict(doc)


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return loads(text)


def canonical_text():
    return resources.files("nonstat_krr").joinpath("data/canonical.yaml").read_text()


def canonical_config():
    return loads(canonical_text())


def with_overrides(cfg, seed=None, replicates=None, output=None):
    scen = cfg.scenario
    try:
        if seed is not None:
            scen = replace(scen, master_seed=int(seed))
        if replicates is not None:
            scen = replace(scen, replicates=int(replicates))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(cfg, scenario=scen, output_dir=output if output is not None else cfg.output_dir)
