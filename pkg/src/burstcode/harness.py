"""Monte Carlo experiments: BER sweeps, decoding-region maps and estimation traces.

Every trial draws its message and noise from streams derived from
``(seed, sweep index, trial index)``, and results are reduced in trial order,
so the output bytes do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from . import baumwelch, density
from .channel import ChannelParams, average_inversion_probability, derive_seed, sample_noise
from .codes import CodeSpec, ParityCheckMatrix, build_encoder, generate_parity_matrix, load_alist
from .gallager import decode_bitflip, decode_probabilistic
from .helper import turbo_decode
from .sumproduct import TannerGraph, channel_llrs, decode_sp

ALGORITHMS = ("sp", "sp-helper", "gallager-state", "bitflip")
SWEEP_PARAMS = ("p_g_to_b", "p_b_to_g", "q_g", "q_b")


class ConfigError(ValueError):
    """The experiment description is invalid."""


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


@dataclass
class ExperimentConfig:
    code: dict
    channel: ChannelParams
    sweep_param: str
    sweep_values: list
    algorithms: list = field(default_factory=lambda: ["sp", "sp-helper", "gallager-state"])
    trials: int = 200
    iters: int = 50
    seed: int = 0
    turbo_inner: int = 5
    gallager_mode: str = "genie"

    def __post_init__(self):
        _require(isinstance(self.code, Mapping), "code must be an object")
        if "alist" in self.code:
            _require(isinstance(self.code["alist"], str), "code.alist must be a path")
        else:
            for key in ("n", "j", "k"):
                _require(isinstance(self.code.get(key), int), f"code.{key} must be an integer")
        _require(self.sweep_param in SWEEP_PARAMS,
                 f"sweep parameter {self.sweep_param!r} is not a channel field {SWEEP_PARAMS}")
        _require(len(self.sweep_values) > 0, "sweep needs at least one value")
        _require(all(isinstance(v, (int, float)) and 0.0 <= v <= 1.0 for v in self.sweep_values),
                 "sweep values must be probabilities")
        _require(len(self.algorithms) > 0, "no algorithms selected")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        _require(not bad, f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        _require(isinstance(self.trials, int) and self.trials >= 1, "trials must be >= 1")
        _require(isinstance(self.iters, int) and self.iters >= 1, "iters must be >= 1")
        _require(isinstance(self.turbo_inner, int) and 1 <= self.turbo_inner <= self.iters,
                 "turbo_inner must lie in [1, iters]")
        _require(self.gallager_mode in ("genie", "estimated"), "gallager_mode must be genie or estimated")
        _require(self.channel.is_destination_convention,
                 "sweeps vary q_g/q_b, so the channel must use the destination convention")
        for v in self.sweep_values:
            try:
                average_inversion_probability(self.point_channel(v))
            except ValueError as exc:
                raise ConfigError(f"sweep value {v}: {exc}") from None

    def point_channel(self, value: float) -> ChannelParams:
        d = self.channel.to_dict()
        d[self.sweep_param] = value
        return ChannelParams.from_dict(d)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        try:
            sweep = data["sweep"]
            kwargs = dict(
                code=dict(data["code"]),
                channel=ChannelParams.from_dict(data["channel"]),
                sweep_param=sweep["param"],
                sweep_values=list(sweep["values"]),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for key in ("algorithms", "trials", "iters", "seed", "turbo_inner", "gallager_mode"):
            if key in data:
                kwargs[key] = data[key]
        unknown = set(data) - {"code", "channel", "sweep", "algorithms", "trials", "iters", "seed",
                               "turbo_inner", "gallager_mode"}
        _require(not unknown, f"unknown config keys {sorted(unknown)}")
        kwargs["algorithms"] = list(kwargs.get("algorithms", ["sp", "sp-helper", "gallager-state"]))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "code": dict(self.code),
            "channel": self.channel.to_dict(),
            "sweep": {"param": self.sweep_param, "values": list(self.sweep_values)},
            "algorithms": list(self.algorithms),
            "trials": self.trials,
            "iters": self.iters,
            "seed": self.seed,
            "turbo_inner": self.turbo_inner,
            "gallager_mode": self.gallager_mode,
        }


def wilson_interval(errors: int, total: int) -> tuple[float, float]:
    ci = binomtest(int(errors), int(total)).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class BerRecord:
    sweep_value: float
    algorithm: str
    bits: int
    bit_errors: int
    word_errors: int
    words: int
    wall_time: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def wer(self) -> float:
        return self.word_errors / self.words

    @property
    def ber_interval(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.bits)


def load_code(code: Mapping[str, Any], seed: int) -> ParityCheckMatrix:
    if "alist" in code:
        return load_alist(Path(code["alist"]).read_text())
    return generate_parity_matrix(CodeSpec(code["n"], code["j"], code["k"]),
                                  code.get("seed", seed), full_rank=True)


# per-process trial context, installed by _init_worker
_CTX: dict = {}


def _init_worker(matrix: ParityCheckMatrix, config: ExperimentConfig):
    _CTX.clear()
    _CTX["graph"] = TannerGraph(matrix)
    _CTX["encoder"] = build_encoder(matrix)
    _CTX["config"] = config


def decode_word(alg: str, graph: TannerGraph, params: ChannelParams, received, states,
                iters: int, turbo_inner: int = 5, gallager_mode: str = "genie") -> np.ndarray:
    if alg == "sp":
        return decode_sp(graph, channel_llrs(received, average_inversion_probability(params)), iters).bits
    if alg == "sp-helper":
        return turbo_decode(graph, params, received, iters // turbo_inner, turbo_inner).bits
    if alg == "gallager-state":
        return decode_probabilistic(graph, params, received, states, gallager_mode, iters).bits
    if alg == "bitflip":
        return decode_bitflip(graph, received, iters).bits
    raise ValueError(f"unknown algorithm {alg!r}")


def _run_trials(task: tuple[int, int, int]) -> list[tuple[int, ...]]:
    point, first, count = task
    cfg: ExperimentConfig = _CTX["config"]
    graph, enc = _CTX["graph"], _CTX["encoder"]
    params = cfg.point_channel(cfg.sweep_values[point])
    out = []
    for t in range(first, first + count):
        rng = np.random.default_rng(derive_seed(cfg.seed, point, t, 0))
        codeword = enc.encode(rng.integers(0, 2, enc.n_message, dtype=np.uint8))
        noise, states = sample_noise(params, graph.n_vars, derive_seed(cfg.seed, point, t, 1))
        received = codeword ^ noise
        row = []
        for alg in cfg.algorithms:
            t0 = time.perf_counter()
            bits = decode_word(alg, graph, params, received, states, cfg.iters, cfg.turbo_inner,
                               cfg.gallager_mode)
            errs = int(np.count_nonzero(bits != codeword))
            row.extend((errs, time.perf_counter() - t0))
        out.append(tuple(row))
    return out


def _tasks(n_points: int, trials: int, chunk: int) -> list[tuple[int, int, int]]:
    return [(p, s, min(chunk, trials - s)) for p in range(n_points) for s in range(0, trials, chunk)]


def run_ber_sweep(config: ExperimentConfig, workers: int = 1, chunk: int = 10) -> list[BerRecord]:
    matrix = load_code(config.code, config.seed)
    tasks = _tasks(len(config.sweep_values), config.trials, chunk)
    if workers <= 1:
        _init_worker(matrix, config)
        results = [_run_trials(t) for t in tasks]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(matrix, config)) as pool:
            results = list(pool.map(_run_trials, tasks))
    n = matrix.n_cols
    records = []
    n_alg = len(config.algorithms)
    for p, value in enumerate(config.sweep_values):
        rows = [row for task, rs in zip(tasks, results) if task[0] == p for row in rs]
        for a, alg in enumerate(config.algorithms):
            errs = [r[2 * a] for r in rows]
            records.append(BerRecord(value, alg, len(rows) * n, sum(errs),
                                     sum(1 for e in errs if e), len(rows),
                                     sum(r[2 * a + 1] for r in rows)))
        assert len(records) == (p + 1) * n_alg
    return records


def records_to_csv(records: Iterable[BerRecord], sweep_param: str, timing: bool = False) -> str:
    """CSV of a sweep; wall time is only written when ``timing`` is set."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["sweep_param", "sweep_value", "algorithm", "words", "bits", "bit_errors", "word_errors",
            "ber", "ber_lo", "ber_hi", "wer"]
    w.writerow(head + (["wall_time"] if timing else []))
    for r in records:
        lo, hi = r.ber_interval
        row = [sweep_param, repr(float(r.sweep_value)), r.algorithm, r.words, r.bits, r.bit_errors,
               r.word_errors, f"{r.ber:.9g}", f"{lo:.9g}", f"{hi:.9g}", f"{r.wer:.9g}"]
        w.writerow(row + ([f"{r.wall_time:.3f}"] if timing else []))
    return buf.getvalue()


@dataclass
class OrderingCheck:
    sweep_value: float
    qualifies: bool
    helper_below_sp: bool
    gallager_at_or_below_helper: bool

    @property
    def ok(self) -> bool:
        return (not self.qualifies) or (self.helper_below_sp and self.gallager_at_or_below_helper)


def check_ordering(records: Sequence[BerRecord], floor: float = 1e-2) -> list[OrderingCheck]:
    """Compare intervals at each point where plain SP's interval lies above ``floor``.

    sp-helper must lie strictly below SP (upper end under SP's lower end) and
    gallager-state must not reach above sp-helper (upper ends compared).
    """
    by = {(r.sweep_value, r.algorithm): r for r in records}
    out = []
    for value in dict.fromkeys(r.sweep_value for r in records):
        try:
            sp_lo, _ = by[value, "sp"].ber_interval
            _, h_hi = by[value, "sp-helper"].ber_interval
            _, g_hi = by[value, "gallager-state"].ber_interval
        except KeyError as exc:
            raise ValueError(f"ordering needs sp, sp-helper and gallager-state records ({exc})") from None
        out.append(OrderingCheck(value, sp_lo > floor, h_hi < sp_lo, g_hi <= h_hi))
    return out


# -- decoding regions -------------------------------------------------------

def _region_rows(args):
    j, k, p_gb, p_bg, qa, qb, max_iters, eps = args
    return density.decoding_region(j, k, p_gb, p_bg, qa, qb, max_iters, eps)


def run_region_map(j: int, k: int, p_g_to_b: float, p_b_to_g: float, steps: int = 101,
                   q_max: float = 0.5, max_iters: int = 200, eps: float = 1e-6,
                   workers: int = 1) -> density.RegionGrid:
    """Region raster; q_{B<-G} rows are split across workers and re-joined in order."""
    qa = density.axis(0.0, q_max, steps)
    qb = density.axis(0.0, q_max, steps)
    if workers <= 1:
        return density.decoding_region(j, k, p_g_to_b, p_b_to_g, qa, qb, max_iters, eps)
    parts = [c for c in np.array_split(qa, workers) if c.size]
    with ProcessPoolExecutor(workers) as pool:
        grids = list(pool.map(_region_rows, [(j, k, p_g_to_b, p_b_to_g, c, qb, max_iters, eps) for c in parts]))
    return density.RegionGrid(qa, qb, p_g_to_b, p_b_to_g, j, k,
                              np.vstack([g.decodable for g in grids]),
                              np.vstack([g.eta_bar for g in grids]),
                              np.vstack([g.iters for g in grids]))


def region_csv(grid: density.RegionGrid, deterministic: bool = True) -> str:
    """Region CSV with a provenance header; a timestamp is added unless ``deterministic``."""
    head = f"# code j={grid.j} k={grid.k} transitions p_gb={grid.p_g_to_b!r} p_bg={grid.p_b_to_g!r}\n"
    if not deterministic:
        head += f"# generated {time.strftime('%Y-%m-%dT%H:%M:%S')}\n"
    return head + grid.to_csv(header=False)


# -- estimation ---------------------------------------------------------------

TRACE_COLUMNS = ["iter", "loglik", "p_gb", "p_bg", "q_g", "q_b"]


def trace_rows(result: baumwelch.FitResult) -> list[list[str]]:
    return [[str(i), repr(ll), repr(p.p_g_to_b), repr(p.p_b_to_g), repr(p.q_g), repr(p.q_b)]
            for i, (ll, p) in enumerate(zip(result.loglik_trace, result.history))]


def trace_csv(result: baumwelch.FitResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(trace_rows(result))
    return buf.getvalue()


def _fit_one(args):
    noise, init, max_iters, tol = args
    return baumwelch.fit(noise, init, max_iters, tol)


def simulate_training_noise(channel: ChannelParams, length: int, seed: int) -> np.ndarray:
    noise, _ = sample_noise(channel, length, derive_seed(seed, 0), stationary_start=True)
    return noise


def run_estimation(channel: ChannelParams, length: int, inits: Sequence[ChannelParams], seed: int,
                   max_iters: int = 500, tol: float = 1e-6, workers: int = 1):
    """Fit every init to one simulated noise sequence.

    Returns ``(fits, csv_text)``; the CSV stacks the traces with a leading
    ``run`` column.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if not inits:
        raise ValueError("at least one initial model is needed")
    noise = simulate_training_noise(channel, length, seed)
    jobs = [(noise, init, max_iters, tol) for init in inits]
    if workers <= 1:
        fits = [_fit_one(a) for a in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            fits = list(pool.map(_fit_one, jobs))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run"] + TRACE_COLUMNS)
    for run, res in enumerate(fits):
        for row in trace_rows(res):
            w.writerow([run] + row)
    return fits, buf.getvalue()


def relative_error(estimate: ChannelParams, truth: ChannelParams, allow_swap: bool = True) -> float:
    """Largest relative parameter error, minimized over the G/B labelling."""
    def worst(e: ChannelParams) -> float:
        pairs = zip((e.p_g_to_b, e.p_b_to_g, e.q_g, e.q_b),
                    (truth.p_g_to_b, truth.p_b_to_g, truth.q_g, truth.q_b))
        return max(abs(a - b) / abs(b) if b else abs(a) for a, b in pairs)

    best = worst(estimate)
    if allow_swap:
        best = min(best, worst(estimate.swapped()))
    return best


def gnuplot_script(csv_path: str, kind: str) -> str:
    """A ready-to-run gnuplot script for a sweep ("ber") or region ("region") CSV."""
    if kind == "ber":
        return (
            "set datafile separator ','\nset logscale y\nset key left top\n"
            "set xlabel 'sweep value'\nset ylabel 'BER'\n"
            f"plot for [a in 'sp sp-helper gallager-state bitflip'] '{csv_path}' "
            "using 2:(strcol(3) eq a ? $8 : 1/0) with linespoints title a\n"
        )
    if kind == "region":
        return (
            "set datafile separator ','\nset xlabel 'q_{B<-G}'\nset ylabel 'q_{G<-B}'\n"
            f"plot '{csv_path}' using 1:($4 == 1 ? $2 : 1/0) with points pt 5 ps 0.3 title 'decodable'\n"
        )
    raise ValueError(f"unknown plot kind {kind!r}")
