"""Command-line workbench: ``burstcode <subcommand> ...``.

Bit files are ASCII ``0``/``1`` characters (whitespace ignored); state files
hold one ``G``/``B`` label per line; channels are JSON objects with
``p_g_to_b``, ``p_b_to_g``, ``q_g``, ``q_b`` (or a ``q_emit`` table).

Exit codes: 0 success, 2 bad configuration or input, 3 a failed ``--assert``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baumwelch, harness, predictor
from .channel import ChannelParams, apply_channel, sample_noise, states_from_text
from .codes import CodeSpec, build_encoder, generate_parity_matrix, load_alist, save_alist
from .density import threshold
from .helper import turbo_decode
from .sumproduct import TannerGraph

EXIT_CONFIG = 2
EXIT_ASSERT = 3


class UsageError(Exception):
    pass


def read_bits(path: str) -> np.ndarray:
    text = Path(path).read_text()
    chars = [c for c in text if not c.isspace()]
    if any(c not in "01" for c in chars):
        raise UsageError(f"{path}: bit files may only contain 0 and 1")
    return np.array([c == "1" for c in chars], dtype=np.uint8)


def write_bits(path: str, bits) -> None:
    Path(path).write_text("".join("1" if b else "0" for b in bits) + "\n")


def write_states(path: str, states) -> None:
    Path(path).write_text("".join("GB"[int(s)] + "\n" for s in states))


def read_channel(path: str) -> ChannelParams:
    try:
        return ChannelParams.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: bad JSON ({exc})") from None


def _out(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen_code(a) -> int:
    m = generate_parity_matrix(CodeSpec(a.n, a.j, a.k), a.seed, method=a.method, full_rank=not a.allow_deficient)
    _out(a.out, save_alist(m))
    return 0


def cmd_encode(a) -> int:
    enc = build_encoder(load_alist(Path(a.code).read_text()))
    if a.input:
        msg = read_bits(a.input)
    else:
        if a.seed is None:
            raise UsageError("random messages need --seed")
        msg = np.random.default_rng(a.seed).integers(0, 2, enc.n_message, dtype=np.uint8)
    if msg.size % enc.n_message:
        raise UsageError(f"message length {msg.size} is not a multiple of {enc.n_message}")
    words = enc.encode(msg.reshape(-1, enc.n_message)).reshape(-1)
    write_bits(a.out, words)
    return 0


def cmd_channel_sim(a) -> int:
    ch = read_channel(a.channel)
    if a.input:
        x = read_bits(a.input)
    elif a.length is not None:
        x = np.zeros(a.length, dtype=np.uint8)
    else:
        raise UsageError("give --in or --length")
    noise, states = sample_noise(ch, x.size, a.seed, stationary_start=a.stationary)
    write_bits(a.out, apply_channel(x, noise))
    if a.noise:
        write_bits(a.noise, noise)
    if a.states:
        write_states(a.states, states)
    return 0


def cmd_decode(a) -> int:
    graph = TannerGraph(load_alist(Path(a.code).read_text()))
    if a.channel:
        ch = read_channel(a.channel)
    elif a.q is not None and a.alg in ("sp", "bitflip"):
        ch = ChannelParams.gec(0.5, 0.5, a.q, a.q)
    else:
        raise UsageError(f"--alg {a.alg} needs --channel")
    y = read_bits(a.input)
    n = graph.n_vars
    if y.size % n:
        raise UsageError(f"received length {y.size} is not a multiple of N={n}")
    states = None
    if a.alg == "gallager-state" and a.mode == "genie":
        if not a.states:
            raise UsageError("genie mode needs --states")
        states = states_from_text(Path(a.states).read_text())
        if states.size != y.size:
            raise UsageError("state file length does not match the received word")
    out, trace = [], []
    for w in range(y.size // n):
        sl = slice(w * n, (w + 1) * n)
        if a.alg == "sp-helper":
            res = turbo_decode(graph, ch, y[sl], a.outer, a.inner)
            trace.extend((w, *r) for r in res.trace)
            out.append(res.bits)
        else:
            out.append(harness.decode_word(a.alg, graph, ch, y[sl], None if states is None else states[sl],
                                           a.iters, a.inner, a.mode))
    write_bits(a.out, np.concatenate(out))
    if a.trace:
        Path(a.trace).write_text("word,round,unsatisfied_checks,bit_flips\n"
                                 + "".join(",".join(map(str, r)) + "\n" for r in trace))
    return 0


def cmd_estimate(a) -> int:
    obs = read_bits(a.input)
    init = read_channel(a.init)
    res = baumwelch.fit(obs, init, a.max_iters, a.tol)
    _out(a.out, json.dumps(res.params.to_dict(), indent=2) + "\n")
    if a.trace:
        Path(a.trace).write_text(harness.trace_csv(res))
    return 0


def cmd_de_region(a) -> int:
    grid = harness.run_region_map(a.j, a.k, a.p_gb, a.p_bg, a.steps, workers=a.workers)
    _out(a.out, harness.region_csv(grid, deterministic=not a.timestamp))
    if a.gnuplot:
        Path(a.gnuplot).write_text(harness.gnuplot_script(a.out or "region.csv", "region"))
    if a.threshold:
        sys.stderr.write(f"threshold eta_bar* = {threshold(a.j, a.k):.6f}\n")
    return 0


def cmd_ber_sweep(a) -> int:
    data = json.loads(Path(a.config).read_text())
    data["seed"] = a.seed
    for key in ("trials", "iters"):
        if getattr(a, key) is not None:
            data[key] = getattr(a, key)
    cfg = harness.ExperimentConfig.from_dict(data)
    recs = harness.run_ber_sweep(cfg, workers=a.workers)
    _out(a.out, harness.records_to_csv(recs, cfg.sweep_param, timing=a.timing))
    if a.gnuplot:
        Path(a.gnuplot).write_text(harness.gnuplot_script(a.out or "ber.csv", "ber"))
    if a.assert_ordering:
        bad = [c for c in harness.check_ordering(recs) if not c.ok]
        for c in bad:
            sys.stderr.write(f"ordering violated at {cfg.sweep_param}={c.sweep_value}\n")
        if bad:
            return EXIT_ASSERT
    return 0


def cmd_predict(a) -> int:
    ch = read_channel(a.channel)
    _out(a.out, predictor.prediction_csv(ch, read_bits(a.input)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="burstcode", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-code", help="generate a regular parity-check matrix (alist)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--method", choices=("permutation", "gallager"), default="permutation")
    s.add_argument("--allow-deficient", action="store_true", help="accept a rank-deficient matrix")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_code)

    s = sub.add_parser("encode", help="encode messages (or one random message)")
    s.add_argument("--code", "--H", dest="code", required=True)
    s.add_argument("--in", dest="input")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("channel-sim", help="pass bits through the two-state channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--in", dest="input")
    s.add_argument("--length", type=int)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--stationary", action="store_true", help="draw the start state from the stationary law")
    s.add_argument("--out", required=True)
    s.add_argument("--noise")
    s.add_argument("--states")
    s.set_defaults(func=cmd_channel_sim)

    s = sub.add_parser("decode", help="decode received words")
    s.add_argument("--code", "--H", dest="code", required=True)
    s.add_argument("--channel")
    s.add_argument("--q", type=float, help="memoryless flip probability (sp and bitflip only)")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--alg", choices=harness.ALGORITHMS, default="sp")
    s.add_argument("--mode", choices=("genie", "estimated"), default="genie")
    s.add_argument("--states")
    s.add_argument("--iters", "--max-iters", dest="iters", type=int, default=50)
    s.add_argument("--outer", type=int, default=10)
    s.add_argument("--inner", type=int, default=5)
    s.add_argument("--trace", help="per-round CSV for sp-helper")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("estimate", help="Baum-Welch fit to a noise sequence")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--init", required=True)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--out")
    s.add_argument("--trace")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("de-region", help="density-evolution decoding region")
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--p-gb", type=float, required=True)
    s.add_argument("--p-bg", type=float, required=True)
    s.add_argument("--steps", type=int, default=101)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timestamp", action="store_true", help="add a generation time to the header")
    s.add_argument("--threshold", action="store_true", help="also report the bisection threshold")
    s.add_argument("--gnuplot")
    s.add_argument("--out")
    s.set_defaults(func=cmd_de_region)

    s = sub.add_parser("ber-sweep", help="Monte Carlo BER sweep from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--iters", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="add a wall_time column")
    s.add_argument("--assert", dest="assert_ordering", action="store_true",
                   help="exit 3 unless the decoder ordering holds at every qualifying point")
    s.add_argument("--gnuplot")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ber_sweep)

    s = sub.add_parser("predict", help="one-step error predictions for a noise sequence")
    s.add_argument("--channel", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"burstcode {args.command}: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
