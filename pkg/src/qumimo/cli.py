"""Command-line experiment runner.

Subcommands::

    qumimo fixed-z    --config cfg.json [--seed S] [--workers W] [--out DIR] [--profile ci|full]
    qumimo scaling    --config cfg.json [...]
    qumimo stochastic --config cfg.json [...]
    qumimo boundary   [--m 2 3] [--resolution 0.05] --out DIR
    qumimo validate   [--quick]

Grid/stochastic runs write plot-ready CSV plus manifest.json into the
output directory; `validate` executes the built-in invariant suite and
exits nonzero on any failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, experiments
from .errors import ConfigError, QumimoError


def _add_run_args(sub):
    sub.add_argument("--config", required=True, help="JSON experiment config")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--profile", choices=("ci", "full"), default="ci")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qumimo", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qumimo {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("fixed-z", "scaling", "stochastic"):
        _add_run_args(subs.add_parser(name))
    boundary = subs.add_parser("boundary")
    boundary.add_argument("--m", type=int, nargs="+", default=[2, 3])
    boundary.add_argument("--resolution", type=float, default=0.05)
    boundary.add_argument("--out", required=True)
    validate = subs.add_parser("validate")
    validate.add_argument("--quick", action="store_true", help="smaller sample counts")
    return parser


def _load(args, expected_regime: str):
    cfg = experiments.load_config(args.config, profile=args.profile)
    if cfg.regime != expected_regime:
        raise ConfigError("$.regime", f"config is {cfg.regime!r}, subcommand needs {expected_regime!r}")
    if args.seed is not None:
        raw = dict(cfg.raw)
        raw["seed"] = args.seed
        cfg = experiments.validate_config(raw, profile=args.profile)
    out = args.out or cfg.output_dir
    if not out:
        raise ConfigError("$.output_dir", "no output directory (config key or --out)")
    return cfg, out


def _run_checks(quick: bool) -> int:
    from . import channel, cloner, decoder, noise
    from .tensor import ModeSpace, partial_trace

    failures = 0

    def check(name, ok, detail=""):
        nonlocal failures
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
        failures += 0 if ok else 1

    for m in (2, 3, 4):
        f = np.asarray(cloner.clone_fidelities(tuple([1 / m] * m)).fidelities)
        check(f"cloner symmetric M={m}", np.allclose(f, (2 * m + 1) / (3 * m), atol=1e-6))
    rng = np.random.default_rng(0)
    worst = max(
        abs(np.sum(np.square(b := np.asarray(cloner.clone_amplitudes(tuple(rng.dirichlet(np.ones(rng.integers(2, 6))))).beta))) + b.sum() ** 2 - 2.0)
        for _ in range(20 if quick else 100)
    )
    check("amplitude identity", worst < 1e-9, f"worst {worst:.1e}")

    draws = 3 if quick else 10
    ok = True
    for _ in range(draws):
        n = int(rng.integers(1, 4))
        params = channel.ChannelParams(
            n=n, eta=float(rng.uniform(0, 1)), lam=tuple(rng.uniform(0, 1, n)),
            delta=float(rng.uniform(0.3, 2)),
        )
        ch = channel.channel_choi(params)
        space = ModeSpace.qubits(range(1, 2 * n + 1))
        tp = partial_trace(ch.choi, space, tuple(range(1, n + 1)))
        ident = np.eye(2 ** n) / 2 ** n
        ok &= bool(np.max(np.abs(tp - np.eye(2 ** n))) < 1e-8)
        ok &= bool(np.max(np.abs(channel.apply_channel(ch, ident) - ident)) < 1e-8)
    check("channel CPTP + unital", ok)

    xi = noise.sample_fluctuation(0.5, 10_000 if quick else 100_000, noise.make_rng(7))
    check("fluctuation moments", abs(xi.mean() - 1) < 0.02 and abs(xi.var() - 0.25) < 0.02,
          f"mean {xi.mean():.4f} var {xi.var():.4f}")

    enc = cloner.cloner_choi((1.0,))
    ch = channel.channel_choi(channel.ChannelParams(n=1, eta=0.0, lam=(0.0,), delta=1.0))
    qr = decoder.build_qr(decoder.compose_effective_map(enc, ch, (1,), (1,)))
    dec = decoder.purification_sdp(qr, 1.0)
    check("decoder identity sanity", abs(dec.f_avg - 1.0) < 1e-6, f"F={dec.f_avg:.8f}")
    ch = channel.channel_choi(channel.ChannelParams(n=1, eta=0.0, lam=(0.4,), delta=1.0))
    qr = decoder.build_qr(decoder.compose_effective_map(enc, ch, (1,), (1,)))
    dec = decoder.purification_sdp(qr, 1.0)
    check("decoder depolarizing sanity", abs(dec.f_avg - 0.8) < 1e-6, f"F={dec.f_avg:.8f}")

    from . import sdp as sdp_mod

    ok = True
    for _ in range(2 if quick else 5):
        n = int(rng.integers(4, 17))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        c = (a + a.conj().T) / 2
        prob = sdp_mod.SdpProblem([n], [c], [({0: np.eye(n, dtype=complex)}, 1.0)])
        sol = sdp_mod.solve(prob)
        ok &= sol.status == sdp_mod.OPTIMAL
        ok &= abs(sol.value - np.linalg.eigvalsh(c)[-1]) < 1e-7
    check("sdp eigenvalue oracle", ok)

    print(f"{failures} failure(s)" if failures else "all checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fixed-z":
            cfg, out = _load(args, "fixed_z")
            manifest = experiments.run_fixed_z(cfg, out, workers=args.workers)
        elif args.command == "scaling":
            cfg, out = _load(args, "scaling")
            manifest = experiments.run_scaling(cfg, out, workers=args.workers)
        elif args.command == "stochastic":
            cfg, out = _load(args, "stochastic")
            manifest = experiments.run_stochastic(cfg, out, workers=args.workers)
        elif args.command == "boundary":
            manifest = experiments.run_boundary(args.out, m_values=tuple(args.m),
                                                resolution=args.resolution)
        elif args.command == "validate":
            return _run_checks(args.quick)
        else:  # pragma: no cover
            raise ValueError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QumimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({k: manifest[k] for k in ("files",) if k in manifest}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
