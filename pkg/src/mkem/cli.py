"""Command-line driver.

Exit codes: 0 success, 2 usage, 3 invalid parameters/data, 4 I/O,
5 exchange protocol error, 6 fingerprint mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, attack, exchange
from .gf2 import FormatError
from .kem import (KIND_CT, KIND_PK, KIND_SK, PRESETS, ParamError, ParamSet, decapsulate,
                  deserialize, encapsulate, keygen, serialize)
from .markov import fixed_weight_error, sample_error

EXIT_USAGE, EXIT_INVALID, EXIT_IO = 2, 3, 4

log = logging.getLogger("mkem")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _param_flags(p: argparse.ArgumentParser, defaults: ParamSet | None = None):
    g = p.add_argument_group("parameters")
    g.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    g.add_argument("--d", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--mu", type=float)
    p.set_defaults(param_defaults=defaults)


def _params(args) -> ParamSet:
    base = PRESETS[args.preset] if args.preset else args.param_defaults
    vals = {k: getattr(args, k) for k in ("d", "p", "m", "mu")}
    if base is None and any(vals[k] is None for k in ("d", "p", "m")):
        raise CliError("give --preset or all of --d --p --m", EXIT_USAGE)
    if base is not None:
        vals = {k: getattr(base, k) if v is None else v for k, v in vals.items()}
    if vals["mu"] is None:
        del vals["mu"]
    return ParamSet(**vals)


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(args.seed)


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc


def _write(path, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from exc


def cmd_keygen(args, out):
    prm = _params(args)
    pk, sk = keygen(prm, _rng(args))
    _write(f"{args.out}.pk", serialize(pk))
    _write(f"{args.out}.sk", serialize(sk))
    print(f"public_key={args.out}.pk\nprivate_key={args.out}.sk", file=out)


def cmd_encap(args, out):
    pk = deserialize(_read(args.pk), expect=KIND_PK)
    enc = encapsulate(pk, _rng(args))
    _write(args.out, serialize(enc.ciphertext))
    print(f"ciphertext={args.out}\nshared_key={enc.shared_key.hex()}", file=out)


def cmd_decap(args, out):
    sk = deserialize(_read(args.sk), expect=KIND_SK)
    ct = deserialize(_read(args.input), expect=KIND_CT)
    print(f"shared_key={decapsulate(sk, ct).hex()}", file=out)


def cmd_analyze(args, out):
    prm = _params(args)
    rep = analysis.compute_sec(prm, grid_step=args.grid_step,
                               binomial=args.binomial_variant, isd_rows=args.isd_rows)
    out.write(rep.to_text())
    ok, margin = analysis.mask_margin_check(prm, rep.sec_bits)
    print(f"mask_entropy_bits={analysis.mask_entropy_bits(prm):.2f}", file=out)
    print(f"mask_margin_bits={margin:.2f}\nmask_margin_ok={'yes' if ok else 'no'}", file=out)
    if args.table:
        for row in analysis.complexity_table(prm):
            pub = f" published={row.published}" if row.published else ""
            print(f"{row.name}={row.value:.6g}{pub}", file=out)
    if args.csv:
        grid = np.arange(args.csv_step, 1.0, args.csv_step)
        try:
            analysis.emit_curves_csv(prm, grid, args.csv, binomial=args.binomial_variant,
                                     isd_rows=args.isd_rows)
        except OSError as exc:
            raise CliError(f"cannot write {args.csv}: {exc.strerror}", EXIT_IO) from exc
        print(f"curves_csv={args.csv}", file=out)


def cmd_attack_sim(args, out):
    prm = _params(args)
    rng = _rng(args)
    cfg = attack.AttackConfig(args.max_iterations, know_discard_set=args.know_discard,
                              know_error_weight=args.know_weight,
                              use_tail_equations=not args.no_tail)
    pk, _ = keygen(prm, rng)
    wins = iters = fast = synd = 0
    for _ in range(args.trials):
        if args.weight is None:
            err = sample_error(prm.n, prm.model, rng)
        else:
            err = fixed_weight_error(prm.n, args.weight, rng)
        enc = encapsulate(pk, rng, error=err)
        oracle = attack.KeyCheck.from_encapsulation(enc, err.weight())
        res = attack.isd_attack(pk, enc.ciphertext, cfg, rng, oracle=oracle)
        wins += res.success
        iters += res.iterations_used
        fast += res.fast_rejects
        synd += res.syndrome_rejects
    print(f"trials={args.trials}\nsuccesses={wins}\niterations={iters}", file=out)
    print(f"fast_rejects={fast}\nsyndrome_rejects={synd}", file=out)
    print(f"success_per_iteration={wins / max(iters, 1):.6f}", file=out)
    if args.weight is not None:
        eqs = analysis.isd_equations(prm, "attack")
        if not cfg.use_tail_equations:
            eqs += prm.m
        pred = 2.0 ** -analysis.isd_log_cost(prm.n, args.weight, eqs)
        print(f"predicted_per_iteration={pred:.6f}", file=out)


def cmd_mask_exp(args, out):
    exp = attack.mask_uniqueness_experiment(args.s, args.r)
    out.write(exp.to_text())
    uni = attack.intersection_uniformity_experiment(args.s, args.r)
    print(f"intersection_tallied={uni.tallied}\nintersection_chi_square={uni.chi_square:.6g}", file=out)
    print(f"intersection_critical_999={uni.critical_999:.6g}", file=out)
    for code, count in uni.histogram.items():
        print(f"intersection[{code}]={count}", file=out)


def cmd_exchange(args, out):
    rng = _rng(args)
    if args.role == "serve":
        res = exchange.serve(_params(args), args.listen, rng, timeout=args.timeout,
                             on_listening=lambda a: print(f"listening={a[0]}:{a[1]}", file=out, flush=True))
    else:
        res = exchange.connect(args.connect, rng, timeout=args.timeout, tamper_bit=args.tamper_bit)
    out.write(res.to_text())
    if not res.match:
        raise CliError("fingerprint mismatch", exchange.FingerprintMismatch.exit_code)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mkem", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def seed(p):
        p.add_argument("--seed", type=int, help="RNG seed (omit for OS entropy)")

    p = sub.add_parser("keygen", help="write a key pair")
    _param_flags(p)
    seed(p)
    p.add_argument("--out", default="mkem", help="path prefix for .pk/.sk files")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encap", help="encapsulate against a public key")
    p.add_argument("--pk", required=True)
    p.add_argument("--out", required=True, help="ciphertext path")
    seed(p)
    p.set_defaults(func=cmd_encap)

    p = sub.add_parser("decap", help="recover the shared key")
    p.add_argument("--sk", required=True)
    p.add_argument("--in", dest="input", required=True, help="ciphertext path")
    p.set_defaults(func=cmd_decap)

    p = sub.add_parser("analyze", help="security level and entropy report")
    _param_flags(p)
    p.add_argument("--grid-step", type=float, default=1e-4)
    p.add_argument("--binomial-variant", choices=analysis.BINOMIAL_VARIANTS, default="table")
    p.add_argument("--isd-rows", choices=analysis.ISD_ROW_VARIANTS, default="table")
    p.add_argument("--csv", help="write the two curves to this CSV file")
    p.add_argument("--csv-step", type=float, default=1e-3)
    p.add_argument("--table", action="store_true", help="also print complexity comparison rows")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("attack-sim", help="toy information-set-decoding runs")
    _param_flags(p, ParamSet(9, 0, 2, 0.3))
    seed(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-iterations", type=int, default=1)
    p.add_argument("--weight", type=int, help="plant fixed-weight errors")
    p.add_argument("--know-discard", action="store_true")
    p.add_argument("--know-weight", action="store_true")
    p.add_argument("--no-tail", action="store_true", help="do not use the error-free tail rows")
    p.set_defaults(func=cmd_attack_sim)

    p = sub.add_parser("mask-exp", help="exhaustive mask counting experiment")
    p.add_argument("--s", type=int, default=3)
    p.add_argument("--r", type=int, default=2)
    p.set_defaults(func=cmd_mask_exp)

    p = sub.add_parser("exchange", help="two-party demo over TCP")
    p.add_argument("role", choices=("serve", "connect"))
    _param_flags(p, PRESETS["sec258"])
    seed(p)
    p.add_argument("--listen", default="127.0.0.1:7766")
    p.add_argument("--connect", default="127.0.0.1:7766")
    p.add_argument("--timeout", type=float, default=exchange.DEFAULT_TIMEOUT)
    p.add_argument("--tamper-bit", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_exchange)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except exchange.ExchangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ParamError, FormatError, analysis.InfeasibleParams, attack.AttackRefused) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


run = main
