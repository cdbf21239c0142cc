"""Command-line front end.

Exit codes: 0 success, 2 invalid arguments or parameters, 3 image/report
I/O failure, 4 missing or malformed key, 5 numerically degenerate Lyapunov
run.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from . import cipher, dynamics, metrics
from .chaos import C0, DEFAULT_TRANSIENT, Guards, SystemParams
from .images import LOSSLESS, ImageFormatError, output_format, read_image, read_key_file, write_image, write_key_file

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_KEY = 4
EXIT_NUMERIC = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# argument helpers


def _triple(text: str, kind=float):
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    try:
        return tuple(kind(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _pair(text: str):
    parts = text.replace(" ", "").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected i,j, got {text!r}")
    return int(parts[0]), int(parts[1])


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` -> ``count`` evenly spaced values, endpoints included."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    if count > 1 and not stop > start:
        raise argparse.ArgumentTypeError("grid stop must exceed start")
    return np.linspace(start, stop, count)


def _params(args, default: SystemParams) -> SystemParams:
    guards = Guards(eps=args.eps, eps_d=args.eps_d)
    return SystemParams(
        alpha=default.alpha if args.alpha is None else args.alpha,
        r=default.r if args.r is None else args.r,
        mu=default.mu if args.mu is None else args.mu,
        c=args.c,
        guards=guards,
    )


def _seed(args, default):
    seed = list(args.seed or default)
    for i, name in enumerate(("x0", "y0", "z0")):
        v = getattr(args, name)
        if v is not None:
            seed[i] = v
    return tuple(seed)


def _keys_from_args(args, *, required: bool):
    if required and args.raw_key and args.key_file:
        raise CliError("give either --raw-key or --key-file, not both", EXIT_VALIDATION)
    try:
        if args.raw_key:
            return cipher.keys_from_hash(args.raw_key)
        if required:
            if not args.key_file:
                raise CliError("decryption needs --key-file or --raw-key", EXIT_KEY)
            return cipher.keys_from_hash(read_key_file(args.key_file))
    except cipher.KeyFormatError as e:
        raise CliError(f"malformed key: {e}", EXIT_KEY) from None
    except FileNotFoundError:
        raise CliError(f"key file not found: {args.key_file}", EXIT_KEY) from None
    except OSError as e:
        raise CliError(f"cannot read key file: {e}", EXIT_KEY) from None
    return None


def _read(path):
    try:
        return read_image(path)
    except (OSError, ImageFormatError) as e:
        raise CliError(f"cannot read image {path}: {e}", EXIT_IO) from None


def _check_dir(path):
    if path is None or path == "-":
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise CliError(f"output directory does not exist: {parent}", EXIT_IO)


def _check_out(path, fmt):
    _check_dir(path)
    try:
        return output_format(path, fmt)
    except ImageFormatError as e:
        raise CliError(str(e), EXIT_VALIDATION) from None


def _write(path, img, fmt):
    try:
        write_image(path, img, fmt)
    except OSError as e:
        raise CliError(f"cannot write image {path}: {e}", EXIT_IO) from None


@contextlib.contextmanager
def _text_out(path):
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as e:
        raise CliError(f"cannot open {path} for writing: {e}", EXIT_IO) from None
    with fh:
        yield fh


def _dump_json(obj, path):
    with _text_out(path) as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_encrypt(args) -> int:
    fmt = _check_out(args.out, args.format)
    plain = _read(args.inp)
    keys = _keys_from_args(args, required=False)
    derived = keys is None
    if derived:
        keys = cipher.derive_keys(plain)
    enc = cipher.encrypt(plain, keys, args.transient)
    _write(args.out, enc, fmt)
    if derived or args.key_file:
        key_path = args.key_file or f"{args.out}.key"
        try:
            write_key_file(key_path, bytes.fromhex(keys.hash_hex))
        except OSError as e:
            raise CliError(f"cannot write key file {key_path}: {e}", EXIT_IO) from None
        print(f"encrypted {args.inp} -> {args.out}; key written to {key_path}")
    else:
        print(f"encrypted {args.inp} -> {args.out}")
    return EXIT_OK


def cmd_decrypt(args) -> int:
    fmt = _check_out(args.out, args.format)
    keys = _keys_from_args(args, required=True)
    enc = _read(args.inp)
    _write(args.out, cipher.decrypt(enc, keys, args.transient), fmt)
    print(f"decrypted {args.inp} -> {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    kind = args.kind
    _check_dir(args.out)
    _check_dir(args.report)
    keys = _keys_from_args(args, required=True) if (args.key_file or args.raw_key) else None
    if kind == "lyapunov":
        params = _params(args, keys.params if keys else dynamics.HYPERCHAOTIC_PARAMS)
        seed = _seed(args, keys.seed if keys else dynamics.LYAPUNOV_SEED)
        steps = args.steps or dynamics.DEFAULT_LYAPUNOV_STEPS
        if steps < 100:
            raise CliError("lyapunov needs --steps >= 100", EXIT_VALIDATION)
        source = "analytic" if args.jacobian == "analytic" else "finite-difference"
        try:
            spec = dynamics.lyapunov_qr(seed, params, args.transient, steps, source, args.fd_step)
        except dynamics.DegenerateFrameError as e:
            raise CliError(str(e), EXIT_NUMERIC) from None
        lam = ", ".join(f"{v:.6f}" for v in spec.lambdas)
        print(f"lambdas = ({lam}); guard_hits = {spec.guard_hits}; n_steps = {spec.n_steps}")
        if args.report:
            _dump_json(spec.to_json(), args.report)
        return EXIT_OK

    params = _params(args, keys.params if keys else dynamics.DEFAULT_SCAN_PARAMS)
    seed = _seed(args, keys.seed if keys else dynamics.DEFAULT_SCAN_SEED)
    if kind == "bifurcation":
        if args.grid is None:
            raise CliError("bifurcation needs --grid start:stop:count", EXIT_VALIDATION)
        grid = args.grid
        try:
            for v in (grid[0], grid[-1]):
                params.replace(**{args.param: float(v)})
        except ValueError as e:
            raise CliError(f"grid outside the valid range: {e}", EXIT_VALIDATION) from None
        scan = dynamics.bifurcation_scan(args.param, grid, params, seed, args.steps or 1000, args.keep)
        with _text_out(args.out) as fh:
            n = scan.write_csv(fh)
        if args.out:
            print(f"wrote {n} rows to {args.out}")
        return EXIT_OK
    if kind == "sensitivity":
        trace = dynamics.sensitivity_pair(seed, args.delta, params, args.steps or 50)
        with _text_out(args.out) as fh:
            trace.write_csv(fh)
        first = trace.first_exceeding(0.1)
        print(
            f"delta = {args.delta:g}; max |difference| = {trace.max_difference:.6f}; "
            f"first step above 0.1: {first if first is not None else 'none'}",
            file=sys.stderr if not args.out else sys.stdout,
        )
        return EXIT_OK
    if kind == "phase":
        orbit = dynamics.phase_samples(seed, params, args.steps or 10_000, args.transient)
        with _text_out(args.out) as fh:
            dynamics.write_orbit_csv(orbit, fh)
        return EXIT_OK
    raise CliError(f"unknown analysis {kind!r}", EXIT_VALIDATION)


def cmd_evaluate(args) -> int:
    for path in (args.report, args.histogram):
        _check_dir(path)
    if args.out:
        _check_out(args.out, args.format)
    plain = _read(args.inp)
    keys = _keys_from_args(args, required=False)
    if args.cipher:
        enc = _read(args.cipher)
        if enc.shape != plain.shape:
            raise CliError("cipher and plaintext dimensions differ", EXIT_VALIDATION)
    else:
        enc = cipher.encrypt(plain, keys)
    if args.out:
        fmt = _check_out(args.out, args.format)
        _write(args.out, enc, fmt)

    report = metrics.image_metrics(enc, args.samples, args.rng_seed)
    pixel = args.pixel or (0, 0)
    if not (0 <= pixel[0] < plain.shape[0] and 0 <= pixel[1] < plain.shape[1]):
        raise CliError(f"pixel {pixel} outside the image", EXIT_VALIDATION)
    fixed = (keys or cipher.derive_keys(plain)) if args.fixed_key else None
    report.npcr, report.uaci = metrics.differential_test(plain, pixel, args.value, fixed)
    report.extra = {
        "height": int(plain.shape[0]),
        "width": int(plain.shape[1]),
        "correlation_samples": args.samples,
        "rng_seed": args.rng_seed,
        "differential": {
            "pixel": list(pixel),
            "new_value": list(args.value) if args.value else None,
            "key_mode": "fixed" if args.fixed_key else "per-plaintext",
        },
        "key_space": {
            "nominal_bits": metrics.NOMINAL_KEY_SPACE_BITS,
            "derived_bits": metrics.DERIVED_KEY_ENTROPY_BITS,
        },
    }
    if args.histogram:
        with _text_out(args.histogram) as fh:
            report.write_histogram_csv(fh)
    _dump_json(report.to_json(), args.report)
    if args.report:
        ent = ", ".join(f"{k}={v:.4f}" for k, v in report.entropy.items())
        print(f"entropy {ent}; NPCR={report.npcr:.2f}%; UACI={report.uaci:.2f}%")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ils3d", description="3D-ILS hyperchaotic map and image cipher")
    sub = p.add_subparsers(dest="cmd", required=True)

    def keyopts(sp):
        sp.add_argument("--key-file", help="64-hex key file")
        sp.add_argument("--raw-key", metavar="HEX64", help="256-bit key as 64 hex characters")

    def imgopts(sp):
        sp.add_argument("--in", dest="inp", required=True, help="input image")
        sp.add_argument("--out", required=True, help="output image (.png or .ppm)")
        sp.add_argument("--format", choices=sorted(LOSSLESS), help="override output format")
        sp.add_argument("--transient", type=int, default=DEFAULT_TRANSIENT)

    enc = sub.add_parser("encrypt", help="encrypt an RGB image")
    imgopts(enc)
    keyopts(enc)
    enc.set_defaults(func=cmd_encrypt)

    dec = sub.add_parser("decrypt", help="decrypt a cipher image")
    imgopts(dec)
    keyopts(dec)
    dec.set_defaults(func=cmd_decrypt)

    an = sub.add_parser("analyze", help="dynamics analyses of the map")
    an.add_argument("kind", choices=("lyapunov", "bifurcation", "sensitivity", "phase"))
    an.add_argument("--alpha", type=float)
    an.add_argument("--r", type=float)
    an.add_argument("--mu", type=float)
    an.add_argument("--c", type=float, default=C0)
    an.add_argument("--eps", type=float, default=1e-12)
    an.add_argument("--eps-d", type=float, default=1e-12)
    an.add_argument("--seed", type=_triple, help="x,y,z")
    an.add_argument("--x0", type=float, help="override one seed coordinate")
    an.add_argument("--y0", type=float)
    an.add_argument("--z0", type=float)
    an.add_argument("--steps", type=int, help="iterations (per kind)")
    an.add_argument("--transient", type=int, default=DEFAULT_TRANSIENT)
    an.add_argument("--grid", type=parse_grid, help="start:stop:count")
    an.add_argument("--param", choices=dynamics.SWEEPABLE, default="alpha")
    an.add_argument("--keep", type=int, default=200)
    an.add_argument("--delta", type=float, default=1e-16)
    an.add_argument("--jacobian", choices=("fd", "analytic"), default="fd")
    an.add_argument("--fd-step", type=float, default=dynamics.DEFAULT_FD_STEP)
    keyopts(an)  # parameters and seed from a cipher key
    an.add_argument("--report", help="JSON spectrum report (lyapunov)")
    an.add_argument("--out", help="CSV output (default stdout)")
    an.set_defaults(func=cmd_analyze)

    ev = sub.add_parser("evaluate", help="statistical security report")
    ev.add_argument("--in", dest="inp", required=True, help="plaintext image")
    ev.add_argument("--cipher", help="evaluate this ciphertext instead of encrypting")
    ev.add_argument("--out", help="also write the ciphertext here")
    ev.add_argument("--format", choices=sorted(LOSSLESS))
    keyopts(ev)
    ev.add_argument("--fixed-key", action="store_true", help="differential test under one key")
    ev.add_argument("--samples", type=int, default=metrics.DEFAULT_CORRELATION_SAMPLES)
    ev.add_argument("--rng-seed", type=int, default=0)
    ev.add_argument("--pixel", type=_pair, help="i,j of the modified pixel")
    ev.add_argument("--value", type=lambda s: _triple(s, int), help="r,g,b of the modified pixel")
    ev.add_argument("--report", help="JSON report path (default stdout)")
    ev.add_argument("--histogram", help="histogram CSV path")
    ev.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"ils3d: error: {e}", file=sys.stderr)
        return e.code
    except ValueError as e:
        print(f"ils3d: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
