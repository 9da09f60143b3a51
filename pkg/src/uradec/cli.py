"""Command-line front end: simulate, decode, sweep, bench, protocol.

Exit codes: 0 success, 2 usage, 3 data/config validation, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .amp import AmpConfig, detect_frame
from .bp import TopJBudgetError
from .decoders import DECODERS, DecoderSpec, make_decoder
from .io import (DatasetError, dump_observations, format_results, read_dataset, read_meta,
                 write_dataset, write_results)
from .ldpc import ParityFileError, load_parity_file, save_parity_file
from .metrics import ser_cer
from .presets import SCALES, build_code, dataset_dictionaries, get_scale
from .protocol import ProtocolConfig, ProtocolConfigError, frame_simulator, run_protocol
from .sim import FrameConfig, generate_frame, frame_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
WORKERS_ENV = "URADEC_WORKERS"

DEFAULTS = {
    "scale": "tiny", "Q": None, "L": None, "P": None, "col_weight": 3, "code_seed": None,
    "K": 2, "eb_db": 10.0, "n_s": 24, "noise_var": 1.0,
    "amp_iters": 20, "rho_bg": None, "sigma_u2": None,
    "frames": 100, "seed": 0,
    "decoder": "sic-bp", "backend": "wht", "bp_iters": 50, "sic_cancel": "floor", "J": 2,
    "T": None, "tau_max": 1.0, "tau_min": 0.5, "denoiser_seed": 0,
}


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config

def resolve_config(args, keys) -> dict:
    """Defaults, then the JSON document from --config, then explicit flags."""
    cfg = {k: DEFAULTS.get(k) for k in keys}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(doc) - set(keys))
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        cfg.update(doc)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def problem_dims(cfg) -> dict:
    """Expand the scale preset unless explicit (Q, L, P) are all given."""
    explicit = [cfg.get(k) for k in ("Q", "L", "P")]
    if all(v is not None for v in explicit):
        Q, L, P = (int(v) for v in explicit)
        T = None
    elif any(v is not None for v in explicit):
        raise ConfigError("explicit dimensions need all of Q, L and P")
    else:
        try:
            s = get_scale(cfg["scale"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        Q, L, P, T = s.Q, s.L, s.P, s.T
    if not 0 < P < L:
        raise ConfigError(f"need 0 < P < L, got P={P}, L={L}")
    m = Q.bit_length() - 1
    return {"Q": Q, "L": L, "P": P, "payload_bits": m * (L - P), "scale_T": T}


def frame_config(cfg, dims) -> FrameConfig:
    return FrameConfig(Q=dims["Q"], L=dims["L"], K=int(cfg["K"]), n_s=int(cfg["n_s"]),
                       eb_db=float(cfg["eb_db"]), noise_var=float(cfg["noise_var"]),
                       payload_bits=dims["payload_bits"])


def amp_config(cfg) -> AmpConfig:
    return AmpConfig(iters=int(cfg["amp_iters"]), rho_bg=cfg["rho_bg"], sigma_u2=cfg["sigma_u2"])


def decoder_spec(cfg, name=None, opt=None) -> DecoderSpec:
    name = name or cfg["decoder"]
    kw = dict(backend=cfg["backend"], max_iters=int(cfg["bp_iters"]), sic_cancel=cfg["sic_cancel"],
              J=int(cfg["J"]), T=cfg["T"], tau_max=float(cfg["tau_max"]),
              tau_min=float(cfg["tau_min"]), denoiser_seed=int(cfg["denoiser_seed"]))
    if opt is not None:
        if name == "sic-bp":
            kw["backend"] = opt
        elif name == "topj":
            kw["J"] = int(opt)
        else:
            raise UsageError(f"decoder {name} takes no ':' option")
    try:
        return DecoderSpec(name, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_decoder_list(text: str, cfg) -> list[tuple[str, DecoderSpec]]:
    out = []
    for item in [x.strip() for x in text.split(",") if x.strip()]:
        name, _, opt = item.partition(":")
        out.append((item, decoder_spec(cfg, name, opt or None)))
    return out


def worker_count(args) -> int:
    n = getattr(args, "workers", None)
    if n is None:
        n = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(n))


# ---------------------------------------------------------------- frame generation

_STATE = {}


def _init_state(state):
    _STATE.clear()
    _STATE.update(state)


def _make_frame(index):
    s = _STATE
    rng = frame_rng(s["seed"], index)
    f = generate_frame(s["fc"], s["H"], s["gen"], rng, dictionaries=s["dicts"],
                       seed=[s["seed"], index])
    detect_frame(f, s["amp"])
    return f


def _pool_map(fn, items, state, workers):
    # results come back in input order whatever the completion order
    if workers <= 1:
        _init_state(state)
        return [fn(i) for i in items]
    with ProcessPoolExecutor(workers, initializer=_init_state, initargs=(state,)) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def simulate_frames(fc: FrameConfig, H, gen, dicts, amp: AmpConfig, seed: int, n: int, workers: int):
    state = {"fc": fc, "H": H, "gen": gen, "dicts": dicts, "amp": amp.resolved(fc), "seed": seed}
    return _pool_map(_make_frame, list(range(n)), state, workers)


def _setup(cfg):
    dims = problem_dims(cfg)
    seed = int(cfg["seed"])
    code_seed = seed if cfg["code_seed"] is None else int(cfg["code_seed"])
    H, gen = build_code(dims["Q"], dims["L"], dims["P"], int(cfg["col_weight"]), code_seed)
    fc = frame_config(cfg, dims)
    dicts = dataset_dictionaries(fc.Q, fc.L, fc.n_s, seed)
    return dims, H, gen, fc, dicts


SIM_KEYS = ["scale", "Q", "L", "P", "col_weight", "code_seed", "K", "eb_db", "n_s", "noise_var",
            "amp_iters", "rho_bg", "sigma_u2", "frames", "seed"]
DEC_KEYS = ["decoder", "backend", "bp_iters", "sic_cancel", "J", "T", "tau_max", "tau_min",
            "denoiser_seed"]


# ---------------------------------------------------------------- decode loop

def decode_frames(spec: DecoderSpec, H, K, items, scale_T=None):
    """items: (truth, evidence) pairs. Returns metrics row fields."""
    dec = make_decoder(spec, H, K, scale_T)
    sers, cers, times, iters, conv = [], [], [], [], []
    for truth, S in items:
        t0 = time.perf_counter()
        grid, st = dec(S, truth)
        times.append(time.perf_counter() - t0)
        s, c = ser_cer(truth, grid)
        sers.append(s)
        cers.append(c)
        if "iters" in st:
            iters.append(st["iters"])
            conv.append(st["converged"])
    row = {"samples": len(items), "ser": float(np.mean(sers)) if sers else 0.0,
           "cer": float(np.mean(cers)) if cers else 0.0,
           "ms_per_sample": 1e3 * float(np.mean(times)) if times else 0.0}
    if iters:
        row["mean_iters"] = float(np.mean(iters))
        row["converged_frac"] = float(np.mean(conv))
    return row


RESULT_COLUMNS = ["decoder", "scale", "Q", "L", "P", "K", "eb_db", "snr_db", "samples", "ser", "cer",
                  "ms_per_sample", "mean_iters", "converged_frac", "status"]


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = resolve_config(args, SIM_KEYS)
    dims, H, gen, fc, dicts = _setup(cfg)
    frames = simulate_frames(fc, H, gen, dicts, amp_config(cfg), int(cfg["seed"]),
                             int(cfg["frames"]), worker_count(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    code_path = out.with_name(out.stem + ".parity.txt")
    save_parity_file(H, code_path)
    resolved = dict(cfg, **{k: v for k, v in dims.items() if k != "scale_T"})
    meta = {"seed": int(cfg["seed"]), "code_file": code_path.name, "snr_db": fc.snr_db,
            "dictionaries": "per-dataset"}
    write_dataset(out, frames, resolved, meta)
    if args.dump_observations:
        dump_observations(args.dump_observations, frames)
    print(f"wrote {len(frames)} frames to {out} (code: {code_path.name}, snr {fc.snr_db:.2f} dB)")
    return EXIT_OK


def _load_dataset(path, code=None):
    meta = read_meta(path)
    code_path = Path(code) if code else Path(path).with_name(meta["code_file"])
    H = load_parity_file(code_path)
    recs = read_dataset(path, H.Q, H.L)
    return meta, H, recs


def cmd_decode(args) -> int:
    cfg = resolve_config(args, DEC_KEYS)
    spec = decoder_spec(cfg)
    meta, H, recs = _load_dataset(args.dataset, args.code)
    dcfg = meta["config"]
    Ks = {r["truth"].shape[0] for r in recs}
    if len(Ks) > 1:
        raise DatasetError(f"mixed K values {sorted(Ks)} in one dataset")
    K = Ks.pop() if Ks else int(dcfg["K"])
    scale_T = SCALES[dcfg["scale"]].T if dcfg.get("scale") in SCALES else None
    try:
        make_decoder(spec, H, K, scale_T)  # validation before any decode
    except TopJBudgetError as exc:
        print(f"DNF: {exc}", file=sys.stderr)
        return EXIT_DATA
    row = {"decoder": spec.name, "scale": dcfg.get("scale"), "Q": H.Q, "L": H.L, "P": H.P, "K": K,
           "eb_db": dcfg.get("eb_db"), "snr_db": meta.get("snr_db"), "status": "ok"}
    row.update(decode_frames(spec, H, K, [(r["truth"], r["evidence"]) for r in recs], scale_T))
    header = {"command": "decode", "dataset": str(args.dataset), "dataset_config": dcfg,
              "seed": meta.get("seed"), "decoder": spec.to_dict(), "kernels": kernels.NAME}
    _emit(args.out, [row], header)
    return EXIT_OK


def _emit(out, rows, header, columns=RESULT_COLUMNS):
    if out:
        write_results(out, rows, header, columns)
    else:
        sys.stdout.write(format_results(rows, header, columns))


def _split(text, cast=str):
    return [cast(x.strip()) for x in str(text).split(",") if x.strip()]


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, SIM_KEYS + DEC_KEYS)
    scales = _split(args.scales) if args.scales else []
    decs = parse_decoder_list(args.decoders, cfg) if args.decoders else []
    ebs = _split(args.eb_grid, float) if args.eb_grid else [float(cfg["eb_db"])]
    ks = _split(args.k_grid, int) if args.k_grid else [int(cfg["K"])]
    if not scales or not decs or not ebs or not ks:
        raise UsageError("sweep needs a non-empty grid (--scales and --decoders)")
    for s in scales:
        if s not in SCALES:
            raise UsageError(f"unknown scale {s!r}; choose from {sorted(SCALES)}")
    rows = []
    workers = worker_count(args)
    for scale in scales:
        for K in ks:
            for eb in ebs:
                cell = dict(cfg, scale=scale, K=K, eb_db=eb, Q=None, L=None, P=None)
                dims, H, gen, fc, dicts = _setup(cell)
                frames = simulate_frames(fc, H, gen, dicts, amp_config(cell), int(cell["seed"]),
                                         int(cell["frames"]), workers)
                items = [(f.truth, f.evidence) for f in frames]
                for label, spec in decs:
                    row = {"decoder": label, "scale": scale, "Q": H.Q, "L": H.L, "P": H.P, "K": K,
                           "eb_db": eb, "snr_db": fc.snr_db}
                    try:
                        row.update(decode_frames(spec, H, K, items, dims["scale_T"]))
                        row["status"] = "ok"
                    except TopJBudgetError as exc:
                        row.update(samples=0, status=f"DNF ({exc.candidates:.3g} candidates)")
                    except Exception as exc:  # recorded per cell, the sweep goes on
                        row.update(samples=0, status=f"error: {exc}")
                    rows.append(row)
    header = {"command": "sweep", "config": cfg, "seed": int(cfg["seed"]), "kernels": kernels.NAME,
              "grid": {"scales": scales, "decoders": [d for d, _ in decs], "eb_db": ebs, "K": ks}}
    _emit(args.out, rows, header)
    return EXIT_OK


def environment() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "platform": platform.platform(), "machine": platform.machine(),
            "cpus": os.cpu_count(), "kernels": kernels.NAME, "version": __version__}


def cmd_bench(args) -> int:
    cfg = resolve_config(args, SIM_KEYS + DEC_KEYS)
    if args.dataset:
        meta, H, recs = _load_dataset(args.dataset, args.code)
        items = [(r["truth"], r["evidence"]) for r in recs]
        K = items[0][0].shape[0] if items else int(meta["config"]["K"])
        scale_T = SCALES[meta["config"]["scale"]].T if meta["config"].get("scale") in SCALES else None
    else:
        dims, H, gen, fc, dicts = _setup(cfg)
        frames = simulate_frames(fc, H, gen, dicts, amp_config(cfg), int(cfg["seed"]),
                                 int(cfg["frames"]), worker_count(args))
        items = [(f.truth, f.evidence) for f in frames]
        K, scale_T = fc.K, dims["scale_T"]
    if not items:
        raise DatasetError("bench needs at least one frame")
    decs = parse_decoder_list(args.decoders, cfg)
    report = {"environment": environment(), "samples": len(items), "repeats": args.repeats,
              "warmup": args.warmup, "low_confidence": len(items) * args.repeats < 10, "decoders": {}}
    for label, spec in decs:
        try:
            dec = make_decoder(spec, H, K, scale_T)
        except TopJBudgetError as exc:
            report["decoders"][label] = {"status": f"DNF: {exc}"}
            continue
        for truth, S in items[: args.warmup]:
            dec(S, truth)
        times, outputs = [], []
        for _ in range(args.repeats):
            grids = []
            for truth, S in items:
                t0 = time.perf_counter()
                g, _ = dec(S, truth)
                times.append(1e3 * (time.perf_counter() - t0))
                grids.append(g)
            outputs.append(np.stack(grids))
        det = all(np.array_equal(outputs[0], o) for o in outputs[1:])
        report["decoders"][label] = {"median_ms": statistics.median(times),
                                     "mean_ms": statistics.fmean(times),
                                     "deterministic": det, "status": "ok"}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_protocol(args) -> int:
    cfg = resolve_config(args, SIM_KEYS + DEC_KEYS)
    dims, H, gen, fc, dicts = _setup(cfg)
    oracle = cfg["decoder"] == "oracle"
    rows = []
    rng = np.random.default_rng([int(cfg["seed"]), 7])
    for k_tot in _split(args.k_tot, int):
        pc = ProtocolConfig(k_tot, args.zeta, args.k_max)
        if oracle:
            bank = {k: (lambda fr: fr.truth) for k in range(1, pc.k_max + 1)}
        else:
            spec = decoder_spec(cfg)
            bank = {}
            for k in range(1, min(pc.k_max, k_tot) + 1):
                dec = make_decoder(spec, H, k, dims["scale_T"] if k == 2 else None)
                bank[k] = (lambda d: (lambda fr: d(fr.evidence, fr.truth)[0]))(dec)
        sim = frame_simulator(fc, H, gen, dicts, amp_config(cfg), detect=not oracle)
        ser, cer, ovf, recs = run_protocol(pc, fc.L, sim, bank, rng, frames=int(cfg["frames"]))
        rows.append({"k_tot": k_tot, "zeta": pc.bins, "k_max": pc.k_max, "frames": len(recs),
                     "ser": ser, "cer": cer,
                     "overflow_rate": ovf / (k_tot * len(recs)) if k_tot and recs else 0.0})
    header = {"command": "protocol", "config": cfg, "seed": int(cfg["seed"]), "kernels": kernels.NAME}
    cols = ["k_tot", "zeta", "k_max", "frames", "ser", "cer", "overflow_rate"]
    _emit(args.out, rows, header, cols)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _sim_flags(p):
    p.add_argument("--config", help="JSON config document; flags override its fields")
    p.add_argument("--scale", help=f"preset: {', '.join(SCALES)}")
    p.add_argument("--Q", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--P", type=int)
    p.add_argument("--col-weight", dest="col_weight", type=int)
    p.add_argument("--code-seed", dest="code_seed", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--eb-db", dest="eb_db", type=float)
    p.add_argument("--n-s", dest="n_s", type=int)
    p.add_argument("--noise-var", dest="noise_var", type=float)
    p.add_argument("--amp-iters", dest="amp_iters", type=int)
    p.add_argument("--rho-bg", dest="rho_bg", type=float)
    p.add_argument("--sigma-u2", dest="sigma_u2", type=float)
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")


def _dec_flags(p, with_config=True):
    if with_config:
        p.add_argument("--config", help="JSON config document; flags override its fields")
    p.add_argument("--decoder", help=f"one of {', '.join(DECODERS)}")
    p.add_argument("--backend", choices=["direct", "wht"])
    p.add_argument("--bp-iters", dest="bp_iters", type=int)
    p.add_argument("--sic-cancel", dest="sic_cancel", choices=["floor", "retry"])
    p.add_argument("--J", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--tau-min", dest="tau_min", type=float)
    p.add_argument("--denoiser-seed", dest="denoiser_seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uradec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a parity file and a JSON Lines dataset")
    _sim_flags(p)
    p.add_argument("--out", required=True, help="dataset path (.jsonl)")
    p.add_argument("--dump-observations", help="also write raw observations (<complex64) here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="run one decoder over a dataset")
    _dec_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--code", help="parity file (default: the one named in the dataset metadata)")
    p.add_argument("--out", help="results CSV (default: print rows)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="scale x decoder x Eb x K grid")
    _sim_flags(p)
    _dec_flags(p, with_config=False)
    p.add_argument("--scales", help="comma list of presets")
    p.add_argument("--decoders", help="comma list, e.g. sic-bp:wht,topj:2")
    p.add_argument("--eb-grid", dest="eb_grid", help="comma list of Eb values in dB")
    p.add_argument("--k-grid", dest="k_grid", help="comma list of K values")
    p.add_argument("--out", help="results CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="decoder timing report")
    _sim_flags(p)
    _dec_flags(p, with_config=False)
    p.add_argument("--dataset", help="dataset to time on (default: simulate --frames fresh frames)")
    p.add_argument("--code")
    p.add_argument("--decoders", default="sic-bp:direct,sic-bp:wht,topj:2")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("protocol", help="stochastic-binning sweep over total user counts")
    _sim_flags(p)
    _dec_flags(p, with_config=False)
    p.add_argument("--k-tot", dest="k_tot", required=True, help="comma list of total user counts")
    p.add_argument("--zeta", type=int, help="number of bins (default ceil(k_tot/4))")
    p.add_argument("--k-max", dest="k_max", type=int, default=8)
    p.add_argument("--out", help="results CSV")
    p.set_defaults(func=cmd_protocol)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # usage errors exit with 2 here
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TopJBudgetError as exc:
        print(f"DNF: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DatasetError, ParityFileError, ProtocolConfigError, FileNotFoundError,
            KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
