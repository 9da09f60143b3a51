"""Dataset (JSON Lines) and result (CSV with JSON comment header) files."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import numpy as np

from . import __version__


class DatasetError(ValueError):
    pass


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def frame_record(frame, config_fp: str) -> dict:
    return {
        "seed": frame.seed,
        "truth": frame.truth.tolist(),
        "evidence": np.asarray(frame.evidence, dtype=np.float64).tolist(),
        "snr_db": frame.snr_db,
        "config": config_fp,
    }


def write_dataset(path, frames, config: dict, meta: dict | None = None) -> Path:
    """One JSON line per frame plus a sidecar ``<path>.meta.json`` with the resolved config."""
    path = Path(path)
    fp = fingerprint(config)
    with open(path, "w") as fh:
        for f in frames:
            fh.write(json.dumps(frame_record(f, fp), separators=(",", ":")) + "\n")
    head = {"version": __version__, "config": config, "fingerprint": fp}
    head.update(meta or {})
    meta_path(path).write_text(json.dumps(head, indent=2, sort_keys=True) + "\n")
    return path


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_meta(path) -> dict:
    p = meta_path(path)
    if not p.exists():
        raise DatasetError(f"{path}: missing metadata file {p.name}")
    return json.loads(p.read_text())


def read_dataset(path, Q: int | None = None, L: int | None = None) -> list[dict]:
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["truth"] = np.asarray(rec["truth"], dtype=np.int64)
                rec["evidence"] = np.asarray(rec["evidence"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise DatasetError(f"{path}:{n}: malformed frame record ({exc})") from exc
            S, t = rec["evidence"], rec["truth"]
            if S.ndim != 2 or t.ndim != 2 or t.shape[1] != S.shape[0]:
                raise DatasetError(f"{path}:{n}: truth {t.shape} and evidence {S.shape} disagree")
            if (Q is not None and S.shape[1] != Q) or (L is not None and S.shape[0] != L):
                raise DatasetError(f"{path}:{n}: evidence shape {S.shape} does not match the code")
            if not np.all(np.isfinite(S)):
                raise DatasetError(f"{path}:{n}: non-finite evidence")
            out.append(rec)
    return out


def dump_observations(path, frames) -> None:
    """Raw observations as interleaved little-endian float32 (re, im), frames back to back."""
    with open(path, "wb") as fh:
        for f in frames:
            np.asarray(f.observations, dtype="<c8").tofile(fh)


def load_observations(path, L: int, n_s: int) -> np.ndarray:
    return np.fromfile(path, dtype="<c8").reshape(-1, L, n_s)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def format_results(rows: list[dict], header: dict, columns: list[str] | None = None) -> str:
    cols = list(columns or [])
    for r in rows:
        cols += [k for k in r if k not in cols]
    buf = _io.StringIO()
    head = {"version": __version__}
    head.update(header)
    buf.write("# " + json.dumps(head, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in cols})
    return buf.getvalue()


def write_results(path, rows: list[dict], header: dict, columns: list[str] | None = None) -> None:
    Path(path).write_text(format_results(rows, header, columns))


def read_results(path) -> tuple[dict, list[dict]]:
    """Inverse of write_results: (header, rows as string dicts; every column kept)."""
    lines = Path(path).read_text().splitlines()
    header = {}
    body = []
    for ln in lines:
        if ln.startswith("# "):
            header.update(json.loads(ln[2:]))
        else:
            body.append(ln)
    return header, list(csv.DictReader(body))
