"""CSV ingestion and persistence of chains, summaries and run manifests.

Data files carry a header row with a required ``y`` column, zero-inflation
covariates prefixed ``x_``, Beta-mean covariates prefixed ``g_`` and
optional planar coordinates ``s1``, ``s2``.  An intercept column is
prepended to both designs.  Every file is written to a temporary name and
renamed into place.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import platform
import tempfile
import time
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .mcmc import ChainOutput, PosteriorSummary, SamplerConfig, config_dict
from .model import Dataset, ModelKind

COORD_COLS = ("s1", "s2")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, _csv_text(header, rows))


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------


def read_table(path):
    """Header and string rows of a CSV file."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [r for r in reader if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if not header:
        raise IngestionError(f"{path}: missing header row")
    return [h.strip() for h in header], rows


def read_dataset(path, standardize: bool = False, require_y: bool = True) -> Dataset:
    """Load a data CSV into a :class:`Dataset`.

    Parameters
    ----------
    standardize : bool
        Center and scale every covariate column (not the intercepts).
    require_y : bool
        New-site files for prediction may omit ``y``.

    Raises
    ------
    IngestionError
        On schema violations; the message lists offending row numbers
        (1-based, header excluded).
    """
    header, rows = read_table(path)
    if require_y and "y" not in header:
        raise IngestionError(f"{path}: required column 'y' not found")
    if len(set(header)) != len(header):
        raise IngestionError(f"{path}: duplicate column names")
    bad_width = [i + 1 for i, r in enumerate(rows) if len(r) != len(header)]
    if bad_width:
        raise IngestionError(f"{path}: wrong number of fields in rows {_rowlist(bad_width)}")
    values = np.full((len(rows), len(header)), np.nan)
    bad = []
    for i, r in enumerate(rows):
        try:
            values[i] = [float(c) for c in r]
        except ValueError:
            bad.append(i + 1)
    if bad:
        raise IngestionError(f"{path}: non-numeric entries in rows {_rowlist(bad)}")
    nonfinite = np.flatnonzero(~np.all(np.isfinite(values), axis=1)) + 1
    if nonfinite.size:
        raise IngestionError(f"{path}: missing or non-finite values in rows {_rowlist(nonfinite)}")
    col = {h: k for k, h in enumerate(header)}
    n = len(rows)
    if n == 0:
        raise IngestionError(f"{path}: no data rows")
    if "y" in col:
        y = values[:, col["y"]]
        out = np.flatnonzero(~((y >= 0) & (y < 1))) + 1
        if out.size:
            raise IngestionError(f"{path}: responses must lie in [0, 1); offending rows {_rowlist(out)}")
    else:
        y = np.full(n, 0.5)
    x_cols = [h for h in header if h.startswith("x_")]
    g_cols = [h for h in header if h.startswith("g_")]
    X = values[:, [col[h] for h in x_cols]] if x_cols else np.empty((n, 0))
    G = values[:, [col[h] for h in g_cols]] if g_cols else np.empty((n, 0))
    if standardize:
        X = _standardize(X, x_cols, path)
        G = _standardize(G, g_cols, path)
    X = np.column_stack([np.ones(n), X])
    G = np.column_stack([np.ones(n), G])
    coords = None
    present = [c for c in COORD_COLS if c in col]
    if len(present) == 1:
        raise IngestionError(f"{path}: coordinates need both s1 and s2")
    if present:
        coords = values[:, [col["s1"], col["s2"]]]
    return Dataset(y, X, G, coords, ("intercept", *x_cols), ("intercept", *g_cols))


def _standardize(A, names, path):
    if A.shape[1] == 0:
        return A
    sd = A.std(axis=0, ddof=1) if A.shape[0] > 1 else np.zeros(A.shape[1])
    flat = [names[k] for k in np.flatnonzero(~(sd > 0))]
    if flat:
        raise IngestionError(f"{path}: cannot standardize constant columns {flat}")
    return (A - A.mean(axis=0)) / sd


def _rowlist(rows, limit=20):
    rows = [int(r) for r in rows]
    s = ", ".join(map(str, rows[:limit]))
    return s + (f" (+{len(rows) - limit} more)" if len(rows) > limit else "")


def write_dataset(path, data: Dataset) -> Path:
    header = ["y"] + list(data.x_names[1:]) + list(data.g_names[1:])
    cols = [data.y[:, None], data.X[:, 1:], data.G[:, 1:]]
    if data.coords is not None:
        header += list(COORD_COLS)
        cols.append(data.coords)
    return write_csv(path, header, np.hstack(cols).tolist())


def write_truth(path, train, test) -> Path:
    """Truth labels of a simulated train/test pair, one row per site."""
    from .simgen import SOURCE_NAMES

    rows = []
    for split, lab in (("train", train), ("test", test)):
        eff = lab.effects if lab.effects is not None else np.full(lab.source.size, np.nan)
        for i in range(lab.source.size):
            rows.append((split, SOURCE_NAMES[lab.source[i]], lab.w[i], lab.pi[i], lab.mu[i], eff[i]))
    return write_csv(path, ["split", "source", "w", "pi", "mu", "effect"], rows)


def read_truth_sources(path, split: str = "test") -> np.ndarray:
    """Source labels of one split from a truth file."""
    header, rows = read_table(path)
    if "source" not in header:
        raise IngestionError(f"{path}: truth file needs a 'source' column")
    src = np.array([r[header.index("source")] for r in rows])
    if "split" in header:
        src = src[np.array([r[header.index("split")] for r in rows]) == split]
    return src


# --------------------------------------------------------------------------
# chains and reports
# --------------------------------------------------------------------------


def write_chain(outdir, chain: ChainOutput) -> list:
    outdir = Path(outdir)
    p1 = write_csv(outdir / "chain.csv", chain.columns, chain.samples.tolist())
    meta = dict(
        kind=ModelKind(chain.kind).value, columns=chain.columns, seed=int(chain.seed),
        config=config_dict(chain.config), x_names=list(chain.x_names), g_names=list(chain.g_names),
        train_coords=None if chain.train_coords is None else chain.train_coords.tolist(),
        scales=chain.scales, acceptance=chain.acceptance, elapsed=chain.elapsed,
        zero_index=chain.zero_index.tolist(),
    )
    p2 = atomic_write_text(outdir / "chain_meta.json", json.dumps(_jsonable(meta), indent=1))
    return [p1, p2]


def read_chain(path) -> ChainOutput:
    """Reload a chain from its directory (or from ``chain.csv``)."""
    path = Path(path)
    d = path if path.is_dir() else path.parent
    header, rows = read_table(d / "chain.csv")
    try:
        meta = json.loads((d / "chain_meta.json").read_text())
    except (OSError, ValueError) as exc:
        raise IngestionError(f"{d}: cannot read chain_meta.json: {exc}") from exc
    try:
        samples = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise IngestionError(f"{d / 'chain.csv'}: malformed chain values") from exc
    cfg = meta.get("config", {})
    config = SamplerConfig(**{k: v for k, v in cfg.items() if k in SamplerConfig.__dataclass_fields__})
    coords = meta.get("train_coords")
    return ChainOutput(
        kind=ModelKind(meta["kind"]), columns=header, samples=samples,
        z_draws=np.zeros((samples.shape[0], 0), dtype=np.int8),
        zero_index=np.asarray(meta.get("zero_index", []), dtype=int),
        acceptance=meta.get("acceptance", {}), seed=meta.get("seed", 0), config=config,
        x_names=tuple(meta.get("x_names", ())), g_names=tuple(meta.get("g_names", ())),
        train_coords=None if coords is None else np.asarray(coords, dtype=float),
        scales=meta.get("scales", {}), elapsed=meta.get("elapsed", 0.0),
    )


def write_summary(path, summary: PosteriorSummary, chain: ChainOutput | None = None) -> Path:
    labels = {}
    if chain is not None:
        labels.update({f"gamma_{k}": n for k, n in enumerate(chain.x_names)})
        labels.update({f"delta_{k}": n for k, n in enumerate(chain.g_names)})
    rows = [(name, labels.get(name, ""), m, lo, hi) for name, m, lo, hi in summary.rows()]
    return write_csv(path, ["parameter", "covariate", "mean", "lower95", "upper95"], rows)


def write_acceptance(path, chain: ChainOutput) -> Path:
    rows = [(k, v, json.dumps(chain.scales.get(k))) for k, v in chain.acceptance.items()]
    return write_csv(path, ["block", "acceptance", "scale"], rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if not callable(v)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(outdir, command: str, config: dict, seed, inputs=(), outputs=(), started=None) -> Path:
    """Record what produced a set of outputs, with SHA-256 hashes of inputs and outputs."""
    outdir = Path(outdir)
    manifest = dict(
        command=command, config=_jsonable(config), seed=seed,
        inputs={str(p): file_hash(p) for p in inputs if Path(p).is_file()},
        outputs={str(p): file_hash(p) for p in outputs if Path(p).is_file()},
        wall_clock_seconds=None if started is None else time.time() - started,
        python=platform.python_version(),
    )
    return atomic_write_text(outdir / "manifest.json", json.dumps(manifest, indent=1))
