"""Dataset ingestion, featurization and scaffold x quintile stratified folds."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .chem import circular_fingerprint, parse_smiles, scaffold_key
from .errors import LoadError, ParseError, SplitError
from .rng import substream

log = logging.getLogger(__name__)

_FEATURE_COL = re.compile(r"^f(\d+)$")


@dataclass(frozen=True)
class Row:
    id: str
    y: float
    smiles: Optional[str] = None
    features: Optional[tuple] = None
    scaffold_key: Optional[int] = None


@dataclass
class Dataset:
    rows: list = field(default_factory=list)

    def __post_init__(self):
        lengths = {len(r.features) for r in self.rows if r.features is not None}
        if len(lengths) > 1:
            raise LoadError(f"feature vectors have differing lengths {sorted(lengths)}")
        for r in self.rows:
            if r.features is None and r.smiles is None:
                raise LoadError(f"row {r.id!r} has neither features nor SMILES")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.rows], dtype=np.float64)

    def has_features(self) -> bool:
        return bool(self.rows) and all(r.features is not None for r in self.rows)

    def feature_matrix(self) -> np.ndarray:
        if not self.has_features():
            raise LoadError("dataset has rows without feature vectors; featurize first")
        return np.array([r.features for r in self.rows], dtype=np.float64)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.rows[i] for i in indices])

    def summary(self) -> dict:
        y = self.y
        if y.size == 0:
            return {"count": 0, "y_min": None, "y_max": None}
        return {"count": int(y.size), "y_min": float(y.min()), "y_max": float(y.max())}


def _parse_float(text: str, row: int, fieldname: str) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise LoadError(f"not a number: {text!r}", row, fieldname) from None
    if not np.isfinite(v):
        raise LoadError(f"non-finite value {text!r}", row, fieldname)
    return v


def load_csv(path: str | Path, target: str = "y") -> Dataset:
    """Read a CSV with columns ``y`` plus any of ``smiles``, ``id``, ``scaffold``, ``f0..fM``.

    Row numbers in errors are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from None
    if not text.strip():
        log.warning("%s is empty; returning an empty dataset", path)
        return Dataset([])
    reader = csv.reader(text.splitlines())
    header = [h.strip() for h in next(reader)]
    if target not in header:
        raise LoadError(f"missing target column {target!r}", 1, target)
    col = {name: i for i, name in enumerate(header)}
    fcols = sorted(
        ((int(m.group(1)), i) for i, h in enumerate(header) if (m := _FEATURE_COL.match(h))),
    )
    if fcols and [k for k, _ in fcols] != list(range(len(fcols))):
        raise LoadError("feature columns must be f0..fM without gaps", 1)
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise LoadError(f"expected {len(header)} fields, found {len(raw)}", line_no)
        y_text = raw[col[target]].strip()
        if not y_text:
            raise LoadError("missing target value", line_no, target)
        y = _parse_float(y_text, line_no, target)
        smiles = raw[col["smiles"]].strip() if "smiles" in col else None
        rid = raw[col["id"]].strip() if "id" in col else str(line_no - 1)
        feats = None
        if fcols:
            feats = tuple(_parse_float(raw[i].strip(), line_no, header[i]) for _, i in fcols)
        skey = None
        if "scaffold" in col and raw[col["scaffold"]].strip():
            try:
                skey = int(raw[col["scaffold"]].strip())
            except ValueError:
                raise LoadError("scaffold key must be an integer", line_no, "scaffold") from None
        if feats is None and not smiles:
            raise LoadError("row has neither features nor SMILES", line_no)
        rows.append(Row(rid, y, smiles or None, feats, skey))
    ds = Dataset(rows)
    s = ds.summary()
    log.info("loaded %d rows from %s (y in [%s, %s])", s["count"], path, s["y_min"], s["y_max"])
    return ds


def featurize(dataset: Dataset, radius: int = 3, nbits: int = 1024, strict: bool = False):
    """Attach circular fingerprints and scaffold keys computed from SMILES.

    Returns ``(dataset, failures)``; ``failures`` lists ``(row index, error)``.
    Failed rows are dropped unless ``strict``, in which case the first
    failure is raised.
    """
    out, failures = [], []
    for i, row in enumerate(dataset.rows):
        if row.smiles is None:
            out.append(row)
            continue
        try:
            mol = parse_smiles(row.smiles)
        except ParseError as exc:
            if strict:
                raise LoadError(f"SMILES {row.smiles!r}: {exc}", i + 2, "smiles") from None
            failures.append((i, exc))
            continue
        fp = circular_fingerprint(mol, radius, nbits)
        key = scaffold_key(mol) if row.scaffold_key is None else row.scaffold_key
        out.append(replace(row, features=tuple(float(b) for b in fp.bits), scaffold_key=key))
    return Dataset(out), failures


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: tuple  # fold index per row
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def sizes(self) -> list:
        return [int(np.sum(np.asarray(self.assignments) == f)) for f in range(self.k)]


def _group_keys(dataset: Dataset) -> list:
    keys = []
    for i, row in enumerate(dataset.rows):
        if row.scaffold_key is not None:
            keys.append(("s", row.scaffold_key))
        elif row.smiles is not None:
            try:
                keys.append(("s", scaffold_key(parse_smiles(row.smiles))))
            except ParseError:
                keys.append(("row", i))
        else:
            keys.append(("row", i))
    return keys


def stratified_kfold(dataset: Dataset, k: int = 5, seed: int = 0) -> FoldSplit:
    """Scaffold-grouped folds balanced over quintiles of group-mean y.

    Rows sharing a scaffold key form one group; rows without any scaffold
    information are singleton groups.  Groups are binned into quintiles of
    their mean target.  Within each quintile, groups go largest first to the
    fold holding the fewest rows of that quintile (then fewest overall);
    remaining ties are broken by the seeded ``tie-break`` stream.
    """
    n = len(dataset)
    if n == 0:
        raise SplitError("cannot split an empty dataset")
    keys = _group_keys(dataset)
    groups: dict = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    if k < 2 or k > len(groups):
        raise SplitError(f"k={k} folds requested but only {len(groups)} scaffold groups exist")
    rng = substream(seed, "tie-break")
    y = dataset.y
    members = list(groups.values())
    means = np.array([y[m].mean() for m in members])
    # quintile of each group by rank of its mean (stable, ties by order)
    order = np.argsort(means, kind="stable")
    quint = np.empty(len(members), dtype=int)
    quint[order] = (np.arange(len(members)) * 5) // len(members)

    fill_total = np.zeros(k, dtype=int)
    assign = np.full(n, -1, dtype=int)
    for q in range(5):
        idx = np.flatnonzero(quint == q)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        sizes = np.array([len(members[g]) for g in idx])
        idx = idx[np.argsort(-sizes, kind="stable")]
        fill_q = np.zeros(k, dtype=int)
        for g in idx:
            cands = np.flatnonzero(fill_q == fill_q.min())
            cands = cands[fill_total[cands] == fill_total[cands].min()]
            fold = int(cands[rng.integers(cands.size)]) if cands.size > 1 else int(cands[0])
            size = len(members[g])
            fill_q[fold] += size
            fill_total[fold] += size
            assign[members[g]] = fold
    return FoldSplit(k, tuple(int(a) for a in assign), seed)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write ``id, smiles, y, scaffold, f0..fM`` with repr-exact floats."""
    nf = len(dataset.rows[0].features) if dataset.rows and dataset.rows[0].features is not None else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "smiles", "y", "scaffold"] + [f"f{j}" for j in range(nf)])
        for r in dataset.rows:
            feats = [] if r.features is None else [repr(float(v)) if v % 1 else str(int(v)) for v in r.features]
            w.writerow(
                [r.id, r.smiles or "", repr(r.y), "" if r.scaffold_key is None else r.scaffold_key] + feats
            )
