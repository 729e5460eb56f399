"""File formats: images, score CSVs, supervisor models and run configs.

Score CSV layout (one row per expert per trial)::

    # symfuse-scores v1
    expert_id,shot_id,claim_id,score,quality,claim_quality,label
    A,u1-g0,u1,0.8731,1.2,2,genuine

Supervisor model layout::

    symfuse-model v1
    experts=2
    expert.1.id=A
    expert.1.MC=0.15
    ...
"""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, PanelError
from .fusion import Q_FLOOR, ALPHA_FLOOR, SupervisorSide, TrainedSupervisor
from .quality import QualityConfig, QualityReport
from .synth import ScorePanel

__all__ = [
    "load_image",
    "read_pgm",
    "write_pgm",
    "ScoreRecord",
    "read_scores",
    "write_scores",
    "records_to_panel",
    "panel_to_records",
    "write_model",
    "read_model",
    "RunConfig",
    "read_config",
    "write_quality_map",
    "format_float",
]

SCORES_HEADER = "# symfuse-scores v1"
SCORE_COLUMNS = ("expert_id", "shot_id", "claim_id", "score", "quality", "claim_quality", "label")
MODEL_HEADER = "symfuse-model v1"
MODEL_KEYS = ("MC", "VC", "alphaC", "MI", "VI", "alphaI")
LABELS = {"genuine": 1, "impostor": 0, "unknown": -1}
LABEL_NAMES = {v: k for k, v in LABELS.items()}


def format_float(x: float) -> str:
    """Shortest decimal that reads back to the same double."""
    return repr(float(x))


# -- images -----------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read `count` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(data: bytes) -> np.ndarray:
    """Decode an 8-bit P2 or P5 PGM into intensities in [0, 1]."""
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError("not a grayscale PGM (expected P2 or P5)")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("malformed PGM header") from None
    if w < 1 or h < 1:
        raise FormatError(f"bad PGM dimensions {w}x{h}")
    if maxval > 255:
        raise FormatError(f"unsupported PGM depth: maxval {maxval} (only 8-bit)")
    if maxval < 1:
        raise FormatError("bad PGM maxval")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        raw = data[pos:pos + w * h]
        if len(raw) < w * h:
            raise FormatError("truncated PGM raster")
        pix = np.frombuffer(raw, dtype=np.uint8).reshape(h, w)
    else:
        try:
            vals, _ = _pgm_tokens(data, w * h, pos)
        except FormatError:
            raise FormatError("truncated PGM raster") from None
        pix = np.array([int(v) for v in vals], dtype=np.int64).reshape(h, w)
        if pix.min() < 0 or pix.max() > maxval:
            raise FormatError("PGM sample out of range")
    if maxval != 255 and pix.max() > maxval:
        raise FormatError("PGM sample out of range")
    return pix.astype(np.float64) / 255.0


def write_pgm(path, img, binary: bool = True) -> None:
    """Write intensities in [0, 1] as an 8-bit PGM."""
    a = np.asarray(img, dtype=np.float64)
    pix = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    h, w = pix.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pix.tobytes())
    else:
        lines = [" ".join(str(v) for v in row) for row in pix]
        Path(path).write_text(f"P2\n{w} {h}\n255\n" + "\n".join(lines) + "\n")


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM or PNG as a float image in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return read_pgm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        with Image.open(_io.BytesIO(data)) as im:
            if im.mode != "L":
                raise FormatError(f"unsupported PNG mode {im.mode!r} (need 8-bit grayscale)")
            try:
                arr = np.asarray(im, dtype=np.uint8)
            except OSError as exc:
                raise FormatError(f"truncated PNG: {exc}") from exc
        return arr.astype(np.float64) / 255.0
    raise FormatError(f"{path}: unsupported image format")


# -- score files ------------------------------------------------------------

@dataclass(frozen=True)
class ScoreRecord:
    expert_id: str
    shot_id: str
    claim_id: str
    score: float
    quality: float = 1.0
    claim_quality: float = 1.0
    label: str = "unknown"


def _parse_record(row, lineno) -> ScoreRecord:
    try:
        score = float(row["score"])
        quality = float(row["quality"])
        claim_quality = float(row["claim_quality"])
    except (TypeError, ValueError):
        raise FormatError(f"line {lineno}: bad number in {row}") from None
    if not 0.0 <= score <= 1.0:
        raise FormatError(f"line {lineno}: score {score} outside [0, 1]")
    if not (quality >= 0 and claim_quality >= 0) or math.isinf(quality) or math.isinf(claim_quality):
        raise FormatError(f"line {lineno}: qualities must be finite and >= 0")
    label = (row["label"] or "").strip()
    if label not in LABELS:
        raise FormatError(f"line {lineno}: unknown label {label!r}")
    ids = [(row[k] or "").strip() for k in ("expert_id", "shot_id", "claim_id")]
    if not all(ids):
        raise FormatError(f"line {lineno}: empty id")
    return ScoreRecord(*ids, score, quality, claim_quality, label)


def read_scores(path) -> list[ScoreRecord]:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: empty score file")
    reader = csv.DictReader(lines)
    if tuple(h.strip() for h in (reader.fieldnames or ())) != SCORE_COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(SCORE_COLUMNS)}")
    return [_parse_record(row, n) for n, row in enumerate(reader, start=2)]


def write_scores(path, records) -> None:
    buf = _io.StringIO()
    buf.write(SCORES_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for r in records:
        w.writerow([r.expert_id, r.shot_id, r.claim_id, format_float(r.score),
                    format_float(r.quality), format_float(r.claim_quality), r.label])
    Path(path).write_text(buf.getvalue())


def records_to_panel(records, experts=None) -> ScorePanel:
    """Pivot long-format records into a ``(trials, experts)`` panel.

    A trial is a ``(shot_id, claim_id)`` pair; trial and expert order follow
    first appearance.  Every trial must be scored by every expert.
    """
    if experts is None:
        experts = list(dict.fromkeys(r.expert_id for r in records))
    experts = tuple(experts)
    col = {e: i for i, e in enumerate(experts)}
    trials = {}
    for r in records:
        if r.expert_id not in col:
            raise PanelError(f"unknown expert {r.expert_id!r}")
        trials.setdefault((r.shot_id, r.claim_id), {})
        slot = trials[(r.shot_id, r.claim_id)]
        if r.expert_id in slot:
            raise PanelError(f"duplicate score for expert {r.expert_id!r} on {r.shot_id}/{r.claim_id}")
        slot[r.expert_id] = r
    n, m = len(trials), len(experts)
    scores = np.empty((n, m))
    qual = np.empty((n, m))
    claim = np.empty((n, m))
    labels = np.empty(n, dtype=int)
    shots = np.empty(n, dtype=object)
    claims = np.empty(n, dtype=object)
    for t, ((shot, cl), slot) in enumerate(trials.items()):
        if len(slot) != m:
            missing = sorted(set(experts) - set(slot))
            raise PanelError(f"trial {shot}/{cl} lacks scores from {missing}")
        labs = {LABELS[r.label] for r in slot.values()}
        if len(labs) != 1:
            raise PanelError(f"trial {shot}/{cl} has conflicting labels")
        labels[t] = labs.pop()
        shots[t], claims[t] = shot, cl
        for e, r in slot.items():
            i = col[e]
            scores[t, i], qual[t, i], claim[t, i] = r.score, r.quality, r.claim_quality
    return ScorePanel(experts, scores, qual, claim, labels, shots, claims)


def panel_to_records(panel: ScorePanel) -> list[ScoreRecord]:
    out = []
    for t in range(len(panel)):
        for i, e in enumerate(panel.experts):
            out.append(ScoreRecord(e, str(panel.shot_ids[t]), str(panel.claim_ids[t]),
                                   float(panel.scores[t, i]), float(panel.qualities[t, i]),
                                   float(panel.claim_qualities[t, i]),
                                   LABEL_NAMES[int(panel.labels[t])]))
    return out


# -- supervisor models ------------------------------------------------------

def write_model(path, sup: TrainedSupervisor) -> None:
    lines = [MODEL_HEADER, f"experts={sup.n_experts}",
             f"n_client={sup.client.n_shots}", f"n_impostor={sup.impostor.n_shots}"]
    params = sup.params()
    for i, name in enumerate(sup.experts, start=1):
        lines.append(f"expert.{i}.id={name}")
        for key in MODEL_KEYS:
            lines.append(f"expert.{i}.{key}={format_float(params[key][i - 1])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> TrainedSupervisor:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise FormatError(f"{path}: missing '{MODEL_HEADER}' header")
    kv = {}
    for n, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        if "=" not in ln:
            raise FormatError(f"{path}:{n}: expected key=value")
        k, v = ln.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        m = int(kv.pop("experts"))
        n_c = int(kv.pop("n_client"))
        n_i = int(kv.pop("n_impostor"))
        names = []
        vals = {key: np.empty(m) for key in MODEL_KEYS}
        for i in range(1, m + 1):
            names.append(kv.pop(f"expert.{i}.id"))
            for key in MODEL_KEYS:
                vals[key][i - 1] = float(kv.pop(f"expert.{i}.{key}"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing key {exc.args[0]}") from None
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if kv:
        raise FormatError(f"{path}: unknown keys {sorted(kv)}")
    client = SupervisorSide(vals["MC"], vals["VC"], vals["alphaC"], n_c)
    impostor = SupervisorSide(vals["MI"], vals["VI"], vals["alphaI"], n_i)
    return TrainedSupervisor(tuple(names), client, impostor)


# -- run configuration ------------------------------------------------------

def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


def _bool(v):
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v):
    return None if v.strip().lower() in ("", "auto", "none") else int(v)


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run, loadable from ``key=value`` lines."""

    sigma1: float = 0.6
    sigma2: float = 3.0
    block_size: int = 8
    orders: tuple[int, ...] = (0, 1)
    tau_s: float = 0.1
    downsize_factor: int | None = None
    adaptive: bool = True
    quality_scale: float = 2.0
    q_floor: float = Q_FLOOR
    alpha_floor: float = ALPHA_FLOOR
    cascade_thresholds: tuple[float, ...] = ()
    rule: str = "max"
    k_groups: int = 5
    jackknife_mode: str = "pooled"

    def quality_config(self) -> QualityConfig:
        return QualityConfig(self.sigma1, self.sigma2, self.block_size, self.orders,
                             self.tau_s, self.downsize_factor)


_PARSERS = {
    "sigma1": float, "sigma2": float, "block_size": int, "orders": _ints, "tau_s": float,
    "downsize_factor": _opt_int, "adaptive": _bool, "quality_scale": float,
    "q_floor": float, "alpha_floor": float, "cascade_thresholds": _floats,
    "rule": str.strip, "k_groups": int, "jackknife_mode": str.strip,
}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise FormatError(f"config line {n}: expected key=value")
        k, v = (s.strip() for s in ln.split("=", 1))
        if k not in _PARSERS:
            raise FormatError(f"config line {n}: unknown key {k!r}")
        try:
            values[k] = _PARSERS[k](v)
        except ValueError as exc:
            raise FormatError(f"config line {n}: {exc}") from None
    return replace(base or RunConfig(), **values)


def read_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# -- reports ----------------------------------------------------------------

def write_quality_map(path, report: QualityReport) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "s", "r", "q", "interesting"])
    rows, cols = report.quality_map.shape
    for i in range(rows):
        for j in range(cols):
            w.writerow([i, j, format_float(report.symmetry_map[i, j]),
                        format_float(report.correlation_map[i, j]),
                        format_float(report.quality_map[i, j]),
                        int(report.mask[i, j])])
    Path(path).write_text(buf.getvalue())
