"""JSON model documents.

A document looks like::

    {
      "alphabet": ["1", "2"],
      "adjacency": [[1, 1], [1, 1]],
      "theta": 0.5,
      "roof": {"depth": 1, "table": {"1": 1.0, "2": 1.0}},
      "fu":   {"depth": 1, "table": {"1": 0.693147180559945, "2": 1.791759469228055}},
      "fs":   {...},                       optional, defaults to fu
      "markov": [[0.5, 0.5], [0.5, 0.5]]   optional
    }

Table keys are comma-joined symbol names (``"1,2"`` for the word 1 2).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .markov import MarkovMeasure, lift_measure, validate_markov
from .sft import LocallyConstantFn, Sft, block_recode, enumerate_words, validate_sft

FIELDS = ("alphabet", "adjacency", "theta", "roof", "fu", "fs", "markov")
REQUIRED = ("alphabet", "adjacency", "roof", "fu")


@dataclass(frozen=True, eq=False)
class ModelConfig:
    document: dict
    sft: Sft
    roof: LocallyConstantFn
    fu: LocallyConstantFn
    fs: LocallyConstantFn | None = None
    measure: MarkovMeasure | None = None
    source: str = field(default="")

    @property
    def alphabet(self) -> list[str]:
        return list(self.document["alphabet"])

    @property
    def fs_or_fu(self) -> LocallyConstantFn:
        return self.fu if self.fs is None else self.fs

    def digest(self) -> str:
        return config_digest(self.document)

    def with_markov(self, P) -> dict:
        """A copy of the document carrying ``P`` as its Markov block."""
        doc = json.loads(json.dumps(self.document))
        doc["markov"] = [[float(x) for x in row] for row in P]
        return doc


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def config_digest(document: dict) -> str:
    return "sha256:" + hashlib.sha256(canonical_json(document).encode("ascii")).hexdigest()


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError([f"duplicate key {k!r}"])
        out[k] = v
    return out


def parse_document(text: str) -> dict:
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a JSON object"])
    return doc


def _reject_constant(name):
    raise ConfigError([f"non-finite number {name} is not allowed"])


def preset_names() -> list[str]:
    root = resources.files("sftdim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    return (resources.files("sftdim") / "presets" / f"{name}.json").read_text(encoding="utf-8")


def load_config(source: str | Path) -> ModelConfig:
    """Load a config from a file path, or from a shipped preset by name."""
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif str(source) in preset_names():
        text = preset_text(str(source))
    else:
        raise ConfigError([f"no config file or preset named {str(source)!r}; presets: {', '.join(preset_names())}"])
    return build_config(parse_document(text), source=str(source))


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _table(doc, name, sft, labels, errors, positive):
    spec = doc[name]
    if not isinstance(spec, dict) or set(spec) != {"depth", "table"}:
        errors.append(f"{name}: expected an object with exactly 'depth' and 'table'")
        return None
    depth, table = spec["depth"], spec["table"]
    if not isinstance(depth, int) or isinstance(depth, bool) or depth < 1:
        errors.append(f"{name}.depth: must be a positive integer")
        return None
    if not isinstance(table, dict):
        errors.append(f"{name}.table: must be an object")
        return None
    index = {lab: i for i, lab in enumerate(labels)}
    parsed = {}
    before = len(errors)
    for key, value in table.items():
        parts = key.split(",")
        if len(parts) != depth or any(p not in index for p in parts):
            errors.append(f"{name}.table: key {key!r} is not a {depth}-word over the alphabet")
            continue
        if not _is_number(value):
            errors.append(f"{name}.table[{key!r}]: value must be a finite number")
            continue
        if positive and value <= 0:
            errors.append(f"{name}.table[{key!r}]: value must be > 0, got {value!r}")
        parsed[tuple(index[p] for p in parts)] = float(value)
    admissible = enumerate_words(sft, depth)
    for w in admissible:
        if w not in parsed and ",".join(labels[s] for s in w) not in table:
            errors.append(f"{name}.table: missing word {','.join(labels[s] for s in w)!r}")
    extra = set(parsed) - set(admissible)
    for w in sorted(extra):
        errors.append(f"{name}.table: word {','.join(labels[s] for s in w)!r} is not admissible")
    if len(errors) > before:
        return None
    return LocallyConstantFn.from_table(sft, depth, parsed)


def build_config(doc: dict, source: str = "") -> ModelConfig:
    """Validate a parsed document. Schema problems are collected into one
    :class:`ConfigError`; structural SFT and Markov errors raise their own types."""
    errors = []
    for key in doc:
        if key not in FIELDS:
            errors.append(f"unknown field {key!r}")
    for key in REQUIRED:
        if key not in doc:
            errors.append(f"missing field {key!r}")
    if errors:
        raise ConfigError(errors)
    labels = doc["alphabet"]
    if not isinstance(labels, list) or not all(isinstance(s, str) and s and "," not in s for s in labels):
        raise ConfigError(["alphabet: must be a list of nonempty names without commas"])
    if len(set(labels)) != len(labels):
        raise ConfigError(["alphabet: names must be distinct"])
    adj = doc["adjacency"]
    n = len(labels)
    if not (isinstance(adj, list) and len(adj) == n and all(isinstance(r, list) and len(r) == n for r in adj)):
        raise ConfigError([f"adjacency: must be a {n}x{n} list of lists"])
    if not all(x in (0, 1) and not isinstance(x, bool) for r in adj for x in r):
        raise ConfigError(["adjacency: entries must be 0 or 1"])
    theta = doc.get("theta", 0.5)
    if not _is_number(theta):
        raise ConfigError(["theta: must be a number"])
    sft = validate_sft(adj, float(theta), tuple(labels))

    roof = _table(doc, "roof", sft, labels, errors, positive=True)
    fu = _table(doc, "fu", sft, labels, errors, positive=True)
    fs = _table(doc, "fs", sft, labels, errors, positive=True) if "fs" in doc else None
    P = doc.get("markov")
    if P is not None and not (
        isinstance(P, list) and len(P) == n and all(isinstance(r, list) and len(r) == n and all(_is_number(x) for x in r) for r in P)
    ):
        errors.append(f"markov: must be a {n}x{n} matrix of numbers")
    if errors:
        raise ConfigError(errors)
    measure = validate_markov(sft, P) if P is not None else None
    return ModelConfig(doc, sft, roof, fu, fs, measure, source)


def fn_document(sft: Sft, fn: LocallyConstantFn) -> dict:
    """``{depth, table}`` with comma-joined label keys."""
    return {
        "depth": fn.depth,
        "table": {",".join(sft.labels[s] for s in w): float(fn.values[w]) for w in enumerate_words(sft, fn.depth)},
    }


def recoded_document(cfg: ModelConfig, ell: int, P=None) -> dict:
    """The config rewritten on the ``ell``-block alphabet.

    The Markov block is ``P`` when given (already on the block alphabet),
    otherwise the lift of the config's own measure, if any.
    """
    fns = [cfg.roof, cfg.fu] + ([cfg.fs] if cfg.fs is not None else [])
    sft2, out = block_recode(cfg.sft, fns, ell)
    doc = {
        "alphabet": list(sft2.labels),
        "adjacency": sft2.adjacency.astype(int).tolist(),
        "theta": cfg.sft.theta,
        "roof": fn_document(sft2, out[0]),
        "fu": fn_document(sft2, out[1]),
    }
    if cfg.fs is not None:
        doc["fs"] = fn_document(sft2, out[2])
    if P is None and cfg.measure is not None:
        P = lift_measure(cfg.measure, ell).P
    if P is not None:
        doc["markov"] = [[float(x) for x in row] for row in P]
    return doc
