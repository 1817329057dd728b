import json
import math

import numpy as np
import pytest

from sftdim.config import (
    build_config,
    canonical_json,
    config_digest,
    load_config,
    parse_document,
    preset_names,
    preset_text,
    recoded_document,
)
from sftdim.errors import ConfigError, RowSum, StrandedSymbol, SupportMismatch
from sftdim.markov import lift_measure


def _doc(**over):
    doc = {
        "alphabet": ["a", "b"],
        "adjacency": [[1, 1], [1, 0]],
        "roof": {"depth": 1, "table": {"a": 1.0, "b": 2.0}},
        "fu": {"depth": 2, "table": {"a,a": 0.5, "a,b": 0.7, "b,a": 0.9}},
    }
    doc.update(over)
    return doc


def test_presets_load():
    names = preset_names()
    assert {"full2_ln2ln6", "bernoulli_dim3", "golden_mean_const", "curvature_minus1"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.sft.n == len(cfg.alphabet)
        assert cfg.fu.is_positive() and cfg.roof.is_positive()


def test_preset_contents():
    cfg = load_config("full2_ln2ln6")
    assert cfg.measure is None
    assert cfg.fu((0,)) == pytest.approx(math.log(2), abs=1e-15)
    assert cfg.fu((1,)) == pytest.approx(math.log(6), abs=1e-15)
    golden = load_config("golden_mean_const")
    assert np.array_equal(golden.sft.adjacency, [[1, 1], [1, 0]])
    assert golden.measure is not None


def test_file_and_preset_agree(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(preset_text("golden_mean_const"))
    assert load_config(p).digest() == load_config("golden_mean_const").digest()


def test_unknown_source():
    with pytest.raises(ConfigError, match="no config file or preset"):
        load_config("does_not_exist")


def test_missing_word_is_named():
    doc = _doc(fu={"depth": 2, "table": {"a,a": 0.5, "a,b": 0.7}})
    with pytest.raises(ConfigError) as exc:
        build_config(doc)
    assert any("missing word 'b,a'" in e for e in exc.value.errors)


def test_errors_are_collected():
    doc = _doc(roof={"depth": 1, "table": {"a": -1.0, "b": 2.0}}, fu={"depth": 1, "table": {"a": 1.0, "c": 1.0}}, extra=1)
    with pytest.raises(ConfigError) as exc:
        build_config(doc)
    assert len(exc.value.errors) == 1 and "unknown field 'extra'" in exc.value.errors[0]
    del doc["extra"]
    with pytest.raises(ConfigError) as exc:
        build_config(doc)
    msgs = " | ".join(exc.value.errors)
    assert "must be > 0" in msgs and "'c'" in msgs and "missing word 'b'" in msgs


def test_inadmissible_word_rejected():
    doc = _doc(fu={"depth": 2, "table": {"a,a": 0.5, "a,b": 0.7, "b,a": 0.9, "b,b": 1.0}})
    with pytest.raises(ConfigError, match="not admissible"):
        build_config(doc)


@pytest.mark.parametrize("field", ["alphabet", "adjacency", "roof", "fu"])
def test_required_fields(field):
    doc = _doc()
    del doc[field]
    with pytest.raises(ConfigError, match=f"missing field '{field}'"):
        build_config(doc)


def test_duplicate_keys_and_constants_rejected():
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_document('{"a": 1, "a": 2}')
    for bad in ("NaN", "Infinity", "-Infinity"):
        with pytest.raises(ConfigError, match="non-finite"):
            parse_document('{"theta": %s}' % bad)
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_document("{")
    with pytest.raises(ConfigError, match="object"):
        parse_document("[1]")


def test_structural_errors_keep_their_types():
    with pytest.raises(StrandedSymbol):
        build_config(_doc(adjacency=[[1, 0], [0, 0]]))
    with pytest.raises(SupportMismatch):
        build_config(_doc(markov=[[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(RowSum):
        build_config(_doc(markov=[[0.5, 0.6], [1.0, 0.0]]))
    with pytest.raises(ConfigError):
        build_config(_doc(adjacency=[[1, 2], [1, 0]]))
    with pytest.raises(ConfigError):
        build_config(_doc(alphabet=["a", "a"]))


def test_digest_is_canonical():
    d1 = _doc()
    d2 = json.loads(json.dumps(dict(reversed(list(d1.items())))))
    assert config_digest(d1) == config_digest(d2)
    assert config_digest(d1).startswith("sha256:") and len(config_digest(d1)) == 7 + 64
    assert canonical_json(d1) == canonical_json(d2)
    assert config_digest(_doc(theta=0.4)) != config_digest(d1)


def test_with_markov_does_not_mutate():
    cfg = load_config("full2_ln2ln6")
    doc = cfg.with_markov([[0.3, 0.7], [0.6, 0.4]])
    assert "markov" not in cfg.document
    assert build_config(doc).measure.P[0, 1] == 0.7


def test_recoded_document_round_trip():
    cfg = build_config(_doc(markov=[[0.4, 0.6], [1.0, 0.0]]))
    doc = recoded_document(cfg, 2)
    cfg2 = build_config(doc)
    assert cfg2.alphabet == ["aa", "ab", "ba"]
    assert cfg2.fu.depth == 1 and cfg2.roof.depth == 1
    assert np.allclose(cfg2.measure.P, lift_measure(cfg.measure, 2).P)
    assert recoded_document(cfg, 1)["fu"]["depth"] == 2
