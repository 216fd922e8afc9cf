import json

import numpy as np
import pytest

from blowup_control import ConfigError
from blowup_control.config import load, loads, parse

BASE = {"kind": "power", "p": 2, "beta": 2, "n": 2, "y0": [1.0, 0.0]}


def test_full_document():
    doc = dict(BASE, g={"table": [[0, 1], [1, 2]]}, A={"rotation": 0.5},
               controls={"ball": {"B": [[1, 0], [0, 1]], "radius": 0.5}}, zeta={},
               law={"breakpoints": [0, 0.1], "values": [[0.5, 0], [0, 0.5]]},
               options={"t_max": 3.0, "rel_tol": 1e-9})
    run = parse(doc)
    assert run.system.n == 2 and run.options.t_max == 3.0
    assert run.system.zeta is not None
    assert np.allclose(run.law.value(0.2), [0.0, 0.5])


def test_line_and_column_in_parse_error():
    with pytest.raises(ConfigError, match=r"line 2, column 3"):
        loads('{"a": 1,\n  }')


@pytest.mark.parametrize("patch", [
    {"kind": "cubic"},
    {"y0": [1.0]},
    {"A": {"const": [[1.0]]}},
    {"extra": 1},
    {"options": {"eps_blow": 5.0}},
    {"options": {"t_mx": 1.0}},
    {"p": 0.5},
    {"controls": {"ball": {"radius": 1.0, "shape": "round"}}},
])
def test_invalid_documents(patch):
    with pytest.raises(ConfigError):
        parse(dict(BASE, **patch))


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(BASE))
    assert load(path).system.n == 2
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")
