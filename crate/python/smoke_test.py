"""Smoke test for the Python bindings.

Build first with `cargo build -p protocheck-py --features extension-module`,
then run `python3 python/smoke_test.py`. The script copies the built shared
library next to itself under the importable module name.
"""

import importlib
import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libprotocheck_py.so", "libprotocheck_py.dylib")
    ]
    built = [c for c in candidates if c.exists()]
    if not built:
        sys.exit("shared library not found; run cargo build -p protocheck-py --features extension-module")
    lib = max(built, key=lambda p: p.stat().st_mtime)
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "protocheck_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("protocheck_py")


def main():
    pc = load_module()

    prisoners = pc.build_scenario("three-prisoners", {"q": "1/2"})
    audit = json.loads(pc.audit(prisoners))
    assert [r["observation_name"] for r in audit] == ["says-b", "says-c"]
    for r in audit:
        assert r["tv_gap"] == "1/6", r
        assert not r["agree"]
    says_b = audit[0]
    assert says_b["naive_result"]["w_a"] == "1/2"
    assert says_b["sophisticated_result"]["w_a"] == "1/3"

    reports = json.loads(pc.check_car(pc.build_scenario("three-prisoners", {"q": "1"})))
    assert [r["holds"] for r in reports] == [True, False]

    judy = pc.build_scenario("judy-benjamin", {"alpha": "3"})
    post = json.loads(pc.update(judy, rule="mre"))
    assert post["blue-hq"] + post["blue-2nd"] > 0.5

    runs = pc.sample_runs(prisoners, 7, 1000)
    assert runs == pc.sample_runs(prisoners, 7, 1000)
    assert len(runs) == 1000

    try:
        pc.update(prisoners, obs="says-b", rule="jeffrey")
    except ValueError as e:
        assert "cannot be applied" in str(e)
    else:
        raise AssertionError("rule mismatch not reported")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
