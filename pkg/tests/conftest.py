from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def sketch_files() -> list[Path]:
    return sorted((FIXTURES / "sketches").glob("*.thy"))


@pytest.fixture(scope="session")
def fig2_text() -> str:
    return (FIXTURES / "sketches" / "algebra_binomnegdiscrineq_10alt28asqp1.thy").read_text()


@pytest.fixture(scope="session")
def fig3_text() -> str:
    return (FIXTURES / "sketches" / "imo_1959_p1.thy").read_text()


@pytest.fixture(scope="session")
def pool():
    from sketchprove.prompting import load_pool

    return load_pool(FIXTURES / "pool" / "examples.json")


@pytest.fixture(scope="session")
def problems():
    from sketchprove.harness import load_dataset

    return load_dataset(FIXTURES / "datasets" / "mini.jsonl")


@pytest.fixture(scope="session")
def golden_config() -> dict:
    import json

    return json.loads((FIXTURES / "golden" / "config.json").read_text())


@pytest.fixture()
def scripted_session_factory(tmp_path):
    """Factory of prover-session factories over an inline script dict."""
    import json as _json

    from sketchprove.prover import ProverConfig, ScriptedSpec, open_session

    def make(script: dict, config: ProverConfig | None = None, name: str = "script.json"):
        path = tmp_path / name
        path.write_text(_json.dumps(script))
        return lambda: open_session(ScriptedSpec(str(path)), config or ProverConfig())

    return make


def minimal_script(rules: list | None = None, default: dict | None = None, **extra) -> dict:
    script = {
        "schema": "prover-script/1",
        "rules": rules or [],
        "default": default or {"kind": "fail"},
    }
    script.update(extra)
    return script
