"""Shipped benchmark configs must stay valid service request bodies."""

import json
from pathlib import Path

import pytest

from otdocs.service.schemas import ClassifyRequest, RetrieveRequest, SweepRequest

CONFIG_ROOT = Path(__file__).resolve().parent.parent / "configs"

SCHEMA_BY_PREFIX = {
    "retrieve": RetrieveRequest,
    "classify": ClassifyRequest,
    "sweep": SweepRequest,
}


def config_files():
    return sorted(CONFIG_ROOT.rglob("*.json"))


@pytest.mark.parametrize("path", config_files(), ids=lambda p: p.name)
def test_config_parses_into_its_schema(path):
    payload = json.loads(path.read_text(encoding="utf-8"))
    schema = SCHEMA_BY_PREFIX[path.name.split("_")[0]]
    request = schema.model_validate(payload)
    assert request.src_emb
    if "lambda" in payload:
        assert request.lam == payload["lambda"]


def test_all_expected_config_families_shipped():
    names = {p.name for p in config_files()}
    assert "retrieve_semd_iclr_en-pt.json" in names
    assert "classify_emd_cnet_en-fr.json" in names
    assert any(n.startswith("sweep_") for n in names)
