import base64
import json
import pathlib

import jsonschema
import pytest

INTERFACE = pathlib.Path(__file__).resolve().parents[2] / "interface"
PNG = base64.b64encode(b"\x89PNG\r\n\x1a\n").decode()


def schema(name):
    s = json.loads((INTERFACE / name).read_text())
    jsonschema.Draft202012Validator.check_schema(s)
    return jsonschema.Draft202012Validator(s)


def test_request_schema():
    v = schema("segment_request.schema.json")
    v.validate({"image": PNG, "prompts": [{"x": 3, "y": 4, "positive": True}]})
    v.validate({"image": PNG, "prompts": [{"x": 0, "y": 0, "positive": False}, {"x": 1, "y": 1, "positive": True}]})
    for bad in (
        {"image": PNG, "prompts": []},
        {"image": PNG, "prompts": [{"x": 3, "y": 4, "positive": False}]},
        {"image": PNG, "prompts": [{"x": -1, "y": 4, "positive": True}]},
        {"image": PNG, "prompts": [{"x": 1, "y": 4, "positive": True}], "extra": 1},
        {"prompts": [{"x": 1, "y": 4, "positive": True}]},
    ):
        with pytest.raises(jsonschema.ValidationError):
            v.validate(bad)


def test_response_schemas():
    v = schema("segment_response.schema.json")
    v.validate({"mask": PNG, "confidence": 0.5})
    for bad in ({"mask": PNG}, {"mask": PNG, "confidence": 1.5}, {"confidence": 0.2}):
        with pytest.raises(jsonschema.ValidationError):
            v.validate(bad)
    h = schema("health_response.schema.json")
    h.validate({"status": "ok", "backend": "fake", "version": "1.2.3"})
