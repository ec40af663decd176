"""
Result Rendering
JSON for machines, aligned tables for people, tidy CSV for plotting
"""

import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from core.errors import ParameterError

FORMATS = ("json", "table", "csv")


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return str(value)


def _clean(value):
    """NaN is not valid JSON; write null instead"""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


def to_json(payload) -> str:
    if isinstance(payload, pd.DataFrame):
        payload = payload.to_dict(orient="records")
    elif hasattr(payload, "to_dict"):
        payload = payload.to_dict()
    return json.dumps(_clean(json.loads(json.dumps(payload, default=_jsonable))), indent=2)


def to_frame(payload) -> pd.DataFrame:
    """Best tabular view of a result object or payload dict"""
    if isinstance(payload, pd.DataFrame):
        return payload
    if hasattr(payload, "to_frame"):
        return payload.to_frame()
    if hasattr(payload, "pairwise_adjusted_p"):
        return pd.DataFrame(payload.pairs)
    if hasattr(payload, "to_dict"):
        payload = payload.to_dict()
    flat = pd.json_normalize(_clean(json.loads(json.dumps(payload, default=_jsonable))), sep=".")
    return flat.T.rename(columns={0: "value"}).rename_axis("field")


def render(payload, fmt: str = "json") -> str:
    if fmt not in FORMATS:
        raise ParameterError(f"unknown output format '{fmt}' (choose from {', '.join(FORMATS)})")
    if fmt == "json":
        return to_json(payload)
    frame = to_frame(payload)
    if fmt == "csv":
        return frame.to_csv(index=frame.index.name == "field")
    return frame.to_string()


def write_output(text: str, path: Optional[str] = None):
    """Write to a file, or stdout when no path is given"""
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
