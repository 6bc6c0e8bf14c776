import json
from pathlib import Path

import numpy as np

from twofe.classes.enum import BaseEnum


class CustomEncoder(json.JSONEncoder):
    """Custom Encoder for serializing numpy values, enums and paths to JSON."""

    def default(self, obj):
        if isinstance(obj, BaseEnum):
            return obj.value
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, Exception):
            return str(obj)
        return json.JSONEncoder.default(self, obj)
