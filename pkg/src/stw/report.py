"""Deterministic serialization of command results.

Reports are the machine-readable face of the command line: one JSON object
per invocation with the command name, the inputs as parsed, the results,
and a provenance block recording windows, tolerances, and library versions.
Floats are rounded to 12 significant digits before serialization and keys
are sorted, so repeated runs of the same command produce byte-identical
output.  CSV is reserved for raw sequence dumps, where a two-column table
is more useful than nested JSON.
"""

import json
import math
import platform
from dataclasses import dataclass, field

import numpy as np

from .seqcore import ValueEnvelope, Verdict

SIG_DIGITS = 12


def round_sig(x):
    """Round a float to SIG_DIGITS significant digits."""
    return float(f"{float(x):.{SIG_DIGITS}g}")


def canonical(obj):
    """Normalize nested results for stable JSON output.

    Floats are rounded to 12 significant digits, numpy scalars and arrays
    become plain Python values, envelope and verdict objects serialize via
    their schema dictionaries, and non-finite floats become strings (strict
    JSON has no spelling for them).
    """
    if isinstance(obj, (ValueEnvelope, Verdict)):
        return canonical(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in sorted(obj.items(),
                                                        key=lambda kv:
                                                        str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return repr(x)
        return round_sig(x)
    return obj


def build_provenance(windows=None, tolerances=None):
    """The provenance block: windows, tolerances, and versions."""
    import scipy

    from . import __version__
    return {
        "windows": windows or {},
        "tolerances": tolerances or {},
        "versions": {
            "stw": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


@dataclass
class Report:
    """A single command's inputs, results, and provenance."""

    command: str
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_payload(self):
        return canonical({
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "provenance": self.provenance,
        })

    def to_json(self):
        return json.dumps(self.to_payload(), sort_keys=True, indent=2) + "\n"


def sequence_csv(seq, window=None):
    """Two-column CSV dump (index, value) of a sequence over a window."""
    if window is None:
        window = seq.window()
    lo, hi = int(window[0]), int(window[1])
    lines = ["n,value"]
    for n in range(lo, hi + 1):
        lines.append(f"{n},{seq.at(n):.{SIG_DIGITS}g}")
    return "\n".join(lines) + "\n"
