"""Trace validation against executable specifications."""

import json

from . import _tracecheck
from ._tracecheck import TracecheckError, cli, merge, oracle_validate, reachable_states

__all__ = [
    "TracecheckError",
    "cli",
    "merge",
    "oracle_validate",
    "reachable_states",
    "run_tokenring",
    "run_twophase",
    "validate",
]


def validate(spec, trace, *, search="bfs", allow_stutter=False, composition=None,
             max_states=5_000_000, max_seconds=0.0):
    """Validate NDJSON trace text against a registered spec; returns the verdict dict."""
    text = _tracecheck.validate(spec, trace, search, allow_stutter, composition or {},
                                max_states, max_seconds)
    return json.loads(text)


def run_twophase(out_dir, *, rms=2, seed=1, loss=0.0, bug="none", record="vea", force_resend=False):
    """Simulate Two-Phase Commit into out_dir; returns the run manifest."""
    return json.loads(_tracecheck.run_twophase(str(out_dir), rms, seed, loss, bug, record, force_resend))


def run_tokenring(out_dir, *, n=3, seed=1, bug="none", record="vea", token_resend=False):
    """Simulate the token ring into out_dir; returns the run manifest."""
    return json.loads(_tracecheck.run_tokenring(str(out_dir), n, seed, bug, record, token_resend))
