"""Tiny helper: expose a dataclass config as command-line flags."""
from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path


def parse(config_cls, argv=None):
    p = argparse.ArgumentParser(description=(config_cls.__doc__ or "").strip())
    for f in dataclasses.fields(config_cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        kind = type(default)
        if kind is bool:
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, action=argparse.BooleanOptionalAction, default=default)
        elif kind in (list, tuple):
            elem = type(default[0]) if default else int
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=elem, nargs="+", default=default)
        else:
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind, default=default)
    return config_cls(**vars(p.parse_args(argv)))


def write_json(path: Path, cfg, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config": dataclasses.asdict(cfg), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=float) + "\n")
    print(f"wrote {path}")
