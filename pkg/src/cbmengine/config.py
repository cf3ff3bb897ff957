"""Service configuration: YAML file with environment overrides.

Environment variables CBM_LISTEN (telemetry ingest socket), CBM_TOKEN
(bearer token), and CBM_DATA_DIR take precedence over the file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import yaml


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:9009"  # telemetry ingest stream socket
    http: str = "127.0.0.1:8080"  # operator API
    token: Optional[str] = None
    data_dir: str = "./cbm-data"
    scenario: Optional[str] = None  # asset definitions
    rules: Optional[str] = None
    inspection_fraction: float = 0.5
    poll_seconds: float = 0.5  # schedule/escalation pump cadence
    staleness_hours: float = 24.0
    webhook_url: Optional[str] = None


def load_config(path: Optional[str] = None) -> ServiceConfig:
    doc = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if doc.get("version", 1) != 1:
            raise ValueError(f"unsupported config version {doc.get('version')!r}")
    cfg = ServiceConfig(
        listen=doc.get("listen", ServiceConfig.listen),
        http=doc.get("http", ServiceConfig.http),
        token=doc.get("token"),
        data_dir=doc.get("data_dir", ServiceConfig.data_dir),
        scenario=doc.get("scenario"),
        rules=doc.get("rules"),
        inspection_fraction=float(
            doc.get("inspection_fraction", ServiceConfig.inspection_fraction)
        ),
        poll_seconds=float(doc.get("poll_seconds", ServiceConfig.poll_seconds)),
        staleness_hours=float(doc.get("staleness_hours", ServiceConfig.staleness_hours)),
        webhook_url=doc.get("webhook_url"),
    )
    cfg.listen = os.environ.get("CBM_LISTEN", cfg.listen)
    cfg.token = os.environ.get("CBM_TOKEN", cfg.token)
    cfg.data_dir = os.environ.get("CBM_DATA_DIR", cfg.data_dir)
    return cfg


def split_host_port(addr: str) -> tuple:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)
