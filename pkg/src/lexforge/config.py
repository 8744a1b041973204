"""Pipeline configuration: one declarative keyed file, env and flag overrides.

The config file is INI-style with one section per concern. Client
credentials can be supplied or overridden through the environment
(``LEXFORGE_ENDPOINT``, ``LEXFORGE_MODEL``, ``LEXFORGE_API_KEY``);
command-line flags override both.
"""

from __future__ import annotations

import configparser
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentConfig
from .corpus import CorpusFilterConfig
from .errors import UsageError
from .retrieval import Bm25Params, SegmentConfig
from .training import LossConfig

ENV_PREFIX = "LEXFORGE_"


@dataclass
class ClientSettings:
    endpoint: str = ""
    model: str = ""
    api_key: str = ""
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 1.0
    max_in_flight: int = 4


@dataclass
class PipelineConfig:
    seed: int = 0
    max_query_chars: int = 400
    client: ClientSettings = field(default_factory=ClientSettings)
    filter: CorpusFilterConfig = field(default_factory=CorpusFilterConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    bm25: Bm25Params = field(default_factory=Bm25Params)


def _get(parser: configparser.ConfigParser, section: str, option: str,
         cast, fallback):
    if not parser.has_option(section, option):
        return fallback
    raw = parser.get(section, option)
    try:
        if cast is bool:
            return parser.getboolean(section, option)
        return cast(raw)
    except ValueError as exc:
        raise UsageError(f"config [{section}] {option} = {raw!r}: {exc}") from exc


def load_config(path: str | Path | None = None,
                env: Mapping[str, str] = os.environ) -> PipelineConfig:
    """Read a config file (optional) and apply environment overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        parser.read(path, encoding="utf-8")

    seed = _get(parser, "run", "seed", int, 0)
    max_query_chars = _get(parser, "run", "max_query_chars", int, 400)

    client = ClientSettings(
        endpoint=_get(parser, "client", "endpoint", str, ""),
        model=_get(parser, "client", "model", str, ""),
        api_key=_get(parser, "client", "api_key", str, ""),
        timeout=_get(parser, "client", "timeout", float, 30.0),
        retries=_get(parser, "client", "retries", int, 3),
        backoff=_get(parser, "client", "backoff", float, 1.0),
        max_in_flight=_get(parser, "client", "max_in_flight", int, 4),
    )
    client.endpoint = env.get(ENV_PREFIX + "ENDPOINT", client.endpoint)
    client.model = env.get(ENV_PREFIX + "MODEL", client.model)
    client.api_key = env.get(ENV_PREFIX + "API_KEY", client.api_key)

    filter_cfg = CorpusFilterConfig(
        min_fact_chars=_get(parser, "filter", "min_fact_chars", int, 100),
        require_extractable_elements=_get(
            parser, "filter", "require_extractable_elements", bool, True),
    )
    augment_cfg = AugmentConfig(
        proportion_augmented=_get(parser, "augment", "proportion", float, 0.7),
        weight_ancillary=_get(parser, "augment", "weight_ancillary", float, 0.5),
        weight_term=_get(parser, "augment", "weight_term", float, 0.5),
        seed=_get(parser, "augment", "seed", int, seed),
        match_mode=_get(parser, "augment", "match_mode", str, "exact_main"),
    )
    loss_cfg = LossConfig(
        temperature=_get(parser, "loss", "temperature", float, 1.0),
        masking_enabled=_get(parser, "loss", "masking", bool, True),
    )
    segment_cfg = SegmentConfig(
        max_len=_get(parser, "segment", "max_len", int, 2048),
        stride=_get(parser, "segment", "stride", int, None),
    )
    bm25_cfg = Bm25Params(
        k1=_get(parser, "bm25", "k1", float, 1.2),
        b=_get(parser, "bm25", "b", float, 0.75),
    )
    return PipelineConfig(
        seed=seed, max_query_chars=max_query_chars, client=client,
        filter=filter_cfg, augment=augment_cfg, loss=loss_cfg,
        segment=segment_cfg, bm25=bm25_cfg,
    )
