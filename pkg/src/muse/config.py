"""Key-value config files for the command-line pipeline.

Format: one ``key = value`` assignment per line, full-line ``#``
comments, blank lines ignored. Keys are dotted lowercase; values are
bare strings coerced by the schema (ints, floats, names, or
comma-separated tuples). Duplicate keys and unknown keys are errors so
typos never silently fall back to defaults.

Schema (all optional; defaults in parentheses):

    seed                       int (0), overridden by $MUSE_SEED
    data.n                     int (1000)
    data.k_t / data.k_v        rows per modality (2 / 2)
    data.d_t / data.d_v        feature widths (8 / 8)
    data.rule                  sum_separable | max_separable | interaction
    data.noise                 float (0.1)
    data.missing_text_rate     float (0.0)
    data.missing_image_rate    float (0.0)
    data.train_fraction        float (0.4)
    data.valid_fraction        float (0.4)
    model.d_h                  hidden width (8)
    model.n_linear             vector-path cells (3)
    model.m_seq                sequence-path cells (3)
    model.topology             chain | dag
    model.paths                comma list of linear,sequence,static
    model.static_variant       siamese | cluster_reference
    model.cluster_k            int (2)
    model.cluster_iters        int (20)
    model.combiner             sigmoid | softmax
    model.fusion_ops           comma list (full space)
    model.linear_ops           comma list (full space)
    model.sequence_ops         comma list (full space)
    model.epochs               search epochs (10)
    model.retrain_epochs       int (20)
    model.batch_size           int (64)
    model.lr_w                 float (1e-2)
    model.lr_alpha             float (5e-3); 0 freezes the architecture
    model.optimizer            adam | sgd
"""

from __future__ import annotations

from .data import DataConfig
from .errors import ConfigError
from .model import ModelConfig

__all__ = [
    "parse_config_text", "load_config", "render_config",
    "ConfigMap", "build_data_config", "build_model_config", "resolve_seed",
]


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc


def render_config(kv: dict[str, str]) -> str:
    """Canonical echo: sorted keys, one assignment per line."""
    return "".join(f"{key} = {kv[key]}\n" for key in sorted(kv))


class ConfigMap:
    """Typed access over raw key-value pairs with consumed-key tracking."""

    def __init__(self, kv: dict[str, str]):
        self.kv = dict(kv)
        self._used: set[str] = set()

    def _take(self, key: str):
        if key in self.kv:
            self._used.add(key)
            return self.kv[key]
        return None

    def get_str(self, key: str, default: str) -> str:
        v = self._take(key)
        return default if v is None else v

    def get_int(self, key: str, default: int) -> int:
        v = self._take(key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {v!r}") from exc

    def get_float(self, key: str, default: float) -> float:
        v = self._take(key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {v!r}") from exc

    def get_tuple(self, key: str) -> tuple[str, ...] | None:
        v = self._take(key)
        if v is None:
            return None
        items = tuple(part.strip() for part in v.split(",") if part.strip())
        if not items:
            raise ConfigError(f"{key}: expected a comma-separated list, got {v!r}")
        return items

    def reject_unknown(self) -> None:
        unknown = sorted(set(self.kv) - self._used)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def resolve_seed(cfg: ConfigMap, env_seed: str | None) -> int:
    """$MUSE_SEED beats the config file's seed key; default 0."""
    seed = cfg.get_int("seed", 0)
    if env_seed is not None and env_seed != "":
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"MUSE_SEED must be an integer, got {env_seed!r}") from exc
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    return seed


def build_data_config(cfg: ConfigMap, seed: int) -> DataConfig:
    return DataConfig(
        n=cfg.get_int("data.n", 1000),
        k_t=cfg.get_int("data.k_t", 2),
        k_v=cfg.get_int("data.k_v", 2),
        d_t=cfg.get_int("data.d_t", 8),
        d_v=cfg.get_int("data.d_v", 8),
        planted_rule=cfg.get_str("data.rule", "sum_separable"),
        noise=cfg.get_float("data.noise", 0.1),
        missing_text_rate=cfg.get_float("data.missing_text_rate", 0.0),
        missing_image_rate=cfg.get_float("data.missing_image_rate", 0.0),
        train_fraction=cfg.get_float("data.train_fraction", 0.4),
        valid_fraction=cfg.get_float("data.valid_fraction", 0.4),
        seed=seed,
    )


def build_model_config(cfg: ConfigMap) -> ModelConfig:
    paths = cfg.get_tuple("model.paths")
    return ModelConfig(
        d_h=cfg.get_int("model.d_h", 8),
        n_linear=cfg.get_int("model.n_linear", 3),
        m_seq=cfg.get_int("model.m_seq", 3),
        topology=cfg.get_str("model.topology", "chain"),
        paths=paths if paths is not None else ("linear", "sequence", "static"),
        static_variant=cfg.get_str("model.static_variant", "siamese"),
        cluster_k=cfg.get_int("model.cluster_k", 2),
        cluster_iters=cfg.get_int("model.cluster_iters", 20),
        combiner=cfg.get_str("model.combiner", "sigmoid"),
        fusion_ops=cfg.get_tuple("model.fusion_ops"),
        linear_ops=cfg.get_tuple("model.linear_ops"),
        sequence_ops=cfg.get_tuple("model.sequence_ops"),
        epochs=cfg.get_int("model.epochs", 10),
        retrain_epochs=cfg.get_int("model.retrain_epochs", 20),
        batch_size=cfg.get_int("model.batch_size", 64),
        lr_w=cfg.get_float("model.lr_w", 1e-2),
        lr_alpha=cfg.get_float("model.lr_alpha", 5e-3),
        optimizer=cfg.get_str("model.optimizer", "adam"),
    )
