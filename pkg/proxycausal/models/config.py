"""
Run configuration for proxycausal.
Uses an immutable dataclass; sources are layered defaults < JSON file < flags.
"""
import json
from dataclasses import asdict, dataclass, fields, replace as dataclass_replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from ..errors import ConfigError, UsageError

SCENARIO_BINS = (15, 8, 5)
CSV_BINS = (10, 6, 5)
DEFAULT_LAMBDAS = (0.2, 0.2)

# Regularizers (lambda_h, lambda_q) tuned per target for synthetic-main.
TARGET_LAMBDAS = {
    (("A3",), "Y1"): (0.05, 0.20),
    (("A2",), "Y2"): (0.20, 1.00),
    (("A1", "A3"), "Y1"): (0.20, 1.00),
    (("A1", "A5"), "Y4"): (0.20, 0.20),
}

# Known-good (Z, W) pairs for the synthetic-main targets.
ORACLE_PROXIES = {
    (("A3",), "Y1"): ("Y3", "A5"),
    (("A2",), "Y2"): ("Y3", "A5"),
    (("A1", "A3"), "Y1"): ("Y3", "A5"),
    (("A1", "A5"), "Y4"): ("Y2", "A3"),
}

BENCHMARK_TARGETS = tuple(TARGET_LAMBDAS)

STUDIES = ("table", "discovery", "calibration", "bins", "noise")
PROXY_MODES = ("auto", "explicit")


@dataclass(frozen=True)
class RunConfig:
    """Immutable run configuration."""
    csv_path: Optional[str] = None  # CSV dataset source
    scenario: Optional[str] = None  # built-in scenario id, e.g. "synthetic-main"
    n: int = 600
    seed: int = 0
    bins: Optional[Tuple[int, int, int]] = None  # (M, N, L); resolved from the source when unset
    strategy: str = "quantile"
    alpha: float = 0.05
    proxy_rule: str = "smallest-index"
    treated: Tuple[str, ...] = ()
    outcome: Optional[str] = None
    proxy_mode: str = "auto"
    z: Optional[str] = None
    w: Optional[str] = None
    lambda_h: Optional[float] = None
    lambda_q: Optional[float] = None
    grid: Optional[Tuple[float, ...]] = None
    grid_points: int = 10
    replicates: int = 10_000
    reps: int = 20
    jobs: int = 1
    out: str = "./proxycausal-out"
    disable_q: bool = False
    bridges: Optional[str] = None  # directory of saved bridges to reuse instead of fitting
    oracle_proxies: bool = False
    random_links: bool = False
    link_seed: int = 0
    study: str = "table"
    bin_sweep: Tuple[Tuple[int, int, int], ...] = ()

    def update(self, **kwargs) -> 'RunConfig':
        """Create a new config with the specified updates."""
        return dataclass_replace(self, **_normalize(kwargs))

    @property
    def source(self) -> str:
        return "csv" if self.csv_path else "scenario"

    @property
    def target(self) -> Tuple[Tuple[str, ...], Optional[str]]:
        return self.treated, self.outcome


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _normalize(values: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn JSON lists into the tuples the dataclass stores."""
    result = dict(values)
    for key in ("bins", "grid", "treated"):
        if result.get(key) is not None:
            result[key] = tuple(result[key])
    if result.get("bin_sweep") is not None:
        result["bin_sweep"] = tuple(tuple(int(b) for b in entry) for entry in result["bin_sweep"])
    if isinstance(result.get("treated"), tuple) and len(result["treated"]) == 1 and "," in result["treated"][0]:
        result["treated"] = tuple(name.strip() for name in result["treated"][0].split(","))
    return result


def default_config() -> RunConfig:
    """Return the built-in defaults."""
    return RunConfig()


def config_from_dict(data: Mapping[str, Any], base: RunConfig = None) -> RunConfig:
    """
    Build a config from a flat mapping.

    Args:
        data: Field values; unknown keys are rejected
        base: Config the values are layered on; defaults when omitted

    Returns:
        New RunConfig
    """
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    base = base or default_config()
    try:
        return base.update(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"malformed configuration: {e}") from e


def load_config(path: Union[str, Path], base: RunConfig = None) -> RunConfig:
    """
    Load a flat JSON configuration document.

    Args:
        path: JSON file
        base: Config the file is layered on

    Returns:
        New RunConfig
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(data, base)


def apply_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Layer command-line values over a config; None means not given."""
    given = {key: value for key, value in overrides.items() if value is not None}
    return config_from_dict(given, config) if given else config


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    """JSON-ready echo of a config."""
    data = asdict(config)
    for key, value in data.items():
        if isinstance(value, tuple):
            data[key] = [list(v) if isinstance(v, tuple) else v for v in value]
    return data


def parse_target(text: str) -> Tuple[Tuple[str, ...], str]:
    """Parse 'A1,A3->Y1' into (('A1', 'A3'), 'Y1')."""
    if "->" not in text:
        raise ConfigError(f"target {text!r} must look like A1,A3->Y1")
    left, right = text.split("->", 1)
    treated = tuple(name.strip() for name in left.split(",") if name.strip())
    outcome = right.strip()
    if not treated or not outcome:
        raise ConfigError(f"target {text!r} must name treatments and one outcome")
    return treated, outcome


def format_target(treated: Sequence[str], outcome: str) -> str:
    return f"{','.join(treated)}->{outcome}"


def default_lambdas(treated: Sequence[str], outcome: str) -> Tuple[float, float]:
    """Tuned (lambda_h, lambda_q) for a target, or the generic default."""
    return TARGET_LAMBDAS.get((tuple(treated), outcome), DEFAULT_LAMBDAS)


def resolved_lambdas(config: RunConfig) -> Tuple[float, float]:
    lambda_h, lambda_q = default_lambdas(config.treated, config.outcome)
    return (config.lambda_h if config.lambda_h is not None else lambda_h,
            config.lambda_q if config.lambda_q is not None else lambda_q)


def resolved_bins(config: RunConfig) -> Tuple[int, int, int]:
    if config.bins is not None:
        return tuple(int(b) for b in config.bins)
    return CSV_BINS if config.source == "csv" else SCENARIO_BINS


def oracle_proxies(treated: Sequence[str], outcome: str) -> Optional[Tuple[str, str]]:
    """Known (Z, W) pair for a synthetic-main target, if any."""
    return ORACLE_PROXIES.get((tuple(treated), outcome))


def _check_bins(bins: Sequence[int], what: str = "bins"):
    if len(bins) != 3:
        raise ConfigError(f"{what} must be three counts (M, N, L)")
    M, N, L = bins
    if not (M > N >= 1 and L >= 2):
        raise ConfigError(f"{what} must satisfy M > N >= 1 and L >= 2, got {tuple(bins)}")


def validate_config(config: RunConfig, require_target: bool = False) -> RunConfig:
    """
    Check a config for internal consistency.

    Column names are checked later against the loaded dataset.

    Args:
        config: Config to check
        require_target: Whether a treated set and outcome must be given

    Returns:
        The same config
    """
    if bool(config.csv_path) == bool(config.scenario):
        raise ConfigError("give exactly one dataset source: a CSV path or a scenario")
    if config.n < 1:
        raise UsageError(f"sample size must be >= 1, got {config.n}")
    if not 0.0 <= config.alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {config.alpha}")
    if config.seed < 0:
        raise ConfigError("seed must be non-negative")
    if config.bins is not None:
        _check_bins(config.bins)
    for entry in config.bin_sweep:
        _check_bins(entry, "bin sweep entries")
    if config.strategy not in ("quantile", "uniform"):
        raise ConfigError(f"unknown binning strategy {config.strategy!r}")
    if config.proxy_rule not in ("smallest-index", "majority-vote"):
        raise ConfigError(f"unknown proxy rule {config.proxy_rule!r}")
    if config.proxy_mode not in PROXY_MODES:
        raise ConfigError(f"proxy mode must be one of {PROXY_MODES}")
    if config.proxy_mode == "explicit" and not (config.z and config.w):
        raise ConfigError("explicit proxy mode needs both z and w")
    if config.study not in STUDIES:
        raise ConfigError(f"study must be one of {STUDIES}")
    for value in (config.lambda_h, config.lambda_q):
        if value is not None and value <= 0:
            raise ConfigError("regularizers must be positive")
    if config.grid_points < 1 or (config.grid is not None and len(config.grid) == 0):
        raise ConfigError("the dose grid must be nonempty")
    if config.replicates < 1 or config.reps < 1 or config.jobs < 1:
        raise ConfigError("replicates, reps and jobs must be >= 1")
    if require_target and not (config.treated and config.outcome):
        raise ConfigError("a target needs treated variables and an outcome")
    return config
