import os
from typing import Dict, Optional

from dotenv import load_dotenv

from src.utils.errors import ConfigError

load_dotenv()


def _ints(text: str):
    return tuple(int(part) for part in str(text).split(',') if part.strip())


class Config:
    # Tolerances
    TOL = float(os.getenv('LIMCLUST_TOL', 0.05))
    ATOM_TOL = float(os.getenv('LIMCLUST_ATOM_TOL', 0.02))
    LAMBDA_MIN = float(os.getenv('LIMCLUST_LAMBDA_MIN', 0.05))
    UNSTABLE_RESIDUE = float(os.getenv('LIMCLUST_UNSTABLE_RESIDUE', 0.25))

    # Tail window and radii
    WINDOW_FRACTION = float(os.getenv('LIMCLUST_WINDOW_FRACTION', 0.25))
    D_SCHEDULE = _ints(os.getenv('LIMCLUST_D_SCHEDULE', '1,2,4,8'))
    RADIUS_CAP = int(os.getenv('LIMCLUST_RADIUS_CAP', 32))
    PROFILE_DMAX = int(os.getenv('LIMCLUST_PROFILE_DMAX', 8))
    SCHEDULE_DEPTH = int(os.getenv('LIMCLUST_SCHEDULE_DEPTH', 3))

    # Inversion
    INVERSION_T = float(os.getenv('LIMCLUST_INVERSION_T', 200))
    INVERSION_GRID = int(os.getenv('LIMCLUST_INVERSION_GRID', 32768))
    MOMENT_W = int(os.getenv('LIMCLUST_MOMENT_W', 40))
    MOMENT_T = float(os.getenv('LIMCLUST_MOMENT_T', 20))

    # Expansion and enumeration limits
    EXPANSION_THRESHOLD = float(os.getenv('LIMCLUST_EXPANSION_THRESHOLD', 0.1))
    EXACT_SUBSET_CAP = int(os.getenv('LIMCLUST_EXACT_SUBSET_CAP', 16))
    SAMPLE_COUNT = int(os.getenv('LIMCLUST_SAMPLE_COUNT', 2000))
    TEST_FAMILY_CAP = int(os.getenv('LIMCLUST_TEST_FAMILY_CAP', 64))
    MAX_DECOMPOSITION_VARS = int(os.getenv('LIMCLUST_MAX_DECOMPOSITION_VARS', 6))
    MAX_DECOMPOSITION_RADIUS = int(os.getenv('LIMCLUST_MAX_DECOMPOSITION_RADIUS', 16))

    # Runtime
    BATTERY_FILE = os.getenv('LIMCLUST_BATTERY_FILE', '')
    PARALLELISM = int(os.getenv('LIMCLUST_PARALLELISM', 1))
    SEED = int(os.getenv('LIMCLUST_SEED', 0))
    OUTPUT_DIR = os.getenv('LIMCLUST_OUTPUT_DIR', 'output')
    LOG_LEVEL = os.getenv('LIMCLUST_LOG_LEVEL', 'INFO')

    _CASTS = {
        'D_SCHEDULE': _ints,
        'BATTERY_FILE': str,
        'OUTPUT_DIR': str,
        'LOG_LEVEL': str,
    }

    def __init__(self, **overrides):
        for key in self.keys():
            setattr(self, key, getattr(type(self), key))
        for key, value in overrides.items():
            self.set(key, value)
        self.validate()

    @classmethod
    def keys(cls):
        return [name for name in vars(Config) if name.isupper() and not name.startswith('_')]

    def set(self, key: str, value):
        """Set one option, casting text values to the default's type"""
        name = key.strip().upper().replace('-', '_')
        if name not in self.keys():
            raise ConfigError(f"unknown config key '{key}'")
        if value is None:
            return
        try:
            if name in self._CASTS:
                cast = self._CASTS[name]
                value = cast(value) if isinstance(value, str) or cast is str else tuple(int(v) for v in value)
            else:
                default = getattr(Config, name)
                value = type(default)(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for '{key}': {value!r} ({e})")
        setattr(self, name, value)

    def validate(self):
        """Every numeric option must be positive (the seed may be zero)"""
        for name in self.keys():
            value = getattr(self, name)
            if name == 'SEED':
                if value < 0:
                    raise ConfigError("seed must be non-negative")
            elif name == 'D_SCHEDULE':
                if not value or any(d <= 0 for d in value) or list(value) != sorted(set(value)):
                    raise ConfigError("d_schedule must be a strictly increasing list of positive radii")
            elif isinstance(value, (int, float)) and value <= 0:
                raise ConfigError(f"{name.lower()} must be positive, got {value}")
        if not 0 < self.WINDOW_FRACTION <= 1:
            raise ConfigError("window_fraction must lie in (0, 1]")

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[Dict] = None) -> 'Config':
        """Defaults, then the key-value file, then explicit overrides"""
        values = {}
        path = path or os.getenv('LIMCLUST_CONFIG')
        if path:
            values.update(read_config_file(path))
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        return cls(**values)

    def as_dict(self) -> Dict:
        out = {}
        for name in self.keys():
            value = getattr(self, name)
            out[name.lower()] = list(value) if isinstance(value, tuple) else value
        return out


def read_config_file(path: str) -> Dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment"""
    values = {}
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            lines = handle.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        key, value = line.split('=', 1)
        values[key.strip()] = value.strip()
    return values
