import logging
import time

import pytest

from config import Config, read_config_file
from src.utils.errors import ConfigError
from src.utils.logger import get_logger
from src.utils.parallel import ordered_map


class TestConfig:
    def test_defaults(self):
        config = Config()
        assert config.D_SCHEDULE == Config.D_SCHEDULE
        assert config.TOL == Config.TOL
        assert config.WINDOW_FRACTION <= 1

    def test_overrides_are_cast(self):
        config = Config(d_schedule='1,2,4', tol='0.01', seed='3')
        assert config.D_SCHEDULE == (1, 2, 4)
        assert config.TOL == 0.01
        assert config.SEED == 3

    def test_class_defaults_untouched(self):
        before = Config.TOL
        Config(tol=0.5)
        assert Config.TOL == before

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("# run options\ntol = 0.01\nseed = 7  # fixed\n\n")
        config = Config.load(str(path), {'seed': 9, 'tol': None})
        assert config.TOL == 0.01
        assert config.SEED == 9

    def test_environment_file(self, tmp_path, monkeypatch):
        path = tmp_path / 'env.cfg'
        path.write_text("window_fraction = 0.5\n")
        monkeypatch.setenv('LIMCLUST_CONFIG', str(path))
        assert Config.load().WINDOW_FRACTION == 0.5

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match='unknown config key'):
            Config(radius=3)

    @pytest.mark.parametrize('overrides', [
        {'tol': -1},
        {'window_fraction': 1.5},
        {'d_schedule': '1,4,2'},
        {'d_schedule': '0,1'},
        {'seed': -1},
        {'parallelism': 'many'},
    ])
    def test_bad_values(self, overrides):
        with pytest.raises(ConfigError):
            Config(**overrides)

    def test_bad_line(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text("tol 0.1\n")
        with pytest.raises(ConfigError, match='bad.cfg:1'):
            read_config_file(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            Config.load(str(tmp_path / 'absent.cfg'))

    def test_as_dict(self):
        out = Config(d_schedule='1,2').as_dict()
        assert out['d_schedule'] == [1, 2]
        assert all(key == key.lower() for key in out)


def test_ordered_map_keeps_order():
    def slow(i):
        time.sleep(0.001 * (5 - i))
        return i * i

    assert ordered_map(slow, range(5), workers=4) == [0, 1, 4, 9, 16]
    assert ordered_map(slow, [], workers=4) == []


def test_loggers_share_the_package_root():
    root = logging.getLogger('limclust')
    logger = get_logger('src.spectrum.detection')
    assert logger.name == 'limclust.detection'
    assert logger.parent is root
