import copy
import json
import logging
import os

from .logger import Logger


class Config:
    """Application configuration backed by config.json"""

    DEFAULT_CONFIG = {
        "logging": {
            "level": "INFO",
            "log_to_file": False,
            "log_performance": True
        },
        "geometry": {
            "max_shear_order": 4
        },
        "generator": {
            "vanishing_moments": 8,
            "cascade_depth": 10,
            "window_order": 11
        },
        "transform": {
            "alpha": 0.335,
            "method": "grid",
            "q": 16,
            "tol": 1e-8,
            "floor": 1e-14,
            "line_samples": 64,
            "max_depth": 14,
            "j_min": 4,
            "j_max": 8
        },
        "analysis": {
            "s_min": -1.0,
            "s_max": 1.0,
            "s_step": 0.05,
            "b_min": -5.0,
            "b_max": 5.0,
            "b_step": 0.1,
            "refine_factor": 5,
            "off_boundary_after": 4,
            "bending_scales": 3
        },
        "runtime": {
            "threads": 0
        }
    }

    _instance = None
    _initialized = False

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
        return cls._instance

    def __init__(self, config_path=None):
        if self._initialized:
            return

        self.logger = Logger().get_logger('config')

        if config_path is None:
            base_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
            self.config_path = os.path.join(base_dir, 'config.json')
        else:
            self.config_path = config_path

        self.config = self._load_config()
        self._setup_logging()

        self._initialized = True

    def _load_config(self):
        """Load configuration from file, falling back to (and writing) the defaults"""
        try:
            if os.path.exists(self.config_path):
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    loaded = json.load(f)
                self.logger.debug(f"Configuration loaded from {self.config_path}")
                return self._merge_defaults(loaded)
        except (OSError, ValueError) as e:
            self.logger.error(f"Error loading configuration: {e}")

        self._save_config(self.DEFAULT_CONFIG)
        return copy.deepcopy(self.DEFAULT_CONFIG)

    def _merge_defaults(self, loaded):
        """Fill sections and keys missing from the file with defaults"""
        merged = copy.deepcopy(self.DEFAULT_CONFIG)
        for section, values in loaded.items():
            if isinstance(values, dict):
                merged.setdefault(section, {}).update(values)
            else:
                merged[section] = values
        return merged

    def _save_config(self, config):
        """Save configuration to file"""
        try:
            with open(self.config_path, 'w', encoding='utf-8') as f:
                json.dump(config, f, indent=4)
            self.logger.debug(f"Configuration saved to {self.config_path}")
            return True
        except OSError as e:
            self.logger.error(f"Error saving configuration: {e}")
            return False

    def _setup_logging(self):
        """Configure logging based on settings"""
        log_level_name = self.config.get('logging', {}).get('level', 'INFO')
        log_level = getattr(logging, log_level_name, logging.INFO)
        log_to_file = self.config.get('logging', {}).get('log_to_file', False)

        Logger(log_level=log_level, log_to_file=log_to_file, reconfigure=True)
        self.logger = Logger().get_logger('config')

    def get(self, section, key=None, default=None):
        """Get a configuration value, or a whole section when key is None"""
        if key is None:
            return self.config.get(section, {})
        return self.config.get(section, {}).get(key, default)

    def set(self, section, key, value, persist=True):
        """Set a configuration value"""
        if section not in self.config:
            self.config[section] = {}

        self.config[section][key] = value
        if persist:
            self._save_config(self.config)

        if section == 'logging':
            self._setup_logging()
