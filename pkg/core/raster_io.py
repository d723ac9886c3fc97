import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from core.signals import DEFAULT_DOMAIN, RasterSignal
from utils.errors import MalformedHeaderError, MissingFileError, UnsupportedFormatError
from utils.logger import Logger
from utils.performance import PerformanceLogger

PGM_MAGIC = (b"P2", b"P5")


class RasterProcessor:
    """Reads and writes 8-bit PGM rasters through Pillow"""

    def __init__(self, domain=DEFAULT_DOMAIN):
        self.logger = Logger().get_logger('raster_io')
        self.perf = PerformanceLogger()
        self.domain = tuple(float(v) for v in domain)

    def _check_magic(self, path):
        with open(path, 'rb') as f:
            magic = f.read(2)
        if magic not in PGM_MAGIC:
            self.logger.error(f"Not a P2/P5 PGM file: {path} (magic={magic!r})")
            raise UnsupportedFormatError(f"{path}: expected a P2 or P5 PGM file, found magic {magic!r}")
        return magic

    @PerformanceLogger().log_execution_time
    def load(self, path):
        """Load a PGM file as a RasterSignal with values scaled to [0, 1]"""
        self.logger.info(f"Loading raster from path: {path}")

        if not os.path.exists(path):
            self.logger.error(f"Raster file not found: {path}")
            raise MissingFileError(f"raster file not found: {path}")

        magic = self._check_magic(path)
        try:
            with Image.open(path) as image:
                image.load()
                mode = image.mode
                pixels = np.asarray(image)
        except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
            self.logger.error(f"Error decoding PGM {path}: {e}")
            raise MalformedHeaderError(f"{path}: malformed PGM ({e})") from e

        if mode != 'L':
            raise UnsupportedFormatError(f"{path}: only 8-bit PGM is supported, got mode {mode}")

        values = pixels.astype(float) / 255.0
        self.logger.info(f"Loaded raster: {path} ({values.shape[1]}x{values.shape[0]}, {magic.decode()})")
        return RasterSignal(values, self.domain, path=str(path))

    def to_bytes(self, raster):
        return np.clip(np.rint(np.asarray(raster.values) * 255.0), 0, 255).astype(np.uint8)

    @PerformanceLogger().log_execution_time
    def save_pgm(self, raster, path):
        """Write a binary (P5) PGM; values are quantized to 8 bits"""
        self._ensure_parent(path)
        Image.fromarray(self.to_bytes(raster)).save(path, format='PPM')
        self.logger.info(f"Saved raster to {path} ({raster.width}x{raster.height})")
        return path

    def save_csv(self, raster, path):
        """Write raw pixel values, one image row per line"""
        self._ensure_parent(path)
        np.savetxt(path, np.asarray(raster.values), delimiter=',', fmt='%.17g')
        self.logger.info(f"Saved raster values to {path}")
        return path

    def _ensure_parent(self, path):
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.exists(directory):
            os.makedirs(directory)
            self.logger.debug(f"Created output directory: {directory}")


def load_raster(path, domain=DEFAULT_DOMAIN):
    return RasterProcessor(domain).load(path)


def save_raster_pgm(raster, path):
    return RasterProcessor(raster.domain).save_pgm(raster, path)


def save_raster_csv(raster, path):
    return RasterProcessor(raster.domain).save_csv(raster, path)
