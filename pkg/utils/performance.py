import functools
import time

from .logger import Logger


class PerformanceLogger:
    """Execution-time tracing for sweeps, curves and commands"""

    def __init__(self, enabled=True):
        self.logger = Logger().get_logger('performance')
        self.enable_logging = enabled

    def set_enable_logging(self, enable):
        """Enable or disable performance logging"""
        self.enable_logging = enable

    def log_execution_time(self, func=None, threshold_ms=None):
        """Decorator that logs how long the wrapped callable ran

        Args:
            func: The function to decorate
            threshold_ms: Only log if execution time exceeds this threshold (in ms)
        """
        def decorator(f):
            @functools.wraps(f)
            def wrapper(*args, **kwargs):
                if not self.enable_logging:
                    return f(*args, **kwargs)

                start_time = time.perf_counter()
                result = f(*args, **kwargs)
                execution_time_ms = (time.perf_counter() - start_time) * 1000

                if threshold_ms is None or execution_time_ms > threshold_ms:
                    self.logger.debug(f"{f.__qualname__} executed in {execution_time_ms:.2f}ms")

                return result
            return wrapper

        # Handle both @log_execution_time and @log_execution_time(threshold_ms=100)
        if func is None:
            return decorator
        return decorator(func)

    def start_timer(self, name):
        """Start a named timer"""
        return Timer(name, self.logger, self.enable_logging)


class Timer:
    """Context manager for timing code blocks; ``elapsed_ms`` is kept after exit"""

    def __init__(self, name, logger, enabled=True):
        self.name = name
        self.logger = logger
        self.enabled = enabled
        self.start_time = None
        self.elapsed_ms = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed_ms = (time.perf_counter() - self.start_time) * 1000
        if self.enabled:
            status = "failed after" if exc_type is not None else "completed in"
            self.logger.debug(f"{self.name} {status} {self.elapsed_ms:.2f}ms")
        return False
