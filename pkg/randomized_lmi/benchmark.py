import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass

logger = logging.getLogger(__name__)


@dataclass()
class Stopwatch:
    name: str
    start: int = 0
    end: int = 0

    @property
    def duration_s(self):
        end = self.end or time.perf_counter_ns()
        return (end - self.start) / 1000000000


@contextmanager
def stopwatch(name):
    watch = Stopwatch(name)
    watch.start = time.perf_counter_ns()
    try:
        yield watch
    finally:
        watch.end = time.perf_counter_ns()
        logger.debug('"%s" took %.6f s', name, watch.duration_s)
